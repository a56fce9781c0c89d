#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nst/core.hpp"
#include "nst/diffusion.hpp"
#include "nst/fft.hpp"

namespace nst {

// ---------------------------------------------------------------------------
// Haar wavelet

struct HaarSubbands {
  GrayImage approx;  // LL
  GrayImage lh;      // (a + b - c - d) / 2, vertical detail
  GrayImage hl;      // (a - b + c - d) / 2, horizontal detail
  GrayImage hh;      // (a - b - c + d) / 2
};

/// One-level orthonormal 2D Haar transform. For the 2x2 block [[a, b], [c, d]]
/// every output is a signed sum of the four pixels divided by 2. A trailing odd
/// row/column is dropped.
inline HaarSubbands haar_transform(const GrayImage& img) {
  if (img.width() < 2 || img.height() < 2) throw UsageError("Haar transform needs at least 2x2 pixels");
  const std::size_t w = img.width() / 2, h = img.height() / 2;
  HaarSubbands out{GrayImage(w, h), GrayImage(w, h), GrayImage(w, h), GrayImage(w, h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double a = img(2 * x, 2 * y), b = img(2 * x + 1, 2 * y);
      const double c = img(2 * x, 2 * y + 1), d = img(2 * x + 1, 2 * y + 1);
      out.approx(x, y) = (a + b + c + d) / 2.0;
      out.lh(x, y) = (a + b - c - d) / 2.0;
      out.hl(x, y) = (a - b + c - d) / 2.0;
      out.hh(x, y) = (a - b - c + d) / 2.0;
    }
  return out;
}

struct WaveletDetail {
  std::vector<double> coefficients;  // LH, then HL, then HH
};

inline WaveletDetail haar_detail(const GrayImage& img) {
  const auto bands = haar_transform(img);
  WaveletDetail d;
  d.coefficients.reserve(3 * bands.lh.size());
  for (const GrayImage* band : {&bands.lh, &bands.hl, &bands.hh})
    d.coefficients.insert(d.coefficients.end(), band->pixels().begin(), band->pixels().end());
  return d;
}

// ---------------------------------------------------------------------------
// Moments

struct Kurtosis {
  double plain = 0.0;   // m4 / m2^2, 3 for a Gaussian
  double excess = 0.0;  // plain - 3
};

inline Kurtosis kurtosis(std::span<const double> x) {
  if (x.size() < 4) throw UsageError("kurtosis needs at least 4 samples");
  const double m = mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - m) * (v - m);
    m2 += d;
    m4 += d * d;
  }
  m2 /= static_cast<double>(x.size());
  m4 /= static_cast<double>(x.size());
  if (!(m2 > 0.0)) throw NumericError("zero variance: kurtosis undefined");
  const double k = m4 / (m2 * m2);
  return {k, k - 3.0};
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

struct KsOutcome {
  double statistic = 0.0;  // D
  double critical = 0.0;
  double alpha = 0.05;
  bool accepted = false;  // D < critical
  std::size_t n = 0;
};

/// sup |F_n(x) - F(x)| for an ascending sample.
inline double ks_statistic_sorted(std::span<const double> sorted, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  return ks_statistic_sorted(sample, cdf);
}

/// Asymptotic two-sided coefficient c(alpha) = sqrt(-ln(alpha / 2) / 2); c(0.05) = 1.358.
inline double ks_coefficient(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

inline double ks_critical(double alpha, std::size_t n) {
  return ks_coefficient(alpha) / std::sqrt(static_cast<double>(n));
}

/// Critical D for normality with estimated mean and variance (Lilliefors case),
/// from Stephens' modified statistic D (sqrt(n) - 0.01 + 0.85 / sqrt(n)).
inline double lilliefors_critical(double alpha, std::size_t n) {
  struct Row {
    double alpha, value;
  };
  static constexpr Row kTable[] = {{0.15, 0.775}, {0.10, 0.819}, {0.05, 0.895}, {0.025, 0.955}, {0.01, 1.035}};
  for (const auto& row : kTable) {
    if (std::abs(row.alpha - alpha) < 1e-12) {
      const double rn = std::sqrt(static_cast<double>(n));
      return row.value / (rn - 0.01 + 0.85 / rn);
    }
  }
  throw UsageError("Lilliefors critical values are tabulated only for alpha in {0.15, 0.10, 0.05, 0.025, 0.01}");
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Gaussianity of x after standardizing by its sample mean and standard deviation.
inline KsOutcome ks_test_gaussian(std::span<const double> x, double alpha, bool lilliefors = false) {
  if (x.size() < 8) throw UsageError("Gaussianity test needs at least 8 samples");
  const double m = mean(x);
  const double sd = std::sqrt(variance(x));
  if (!(sd > 0.0)) throw NumericError("zero variance input to Gaussianity test");
  std::vector<double> z(x.size());
  std::transform(x.begin(), x.end(), z.begin(), [&](double v) { return (v - m) / sd; });
  KsOutcome out;
  out.statistic = ks_statistic(std::move(z), normal_cdf);
  out.alpha = alpha;
  out.n = x.size();
  out.critical = lilliefors ? lilliefors_critical(alpha, x.size()) : ks_critical(alpha, x.size());
  out.accepted = out.statistic < out.critical;
  return out;
}

/// Test against Uniform[-pi, pi] with the exact null CDF.
inline KsOutcome ks_test_uniform_angles(std::vector<double> phases, double alpha) {
  if (phases.empty()) throw NumericError("no phases to test");
  KsOutcome out;
  out.n = phases.size();
  out.statistic = ks_statistic(std::move(phases), [](double p) {
    return std::clamp((p + std::numbers::pi) / (2.0 * std::numbers::pi), 0.0, 1.0);
  });
  out.alpha = alpha;
  out.critical = ks_critical(alpha, out.n);
  out.accepted = out.statistic < out.critical;
  return out;
}

// ---------------------------------------------------------------------------
// Fourier phase

struct PhaseSpectrum {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> phases;      // in [-pi, pi]
  std::vector<double> magnitudes;  // >= 0
};

inline PhaseSpectrum phase_spectrum(const GrayImage& img) {
  const auto s = fft2(img);
  PhaseSpectrum p{s.width, s.height, {}, {}};
  p.phases.reserve(s.bins.size());
  p.magnitudes.reserve(s.bins.size());
  for (const auto& c : s.bins) {
    p.phases.push_back(std::arg(c));
    p.magnitudes.push_back(std::abs(c));
  }
  return p;
}

/// One bin per conjugate pair, excluding self-conjugate bins (DC and the
/// Nyquist bins), whose phases are pinned to {0, pi} for real images.
inline std::vector<std::size_t> half_spectrum_indices(std::size_t width, std::size_t height) {
  Spectrum shape{width, height, {}};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width * height; ++i)
    if (i < shape.conjugate_index(i)) out.push_back(i);
  return out;
}

/// Phases of the non-redundant half spectrum. Bins whose magnitude is below
/// 1e-12 of the largest non-DC magnitude carry no phase information and are skipped.
inline std::vector<double> half_spectrum_phases(const PhaseSpectrum& p) {
  const auto idx = half_spectrum_indices(p.width, p.height);
  double peak = 0.0;
  for (auto i : idx) peak = std::max(peak, p.magnitudes[i]);
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx)
    if (p.magnitudes[i] > 1e-12 * peak) out.push_back(p.phases[i]);
  return out;
}

inline KsOutcome ks_test_uniform_phase(const GrayImage& img, double alpha) {
  if (img.width() < 8 || img.height() < 8) throw UsageError("phase test needs an image of at least 8x8");
  auto phases = half_spectrum_phases(phase_spectrum(img));
  if (phases.empty()) throw NumericError("zero variance: image has no non-DC spectral content");
  return ks_test_uniform_angles(std::move(phases), alpha);
}

/// Surrogate with the same magnitude spectrum and i.i.d. Uniform[-pi, pi)
/// phases, Hermitian-symmetric so the inverse is real.
inline GrayImage randomize_phase(const GrayImage& img, std::uint64_t seed) {
  Spectrum s = fft2(img);
  Rng rng(seed);
  for (std::size_t i : half_spectrum_indices(s.width, s.height)) {
    const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const auto value = std::polar(std::abs(s.bins[i]), phi);
    s.bins[i] = value;
    s.bins[s.conjugate_index(i)] = std::conj(value);
  }
  const auto field = ifft2(std::move(s));
  double real_norm = 0.0, imag_norm = 0.0;
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    out[i] = field[i].real();
    real_norm += field[i].real() * field[i].real();
    imag_norm += field[i].imag() * field[i].imag();
  }
  if (std::sqrt(imag_norm) > 1e-9 * std::max(std::sqrt(real_norm), 1e-300) && imag_norm > 0.0)
    throw NumericError("phase randomization left a non-negligible imaginary part");
  return GrayImage(img.width(), img.height(), std::move(out));
}

// ---------------------------------------------------------------------------
// Report

struct GaussianityReport {
  bool degenerate_raw = false;  // raw image has no detail energy at all
  std::optional<KsOutcome> raw;
  std::optional<Kurtosis> raw_kurtosis;
  bool degenerate_texture = false;  // texture layer has (numerically) zero variance
  std::optional<KsOutcome> texture;
  std::optional<Kurtosis> texture_kurtosis;
  std::optional<KsOutcome> texture_phase;
  DiffusionSettings settings;
};

/// True when the layer's spread is negligible next to the source image's range.
inline bool is_degenerate_layer(const GrayImage& layer, const GrayImage& source) {
  const auto [lo, hi] = min_max(source.pixels());
  const double sd = std::sqrt(variance(layer.pixels()));
  return !(sd > 1e-9 * std::max(hi - lo, 1e-300));
}

/// Haar-detail Gaussianity of the raw image and of its texture layer, plus
/// the phase-uniformity test on the texture layer.
inline GaussianityReport gaussianity_report(const GrayImage& img, const SeparationResult& sep, double alpha,
                                            bool lilliefors = false) {
  GaussianityReport r;
  r.settings = sep.settings;
  const auto raw = haar_detail(img);
  if (variance(raw.coefficients) > 0.0) {
    r.raw = ks_test_gaussian(raw.coefficients, alpha, lilliefors);
    r.raw_kurtosis = kurtosis(raw.coefficients);
  } else {
    r.degenerate_raw = true;
  }
  if (is_degenerate_layer(sep.texture, img)) {
    r.degenerate_texture = true;
    return r;
  }
  const auto tex = haar_detail(sep.texture);
  r.texture = ks_test_gaussian(tex.coefficients, alpha, lilliefors);
  r.texture_kurtosis = kurtosis(tex.coefficients);
  r.texture_phase = ks_test_uniform_phase(sep.texture, alpha);
  return r;
}

inline GaussianityReport gaussianity_report(const GrayImage& img, const DiffusionSettings& settings,
                                            double alpha, bool lilliefors = false) {
  return gaussianity_report(img, separate(img, settings), alpha, lilliefors);
}

}  // namespace nst
