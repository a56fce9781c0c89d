#pragma once

// Perona-Malik diffusion and the structure/texture split I = I^S + I^T,
// with I^S the diffused image and I^T the residual.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nst/core.hpp"

namespace nst {

enum class Conductance { Exponential, Rational };

inline const char* to_string(Conductance c) { return c == Conductance::Exponential ? "exp" : "rat"; }

inline Conductance parse_conductance(const std::string& s) {
  if (s == "exp") return Conductance::Exponential;
  if (s == "rat") return Conductance::Rational;
  throw UsageError("unknown conductance '" + s + "' (expected exp or rat)");
}

struct DiffusionSettings {
  int iterations = 50;
  std::optional<double> kappa;  // empty: derived from the image (auto_kappa)
  double dt = 0.2;
  Conductance conductance = Conductance::Exponential;

  void validate() const {
    if (iterations < 1) throw UsageError("diffusion needs at least one iteration");
    if (!(dt > 0.0 && dt <= 0.25)) throw UsageError("diffusion time step must lie in (0, 0.25]");
    if (kappa && !(*kappa > 0.0)) throw UsageError("diffusion kappa must be positive");
  }
};

inline double conductance(Conductance kind, double gradient, double kappa) {
  const double r = gradient / kappa;
  return kind == Conductance::Exponential ? std::exp(-r * r) : 1.0 / (1.0 + r * r);
}

inline double median_in_place(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Forward-difference gradient magnitude with replicated borders.
inline std::vector<double> gradient_magnitudes(const GrayImage& img) {
  const std::size_t w = img.width(), h = img.height();
  std::vector<double> mags(img.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double gx = x + 1 < w ? img(x + 1, y) - img(x, y) : 0.0;
      const double gy = y + 1 < h ? img(x, y + 1) - img(x, y) : 0.0;
      mags[y * w + x] = std::hypot(gx, gy);
    }
  return mags;
}

/// Edge threshold K = 4 * 1.4826 * MAD(|grad I|), a robust multiple of the
/// gradient noise scale. Falls back to a tiny positive value when the MAD is 0.
inline double auto_kappa(const GrayImage& img) {
  auto mags = gradient_magnitudes(img);
  const double med = median_in_place(mags);
  for (double& m : mags) m = std::abs(m - med);
  const double mad = median_in_place(mags);
  const double kappa = 4.0 * 1.4826 * mad;
  return kappa > 0.0 ? kappa : 1e-12;
}

inline double resolve_kappa(const GrayImage& img, const DiffusionSettings& settings) {
  return settings.kappa ? *settings.kappa : auto_kappa(img);
}

/// One explicit step u <- u + dt * sum over 4 neighbours of g(|d|) d with
/// zero-flux (replicated) borders. Each flux enters two pixels with opposite
/// signs, so the total intensity is conserved.
inline GrayImage pm_step(const GrayImage& u, double kappa, double dt, Conductance kind) {
  const std::size_t w = u.width(), h = u.height();
  GrayImage out = u;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double c = u(x, y);
      double update = 0.0;
      auto flux = [&](double neighbour) {
        const double d = neighbour - c;
        update += conductance(kind, std::abs(d), kappa) * d;
      };
      if (y > 0) flux(u(x, y - 1));
      if (y + 1 < h) flux(u(x, y + 1));
      if (x > 0) flux(u(x - 1, y));
      if (x + 1 < w) flux(u(x + 1, y));
      out(x, y) = c + dt * update;
    }
  }
  return out;
}

inline GrayImage pm_diffuse(const GrayImage& img, const DiffusionSettings& settings) {
  settings.validate();
  if (img.width() < 3 || img.height() < 3) throw UsageError("diffusion needs an image of at least 3x3");
  const double kappa = resolve_kappa(img, settings);
  GrayImage u = img;
  for (int i = 0; i < settings.iterations; ++i) u = pm_step(u, kappa, settings.dt, settings.conductance);
  return u;
}

/// Sum of absolute 4-neighbour differences (each unordered pair once).
inline double total_variation(const GrayImage& img) {
  double tv = 0.0;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (x + 1 < img.width()) tv += std::abs(img(x + 1, y) - img(x, y));
      if (y + 1 < img.height()) tv += std::abs(img(x, y + 1) - img(x, y));
    }
  return tv;
}

struct SeparationResult {
  GrayImage structure;
  GrayImage texture;
  DiffusionSettings settings;  // kappa is always resolved here
};

namespace diffusion_detail {

// Nudges the structure value by at most a few ulps so that
// structure + (input - structure) reproduces the input in floating point.
// When the input lies in a much finer binade than both layers no such pair
// exists and the plain residual is kept.
inline void split_exact(double input, double& structure, double& texture) {
  texture = input - structure;
  if (structure + texture == input) return;
  for (int step = 1; step <= 8; ++step) {
    for (double direction : {1.0, -1.0}) {
      double s = structure;
      for (int k = 0; k < step; ++k) s = std::nextafter(s, direction * HUGE_VAL);
      const double t = input - s;
      if (s + t == input) {
        structure = s;
        texture = t;
        return;
      }
    }
  }
}

}  // namespace diffusion_detail

inline SeparationResult separate(const GrayImage& img, const DiffusionSettings& settings) {
  DiffusionSettings resolved = settings;
  resolved.kappa = resolve_kappa(img, settings);
  GrayImage structure = pm_diffuse(img, resolved);
  GrayImage texture(img.width(), img.height());
  auto s = structure.pixels();
  auto t = texture.pixels();
  for (std::size_t i = 0; i < img.size(); ++i) diffusion_detail::split_exact(img.pixels()[i], s[i], t[i]);
  return SeparationResult{std::move(structure), std::move(texture), resolved};
}

/// Fraction of pixels where structure + texture reproduces the input bit-exactly.
inline double exact_reconstruction_fraction(const GrayImage& input, const SeparationResult& r) {
  std::size_t exact = 0;
  for (std::size_t i = 0; i < input.size(); ++i)
    if (r.structure.pixels()[i] + r.texture.pixels()[i] == input.pixels()[i]) ++exact;
  return static_cast<double>(exact) / static_cast<double>(input.size());
}

}  // namespace nst
