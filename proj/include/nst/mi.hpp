#pragma once

// Plug-in (histogram) entropy and mutual information, scale-wise MI between
// consecutive pyramid levels, and entropy-normalized MI between patches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nst/core.hpp"

namespace nst {

struct HistogramSpec {
  std::uint32_t bins = 256;  // quantization range is the joint min/max of each compared pair

  void validate() const {
    if (bins < 2) throw UsageError("histogram needs at least 2 bins");
  }
};

namespace mi_detail {

// -sum p log2 p from integer counts, summed in index order.
template <typename Counts>
double entropy_from_counts(const Counts& counts, double total) {
  double h = 0.0;
  for (const auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

inline std::uint32_t max_code(std::span<const std::uint32_t> codes) {
  return codes.empty() ? 0u : *std::max_element(codes.begin(), codes.end());
}

}  // namespace mi_detail

/// Shannon entropy in bits of the empirical code distribution.
inline double entropy(std::span<const std::uint32_t> codes) {
  if (codes.empty()) throw UsageError("entropy of empty sequence");
  std::vector<std::uint64_t> counts(std::size_t{mi_detail::max_code(codes)} + 1, 0);
  for (auto c : codes) ++counts[c];
  return mi_detail::entropy_from_counts(counts, static_cast<double>(codes.size()));
}

inline double entropy(const QuantizedImage& q) { return entropy(q.codes()); }

struct MiResult {
  double mi = 0.0;   // bits
  double hx = 0.0;   // H(X)
  double hy = 0.0;   // H(Y)
  double hxy = 0.0;  // H(X, Y)

  /// H(X | Y) = H(X, Y) - H(Y); mi == hx - conditional_x() up to rounding.
  double conditional_x() const { return hxy - hy; }
};

/// Plug-in MI = H(X) + H(Y) - H(X, Y), all three from one joint histogram.
inline MiResult mutual_information(std::span<const std::uint32_t> x, std::span<const std::uint32_t> y) {
  if (x.size() != y.size()) throw UsageError("mutual information needs sequences of equal length");
  if (x.empty()) throw UsageError("mutual information of empty sequences");
  const std::size_t nx = std::size_t{mi_detail::max_code(x)} + 1;
  const std::size_t ny = std::size_t{mi_detail::max_code(y)} + 1;
  const double total = static_cast<double>(x.size());
  std::vector<std::uint64_t> cx(nx, 0), cy(ny, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++cx[x[i]];
    ++cy[y[i]];
  }
  MiResult r;
  r.hx = mi_detail::entropy_from_counts(cx, total);
  r.hy = mi_detail::entropy_from_counts(cy, total);
  if (nx * ny <= (std::size_t{1} << 22)) {
    std::vector<std::uint64_t> joint(nx * ny, 0);
    for (std::size_t i = 0; i < x.size(); ++i) ++joint[std::size_t{x[i]} * ny + y[i]];
    r.hxy = mi_detail::entropy_from_counts(joint, total);
  } else {
    std::unordered_map<std::uint64_t, std::uint64_t> joint;
    for (std::size_t i = 0; i < x.size(); ++i) ++joint[std::uint64_t{x[i]} * ny + y[i]];
    std::vector<std::pair<std::uint64_t, std::uint64_t>> cells(joint.begin(), joint.end());
    std::sort(cells.begin(), cells.end());
    std::vector<std::uint64_t> counts;
    counts.reserve(cells.size());
    for (const auto& [key, c] : cells) counts.push_back(c);
    r.hxy = mi_detail::entropy_from_counts(counts, total);
  }
  // Rounding can push an exact zero a few ulps negative.
  r.mi = std::max(0.0, r.hx + r.hy - r.hxy);
  return r;
}

/// Quantizes both sequences over their joint min/max with spec.bins bins, then MI.
inline MiResult mutual_information(std::span<const double> x, std::span<const double> y,
                                   const HistogramSpec& spec) {
  spec.validate();
  if (x.size() != y.size()) throw UsageError("mutual information needs sequences of equal length");
  if (x.empty()) throw UsageError("mutual information of empty sequences");
  const auto [xl, xh] = min_max(x);
  const auto [yl, yh] = min_max(y);
  const double lo = std::min(xl, yl), hi = std::max(xh, yh);
  const auto qx = quantize_values(x, spec.bins, lo, hi);
  const auto qy = quantize_values(y, spec.bins, lo, hi);
  return mutual_information(qx, qy);
}

// ---------------------------------------------------------------------------
// Pyramid

struct Pyramid {
  std::vector<GrayImage> levels;  // levels[0] is the input, each next one half the size
};

/// Separable (1, 4, 6, 4, 1) / 16 filter with replicated borders.
inline GrayImage binomial_blur(const GrayImage& img) {
  static constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const auto w = static_cast<std::ptrdiff_t>(img.width()), h = static_cast<std::ptrdiff_t>(img.height());
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };
  GrayImage tmp(img.width(), img.height());
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * img(clampi(x + k, w), y);
      tmp(x, y) = acc;
    }
  GrayImage out(img.width(), img.height());
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * tmp(x, clampi(y + k, h));
      out(x, y) = acc;
    }
  return out;
}

inline GrayImage pyramid_reduce(const GrayImage& img) {
  const std::size_t w = img.width() / 2, h = img.height() / 2;
  if (w == 0 || h == 0) throw UsageError("image too small for another pyramid level");
  const GrayImage blurred = binomial_blur(img);
  GrayImage out(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out(x, y) = blurred(2 * x, 2 * y);
  return out;
}

inline Pyramid build_pyramid(const GrayImage& img, std::size_t levels) {
  if (levels < 2) throw UsageError("pyramid needs at least 2 levels");
  if ((img.width() >> (levels - 1)) == 0 || (img.height() >> (levels - 1)) == 0)
    throw UsageError("too many pyramid levels for a " + std::to_string(img.width()) + "x" +
                     std::to_string(img.height()) + " image");
  Pyramid p;
  p.levels.push_back(img);
  for (std::size_t i = 1; i < levels; ++i) p.levels.push_back(pyramid_reduce(p.levels.back()));
  return p;
}

/// Nearest-neighbour replication of a coarse level onto a finer grid.
inline GrayImage upsample_nearest(const GrayImage& coarse, std::size_t width, std::size_t height) {
  GrayImage out(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      out(x, y) = coarse(std::min(x / 2, coarse.width() - 1), std::min(y / 2, coarse.height() - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Scale-wise MI

struct MiScaleEntry {
  std::size_t n = 0;             // index of the finer level, coarsest level = 1
  std::size_t finer_level = 0;   // position of the finer level in Pyramid::levels
  double mi = 0.0;               // MI(I_n, I_{n-1})
  double entropy_fine = 0.0;     // H(I_n)
  double entropy_coarse = 0.0;   // H(I_{n-1})
  double conditional = 0.0;      // H(I_n | I_{n-1})
};

struct MiScaleReport {
  std::size_t levels = 0;
  HistogramSpec spec;
  std::vector<MiScaleEntry> entries;  // ordered n = levels .. 2
};

inline MiScaleReport mi_scales(const Pyramid& pyramid, const HistogramSpec& spec) {
  spec.validate();
  const std::size_t count = pyramid.levels.size();
  if (count < 2) throw UsageError("scale-wise MI needs at least 2 pyramid levels");
  MiScaleReport report{count, spec, {}};
  for (std::size_t k = 0; k + 1 < count; ++k) {
    const GrayImage& fine = pyramid.levels[k];
    const GrayImage coarse = upsample_nearest(pyramid.levels[k + 1], fine.width(), fine.height());
    const MiResult r = mutual_information(fine.pixels(), coarse.pixels(), spec);
    MiScaleEntry e;
    e.n = count - k;
    e.finer_level = k;
    e.entropy_fine = r.hx;
    e.entropy_coarse = r.hy;
    e.conditional = r.conditional_x();
    e.mi = r.mi;
    report.entries.push_back(e);
  }
  return report;
}

inline MiScaleReport mi_scales(const GrayImage& img, std::size_t levels, const HistogramSpec& spec) {
  return mi_scales(build_pyramid(img, levels), spec);
}

// ---------------------------------------------------------------------------
// Patch-wise MI

struct PatchLevel {
  std::size_t level = 0;  // 1 = input resolution
  std::size_t width = 0, height = 0;
  std::size_t patches_x = 0, patches_y = 0;
  // matrix[i * count + j] = MI(P_i, P_j) / H(P_i); 0 when H(P_i) = 0.
  std::vector<double> matrix;
  std::vector<double> off_diagonal;  // all i != j entries, row-major order

  std::size_t patch_count() const { return patches_x * patches_y; }
};

struct MiPatchReport {
  std::size_t patch = 32;
  HistogramSpec spec;
  std::vector<PatchLevel> levels;
};

inline std::vector<std::vector<double>> extract_patches(const GrayImage& img, std::size_t patch) {
  const std::size_t px = img.width() / patch, py = img.height() / patch;
  std::vector<std::vector<double>> patches;
  patches.reserve(px * py);
  for (std::size_t by = 0; by < py; ++by)
    for (std::size_t bx = 0; bx < px; ++bx) {
      std::vector<double> p;
      p.reserve(patch * patch);
      for (std::size_t y = 0; y < patch; ++y) {
        const auto row = img.row(by * patch + y).subspan(bx * patch, patch);
        p.insert(p.end(), row.begin(), row.end());
      }
      patches.push_back(std::move(p));
    }
  return patches;
}

/// Normalized MI(P_i, P_j) / H(P_i), pixels paired by identical position
/// within the patch. The ratio is not symmetric and can exceed 1.
inline double normalized_patch_mi(std::span<const double> pi, std::span<const double> pj,
                                  const HistogramSpec& spec) {
  const MiResult r = mutual_information(pi, pj, spec);
  return r.hx > 0.0 ? r.mi / r.hx : 0.0;
}

inline PatchLevel patch_level_mi(const GrayImage& img, std::size_t patch, const HistogramSpec& spec) {
  if (patch < 8) throw UsageError("patch size must be at least 8");
  if (img.width() < patch || img.height() < patch)
    throw UsageError("patch size " + std::to_string(patch) + " exceeds level size " +
                     std::to_string(img.width()) + "x" + std::to_string(img.height()));
  PatchLevel out;
  out.width = img.width();
  out.height = img.height();
  out.patches_x = img.width() / patch;
  out.patches_y = img.height() / patch;
  const auto patches = extract_patches(img, patch);
  const std::size_t count = patches.size();
  out.matrix.assign(count * count, 0.0);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < count; ++j) {
      const double v = normalized_patch_mi(patches[i], patches[j], spec);
      out.matrix[i * count + j] = v;
      if (i != j) out.off_diagonal.push_back(v);
    }
  return out;
}

inline MiPatchReport mi_patches(const Pyramid& pyramid, std::size_t patch, const HistogramSpec& spec) {
  spec.validate();
  MiPatchReport report{patch, spec, {}};
  for (std::size_t k = 0; k < pyramid.levels.size(); ++k) {
    PatchLevel level = patch_level_mi(pyramid.levels[k], patch, spec);
    level.level = k + 1;
    report.levels.push_back(std::move(level));
  }
  return report;
}

inline MiPatchReport mi_patches(const GrayImage& img, std::size_t patch, std::size_t levels,
                                const HistogramSpec& spec) {
  if (levels < 1) throw UsageError("patch analysis needs at least one level");
  Pyramid pyramid;
  if (levels == 1) {
    pyramid.levels.push_back(img);
  } else {
    pyramid = build_pyramid(img, levels);
  }
  for (const auto& level : pyramid.levels)
    if (level.width() < patch || level.height() < patch)
      throw UsageError("pyramid level " + std::to_string(level.width()) + "x" + std::to_string(level.height()) +
                       " is smaller than patch size " + std::to_string(patch));
  return mi_patches(pyramid, patch, spec);
}

/// Quantile by linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("quantile of empty sequence");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct SpreadSummary {
  double median = 0.0;
  double iqr = 0.0;
  std::size_t count = 0;
};

inline SpreadSummary summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  return {quantile(values, 0.5), quantile(values, 0.75) - quantile(values, 0.25), values.size()};
}

/// Histogram of values over [0, 1] with `bins` equal bins; values are clamped
/// into range for display only.
inline std::vector<std::size_t> unit_histogram(const std::vector<double>& values, std::size_t bins) {
  std::vector<std::size_t> h(bins, 0);
  for (double v : values) {
    const double c = std::clamp(v, 0.0, 1.0);
    ++h[std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)))];
  }
  return h;
}

}  // namespace nst
