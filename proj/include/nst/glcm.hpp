#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "nst/core.hpp"

namespace nst {

struct GlcmOffset {
  int dx = 1;
  int dy = 0;

  friend bool operator==(const GlcmOffset&, const GlcmOffset&) = default;
};

/// Directed co-occurrence counts: counts[i * levels + j] is the number of
/// positions where the base pixel has code i and the pixel at (x + dx, y + dy)
/// has code j. Not symmetrized.
struct Glcm {
  std::uint32_t levels = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::uint64_t count(std::uint32_t i, std::uint32_t j) const { return counts[std::size_t{i} * levels + j]; }
  double probability(std::uint32_t i, std::uint32_t j) const {
    return total == 0 ? 0.0 : static_cast<double>(count(i, j)) / static_cast<double>(total);
  }
};

inline void validate_offset(const GlcmOffset& o, std::size_t width, std::size_t height) {
  if (o.dx == 0 && o.dy == 0) throw UsageError("GLCM offset must be nonzero");
  if (static_cast<std::size_t>(std::abs(o.dx)) >= width || static_cast<std::size_t>(std::abs(o.dy)) >= height)
    throw UsageError("GLCM offset (" + std::to_string(o.dx) + "," + std::to_string(o.dy) +
                     ") does not fit a " + std::to_string(width) + "x" + std::to_string(height) + " image");
}

inline Glcm glcm(const QuantizedImage& q, GlcmOffset offset) {
  validate_offset(offset, q.width(), q.height());
  Glcm g{q.levels(), std::vector<std::uint64_t>(std::size_t{q.levels()} * q.levels(), 0), 0};
  const auto w = static_cast<std::ptrdiff_t>(q.width()), h = static_cast<std::ptrdiff_t>(q.height());
  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -offset.dx), x1 = std::min(w, w - offset.dx);
  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -offset.dy), y1 = std::min(h, h - offset.dy);
  for (std::ptrdiff_t y = y0; y < y1; ++y)
    for (std::ptrdiff_t x = x0; x < x1; ++x) {
      const std::uint32_t i = q(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      const std::uint32_t j = q(static_cast<std::size_t>(x + offset.dx), static_cast<std::size_t>(y + offset.dy));
      ++g.counts[std::size_t{i} * g.levels + j];
      ++g.total;
    }
  return g;
}

/// MI in bits of the GLCM joint distribution:
///   sum_{i,j} P(i,j) log2( P(i,j) / (P_i(i) P_j(j)) ),  0 log 0 := 0.
/// Terms are summed in sorted order so a transposed GLCM gives the identical value.
inline double glcm_mi(const Glcm& g) {
  if (g.total == 0) throw NumericError("empty GLCM");
  const std::uint32_t p = g.levels;
  std::vector<std::uint64_t> rows(p, 0), cols(p, 0);
  for (std::uint32_t i = 0; i < p; ++i)
    for (std::uint32_t j = 0; j < p; ++j) {
      rows[i] += g.count(i, j);
      cols[j] += g.count(i, j);
    }
  const double total = static_cast<double>(g.total);
  std::vector<double> terms;
  for (std::uint32_t i = 0; i < p; ++i)
    for (std::uint32_t j = 0; j < p; ++j) {
      const std::uint64_t c = g.count(i, j);
      if (c == 0) continue;
      const double pij = static_cast<double>(c) / total;
      const double pi = static_cast<double>(rows[i]) / total;
      const double pj = static_cast<double>(cols[j]) / total;
      terms.push_back(pij * std::log2(pij / (pi * pj)));
    }
  std::sort(terms.begin(), terms.end());
  double mi = 0.0;
  for (double t : terms) mi += t;
  return std::max(0.0, mi);
}

enum class Sweep { Horizontal, Diagonal };

inline const char* to_string(Sweep s) { return s == Sweep::Horizontal ? "horizontal" : "diagonal"; }

/// Offsets (d, 0) or (d, d) for d = 1..d_max.
inline std::vector<GlcmOffset> sweep_offsets(Sweep sweep, int d_max) {
  if (d_max < 1) throw UsageError("sweep needs d_max >= 1");
  std::vector<GlcmOffset> out;
  for (int d = 1; d <= d_max; ++d) out.push_back(sweep == Sweep::Horizontal ? GlcmOffset{d, 0} : GlcmOffset{d, d});
  return out;
}

struct GlcmMiPoint {
  GlcmOffset offset;
  double mi = 0.0;
  std::uint64_t pairs = 0;
};

struct GlcmMiProfile {
  std::uint32_t levels = 32;
  std::vector<GlcmMiPoint> points;
};

/// Quantizes once over the image's own min/max, then GLCM-MI per offset.
inline GlcmMiProfile glcm_mi_profile(const GrayImage& img, std::uint32_t levels,
                                     const std::vector<GlcmOffset>& offsets) {
  const QuantizedImage q = quantize(img, levels);
  GlcmMiProfile profile{levels, {}};
  for (const auto& o : offsets) {
    const Glcm g = glcm(q, o);
    profile.points.push_back({o, glcm_mi(g), g.total});
  }
  return profile;
}

}  // namespace nst
