#pragma once

// Synthetic fixtures: fBm texture plus a known structural overlay, and a
// piecewise-smooth "structured" scene without stochastic texture.

#include <cmath>
#include <cstdint>
#include <string>

#include "nst/core.hpp"
#include "nst/fbm.hpp"

namespace nst {

enum class StructureKind { Step, Disk, Checker };

inline const char* to_string(StructureKind k) {
  switch (k) {
    case StructureKind::Step: return "step";
    case StructureKind::Disk: return "disk";
    case StructureKind::Checker: return "checker";
  }
  return "unknown";
}

inline StructureKind parse_structure_kind(const std::string& s) {
  if (s == "step") return StructureKind::Step;
  if (s == "disk") return StructureKind::Disk;
  if (s == "checker") return StructureKind::Checker;
  throw UsageError("unknown structure kind '" + s + "' (expected step, disk or checker)");
}

/// Overlay with values in {0, amplitude}.
inline GrayImage structure_overlay(StructureKind kind, std::size_t side, double amplitude) {
  GrayImage out(side, side);
  const double c = (static_cast<double>(side) - 1.0) / 2.0;
  const double radius = static_cast<double>(side) / 4.0;
  const std::size_t cell = std::max<std::size_t>(1, side / 4);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      bool on = false;
      switch (kind) {
        case StructureKind::Step: on = 4.0 * (x - c) > (y - c); break;
        case StructureKind::Disk: on = std::hypot(x - c, y - c) <= radius; break;
        case StructureKind::Checker: on = ((x / cell) + (y / cell)) % 2 == 1; break;
      }
      out(x, y) = on ? amplitude : 0.0;
    }
  return out;
}

struct Composite {
  GrayImage image;      // texture + structure
  GrayImage texture;    // fBm field mapped to [0, 1]
  GrayImage structure;  // overlay
};

inline Composite make_composite(const FbmFieldSynthesizer& synth, StructureKind kind, double amplitude,
                                std::uint64_t seed) {
  GrayImage texture = normalize_unit(synth.sample(seed).grid);
  GrayImage structure = structure_overlay(kind, synth.side(), amplitude);
  GrayImage image = texture;
  for (std::size_t i = 0; i < image.size(); ++i) image.pixels()[i] += structure.pixels()[i];
  return {std::move(image), std::move(texture), std::move(structure)};
}

inline Composite make_composite(double hurst, std::size_t side, StructureKind kind, double amplitude,
                                std::uint64_t seed) {
  return make_composite(FbmFieldSynthesizer(FbmParams{hurst, 1.0}, side), kind, amplitude, seed);
}

/// Piecewise-smooth scene (shaded background, disk, rectangle, bar) plus
/// faint i.i.d. Gaussian sensor noise: edges and smooth regions, no
/// stochastic texture. Values stay inside [0, 1].
inline GrayImage make_structured_scene(std::size_t side, std::uint64_t seed, double noise_sigma = 0.01) {
  if (side < 8) throw UsageError("structured scene needs side >= 8");
  Rng rng(seed);
  GrayImage out(side, side);
  const double s = static_cast<double>(side);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const double u = x / s, v = y / s;
      double value = 0.55 + 0.25 * v;  // sky-to-ground shading
      if (std::hypot(u - 0.35, v - 0.4) < 0.2) value = 0.15 + 0.1 * u;
      if (u > 0.6 && u < 0.9 && v > 0.15 && v < 0.55) value = 0.9;
      if (std::abs((u - 0.1) - 0.8 * (v - 0.6)) < 0.03 && v > 0.6) value = 0.05;
      out(x, y) = std::clamp(value + noise_sigma * rng.normal(), 0.0, 1.0);
    }
  return out;
}

}  // namespace nst
