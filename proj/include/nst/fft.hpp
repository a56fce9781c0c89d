#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <mutex>
#include <vector>

#include "nst/core.hpp"

namespace nst {

/// Row-major complex spectrum; bin (kx, ky) at index ky * width + kx.
struct Spectrum {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::complex<double>> bins;

  std::complex<double>& at(std::size_t kx, std::size_t ky) { return bins[ky * width + kx]; }
  const std::complex<double>& at(std::size_t kx, std::size_t ky) const { return bins[ky * width + kx]; }

  /// Linear index of the bin holding the complex conjugate for a real signal.
  std::size_t conjugate_index(std::size_t index) const {
    const std::size_t kx = index % width, ky = index / width;
    return ((height - ky) % height) * width + (width - kx) % width;
  }
};

namespace fft_detail {

// FFTW's planner is not thread-safe; execution on distinct plans is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline void transform(std::vector<std::complex<double>>& data, std::size_t width, std::size_t height,
                      int sign) {
  static_assert(sizeof(std::complex<double>) == sizeof(fftw_complex));
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buf, buf, sign, FFTW_ESTIMATE);
  }
  if (!plan) throw NumericError("FFT planning failed");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace fft_detail

inline Spectrum fft2(const GrayImage& img) {
  Spectrum s{img.width(), img.height(), {}};
  s.bins.assign(img.pixels().begin(), img.pixels().end());
  fft_detail::transform(s.bins, s.width, s.height, FFTW_FORWARD);
  return s;
}

/// Inverse transform with 1/N normalization; returns the full complex field.
inline std::vector<std::complex<double>> ifft2(Spectrum spectrum) {
  fft_detail::transform(spectrum.bins, spectrum.width, spectrum.height, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(spectrum.bins.size());
  for (auto& v : spectrum.bins) v *= scale;
  return std::move(spectrum.bins);
}

}  // namespace nst
