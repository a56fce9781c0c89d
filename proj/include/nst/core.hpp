#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nst {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { Usage = 2, Io = 3, Numeric = 4 };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// Row-major real-valued image. Immutable in spirit: operations return new images.
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height, fill) {
    if (width == 0 || height == 0) throw UsageError("zero image dimension");
  }

  GrayImage(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width == 0 || height == 0) throw UsageError("zero image dimension");
    if (data_.size() != width * height)
      throw UsageError("image data length does not match width*height");
    for (double v : data_)
      if (!std::isfinite(v)) throw NumericError("non-finite pixel value");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  double& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }

  std::span<const double> pixels() const noexcept { return data_; }
  std::span<double> pixels() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::span<const double> row(std::size_t y) const {
    return std::span<const double>(data_).subspan(y * width_, width_);
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Image of integer gray-level codes in [0, levels).
class QuantizedImage {
 public:
  QuantizedImage(std::size_t width, std::size_t height, std::uint32_t levels,
                 std::vector<std::uint32_t> codes)
      : width_(width), height_(height), levels_(levels), codes_(std::move(codes)) {
    if (levels < 2) throw UsageError("quantization needs at least 2 levels");
    if (codes_.size() != width * height)
      throw UsageError("code count does not match width*height");
    for (auto c : codes_)
      if (c >= levels) throw UsageError("code exceeds level count");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::uint32_t levels() const noexcept { return levels_; }
  std::uint32_t operator()(std::size_t x, std::size_t y) const { return codes_[y * width_ + x]; }
  std::span<const std::uint32_t> codes() const noexcept { return codes_; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::uint32_t levels_;
  std::vector<std::uint32_t> codes_;
};

inline std::pair<double, double> min_max(std::span<const double> values) {
  if (values.empty()) throw UsageError("min/max of empty sequence");
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

// Equal-width binning of [lo, hi] into `levels` bins; hi lands in the top bin,
// a degenerate range puts everything in bin 0.
inline std::vector<std::uint32_t> quantize_values(std::span<const double> values,
                                                  std::uint32_t levels, double lo,
                                                  double hi) {
  if (levels < 2) throw UsageError("quantization needs at least 2 levels");
  std::vector<std::uint32_t> codes(values.size(), 0);
  if (!(hi > lo)) return codes;
  const double width = (hi - lo) / levels;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double bin = std::floor((values[i] - lo) / width);
    codes[i] = bin <= 0.0 ? 0u
                          : static_cast<std::uint32_t>(
                                std::min(bin, static_cast<double>(levels - 1)));
  }
  return codes;
}

inline std::vector<std::uint32_t> quantize_values(std::span<const double> values,
                                                  std::uint32_t levels) {
  if (values.empty()) return {};
  auto [lo, hi] = min_max(values);
  return quantize_values(values, levels, lo, hi);
}

inline QuantizedImage quantize(const GrayImage& img, std::uint32_t levels) {
  return QuantizedImage(img.width(), img.height(), levels,
                        quantize_values(img.pixels(), levels));
}

/// Affine map of the image onto [0, 1]; constant images map to all zeros.
inline GrayImage normalize_unit(const GrayImage& img) {
  auto [lo, hi] = min_max(img.pixels());
  std::vector<double> out(img.size(), 0.0);
  if (hi > lo)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (img.pixels()[i] - lo) / (hi - lo);
  return GrayImage(img.width(), img.height(), std::move(out));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

struct RngSeed {
  std::uint64_t value = 0;
};

// Portable random source: the engine is fully specified by the standard, and the
// distributions below are written out so streams are bit-identical across libraries.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives independent-looking child seeds from one master seed (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace nst
