#pragma once

// Exact synthesis of fractional Brownian motion (1D) and the isotropic Levy
// fractional Brownian field (2D) by Cholesky factorization of the covariance.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nst/core.hpp"

namespace nst {

struct FbmParams {
  double hurst = 0.5;
  double sigma_w2 = 1.0;

  void validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) throw UsageError("Hurst exponent must lie in (0, 1)");
    if (!(sigma_w2 > 0.0)) throw UsageError("sigma_w^2 must be positive");
  }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Variance scale of the process:
///   sigma_H^2 = sigma_w^2/2 * cos(pi H)/(pi H) * Gamma(1 - 2H).
/// With e = 1 - 2H this equals sigma_w^2/2 * [sin(pi e/2)/e] * Gamma(1 + e)/(pi H),
/// which is smooth through H = 1/2 (value sigma_w^2/2) and keeps Gamma's
/// argument in (0, 2).
inline double sigma_h2(const FbmParams& params) {
  params.validate();
  const double e = 1.0 - 2.0 * params.hurst;
  const double pi = std::numbers::pi;
  const double sinc_term = e == 0.0 ? pi / 2.0 : std::sin(pi * e / 2.0) / e;
  return params.sigma_w2 / 2.0 * sinc_term * std::tgamma(1.0 + e) / (pi * params.hurst);
}

inline double fbm_covariance(double t, double s, const FbmParams& params) {
  const double two_h = 2.0 * params.hurst;
  return sigma_h2(params) / 2.0 *
         (std::pow(std::abs(t), two_h) + std::pow(std::abs(s), two_h) - std::pow(std::abs(t - s), two_h));
}

inline double field_covariance(Point2 a, Point2 b, const FbmParams& params) {
  const double h = params.hurst;
  // ||v||^{2H} == (||v||^2)^H
  const double na = std::pow(a.x * a.x + a.y * a.y, h);
  const double nb = std::pow(b.x * b.x + b.y * b.y, h);
  const double dx = a.x - b.x, dy = a.y - b.y;
  return sigma_h2(params) / 2.0 * (na + nb - std::pow(dx * dx + dy * dy, h));
}

class CholeskyError : public NumericError {
 public:
  explicit CholeskyError(std::size_t pivot)
      : NumericError("covariance matrix not numerically positive definite at pivot " +
                     std::to_string(pivot)),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

namespace fbm_detail {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

inline std::optional<std::size_t> cholesky_unblocked(Eigen::Ref<Matrix> a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = a(j, j) - a.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return static_cast<std::size_t>(j);
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    const Eigen::Index rest = n - j - 1;
    if (rest > 0) {
      a.col(j).tail(rest) -= a.bottomLeftCorner(rest, j) * a.row(j).head(j).transpose();
      a.col(j).tail(rest) /= ljj;
    }
  }
  return std::nullopt;
}

}  // namespace fbm_detail

/// Right-looking blocked Cholesky on the lower triangle, in place.
/// Returns the index of the first non-positive pivot on failure.
inline std::optional<std::size_t> cholesky_in_place(Eigen::Ref<fbm_detail::Matrix> a,
                                                    Eigen::Index block = 128) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; k += block) {
    const Eigen::Index b = std::min(block, n - k);
    const Eigen::Index rest = n - k - b;
    if (auto bad = fbm_detail::cholesky_unblocked(a.block(k, k, b, b)))
      return static_cast<std::size_t>(k) + *bad;
    if (rest > 0) {
      auto a11 = a.block(k, k, b, b);
      auto a21 = a.block(k + b, k, rest, b);
      a11.adjoint().template triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(a21);
      a.block(k + b, k + b, rest, rest).template selfadjointView<Eigen::Lower>().rankUpdate(a21, -1.0);
    }
  }
  return std::nullopt;
}

/// Draws zero-mean Gaussian vectors with a fixed covariance; the factorization
/// is paid once at construction.
class GaussianSampler {
 public:
  explicit GaussianSampler(fbm_detail::Matrix covariance) : factor_(std::move(covariance)) {
    if (auto bad = cholesky_in_place(factor_)) throw CholeskyError(*bad);
  }

  Eigen::Index dimension() const noexcept { return factor_.rows(); }

  Eigen::VectorXd sample(Rng& rng) const {
    Eigen::VectorXd z(factor_.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return factor_.triangularView<Eigen::Lower>() * z;
  }

 private:
  fbm_detail::Matrix factor_;
};

struct FbmPath {
  FbmParams params;
  std::vector<double> samples;  // B_H(t) at t = 0..n-1; samples[0] == 0
};

struct FbmField {
  FbmParams params;
  GrayImage grid;  // B_H at lattice point (x, y); grid(0, 0) == 0
};

/// Samples of fBm on t = 0..n-1. B_H(0) is pinned; the remaining (n-1)-point
/// covariance is factorized once.
class FbmPathSynthesizer {
 public:
  FbmPathSynthesizer(FbmParams params, std::size_t n) : params_(params), n_(n), sampler_(build(params, n)) {}

  std::size_t length() const noexcept { return n_; }

  FbmPath sample(std::uint64_t seed) const {
    Rng rng(seed);
    const Eigen::VectorXd v = sampler_.sample(rng);
    FbmPath path{params_, std::vector<double>(n_, 0.0)};
    for (std::size_t i = 1; i < n_; ++i) path.samples[i] = v[static_cast<Eigen::Index>(i - 1)];
    return path;
  }

 private:
  static GaussianSampler build(const FbmParams& params, std::size_t n) {
    params.validate();
    if (n < 2) throw UsageError("fBm path needs at least 2 samples");
    const auto m = static_cast<Eigen::Index>(n - 1);
    fbm_detail::Matrix k(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = j; i < m; ++i)
        k(i, j) = fbm_covariance(static_cast<double>(i + 1), static_cast<double>(j + 1), params);
    return GaussianSampler(std::move(k));
  }

  FbmParams params_;
  std::size_t n_;
  GaussianSampler sampler_;
};

/// Levy fractional Brownian field on a side x side unit lattice with the
/// origin pinned at the (0, 0) corner. Memory is 8 (side^2 - 1)^2 bytes and the
/// factorization costs about side^6 / 3 flops, so side is capped at 128.
class FbmFieldSynthesizer {
 public:
  static constexpr std::size_t kMaxSide = 128;

  FbmFieldSynthesizer(FbmParams params, std::size_t side)
      : params_(params), side_(side), sampler_(build(params, side)) {}

  std::size_t side() const noexcept { return side_; }

  FbmField sample(std::uint64_t seed) const {
    Rng rng(seed);
    const Eigen::VectorXd v = sampler_.sample(rng);
    std::vector<double> grid(side_ * side_, 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) grid[k] = v[static_cast<Eigen::Index>(k - 1)];
    return FbmField{params_, GrayImage(side_, side_, std::move(grid))};
  }

 private:
  static GaussianSampler build(const FbmParams& params, std::size_t side) {
    params.validate();
    if (side < 2) throw UsageError("fBm field side must be at least 2");
    if (side > kMaxSide)
      throw UsageError("fBm field side " + std::to_string(side) + " exceeds exact-synthesis limit " +
                       std::to_string(kMaxSide));
    const double scale = sigma_h2(params) / 2.0;
    const double h = params.hurst;
    // ||v||^{2H} only depends on |dx|, |dy| for lattice vectors.
    std::vector<double> norm_pow(side * side);
    for (std::size_t dy = 0; dy < side; ++dy)
      for (std::size_t dx = 0; dx < side; ++dx)
        norm_pow[dy * side + dx] = std::pow(static_cast<double>(dx * dx + dy * dy), h);
    const auto m = static_cast<Eigen::Index>(side * side - 1);
    fbm_detail::Matrix k(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::size_t xj = static_cast<std::size_t>(j + 1) % side, yj = static_cast<std::size_t>(j + 1) / side;
      const double nj = norm_pow[yj * side + xj];
      for (Eigen::Index i = j; i < m; ++i) {
        const std::size_t xi = static_cast<std::size_t>(i + 1) % side, yi = static_cast<std::size_t>(i + 1) / side;
        const std::size_t dx = xi > xj ? xi - xj : xj - xi;
        const std::size_t dy = yi - yj;
        k(i, j) = scale * (norm_pow[yi * side + xi] + nj - norm_pow[dy * side + dx]);
      }
    }
    return GaussianSampler(std::move(k));
  }

  FbmParams params_;
  std::size_t side_;
  GaussianSampler sampler_;
};

inline FbmPath synth_path(const FbmParams& params, std::size_t n, std::uint64_t seed) {
  return FbmPathSynthesizer(params, n).sample(seed);
}

inline FbmField synth_field(const FbmParams& params, std::size_t side, std::uint64_t seed) {
  return FbmFieldSynthesizer(params, side).sample(seed);
}

/// Second-moment form of B(alpha t) =d |alpha|^H B(t) over an ensemble of paths:
/// returns (mean over t of Var[B(alpha t)], alpha^{2H} * mean over t of Var[B(t)]),
/// using every t >= 1 whose image alpha t is a grid point.
inline std::pair<double, double> rescale_check(std::span<const FbmPath> ensemble, double alpha) {
  if (!(alpha > 0.0)) throw UsageError("rescale factor must be positive");
  if (ensemble.size() < 2) throw UsageError("rescale check needs an ensemble of at least 2 paths");
  const std::size_t n = ensemble.front().samples.size();
  const double hurst = ensemble.front().params.hurst;
  auto variance_at = [&](std::size_t t) {
    std::vector<double> column;
    column.reserve(ensemble.size());
    for (const auto& p : ensemble) column.push_back(p.samples.at(t));
    return variance(column);
  };
  double scaled = 0.0, base = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 1; t < n; ++t) {
    const double s = alpha * static_cast<double>(t);
    const double rounded = std::round(s);
    if (std::abs(s - rounded) > 1e-9 || rounded > static_cast<double>(n - 1) || rounded < 1.0) continue;
    scaled += variance_at(static_cast<std::size_t>(rounded));
    base += variance_at(t);
    ++used;
  }
  if (used == 0) throw UsageError("no grid point t with alpha*t on the grid");
  return {scaled / used, std::pow(alpha, 2.0 * hurst) * base / used};
}

}  // namespace nst
