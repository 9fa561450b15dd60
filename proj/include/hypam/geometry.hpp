#pragma once

// Hyperboloid model of H^d: points z in R^{d+1} with z*z = -1, z_{d+1} > 0,
// where y*z = y_1 z_1 + ... + y_d z_d - y_{d+1} z_{d+1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hypam/errors.hpp"
#include "hypam/rng.hpp"

namespace hypam {

inline constexpr double kConstraintTol = 1e-10;
inline constexpr double kDistanceClampWindow = 1e-9;
inline constexpr double kMaxRadius = 700.0;  // cosh overflows shortly after

inline double minkowski_product(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("minkowski_product: dimension mismatch");
  }
  const std::size_t n = a.size() - 1;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s - a[n] * b[n];
}

/// log cosh(rho), overflow-safe for large rho.
inline double log_cosh(double rho) {
  rho = std::abs(rho);
  if (rho < 1e-4) return rho * rho / 2.0 - rho * rho * rho * rho / 12.0;
  if (rho > 20.0) return rho - std::numbers::ln2 + std::log1p(std::exp(-2.0 * rho));
  return std::log(std::cosh(rho));
}

/// log sinh(rho) for rho > 0.
inline double log_sinh(double rho) {
  if (rho > 20.0) return rho - std::numbers::ln2 + std::log1p(-std::exp(-2.0 * rho));
  return std::log(std::sinh(rho));
}

class HPoint {
 public:
  /// Validates the hyperboloid constraint. The residual is measured relative
  /// to z_{d+1}^2 since absolute roundoff grows like cosh^2 of the radius.
  static HPoint from_coords(std::vector<double> coords) {
    if (coords.size() < 3) throw std::invalid_argument("HPoint: need d >= 2");
    HPoint p(std::move(coords));
    if (!(p.z_.back() > 0.0)) throw std::invalid_argument("HPoint: not on the upper sheet");
    if (p.constraint_residual() > kConstraintTol) {
      throw std::invalid_argument("HPoint: coords*coords != -1");
    }
    return p;
  }

  /// Projects onto the hyperboloid by resetting the time-like component.
  static HPoint renormalized(std::vector<double> coords) {
    if (coords.size() < 3) throw std::invalid_argument("HPoint: need d >= 2");
    HPoint p(std::move(coords));
    p.renormalize();
    return p;
  }

  /// Base point o = (0, ..., 0, 1).
  static HPoint origin(int dim) {
    if (dim < 2) throw std::invalid_argument("HPoint: need d >= 2");
    std::vector<double> z(static_cast<std::size_t>(dim) + 1, 0.0);
    z.back() = 1.0;
    return HPoint(std::move(z));
  }

  int dim() const noexcept { return static_cast<int>(z_.size()) - 1; }
  std::span<const double> coords() const noexcept { return z_; }
  double operator[](std::size_t i) const { return z_[i]; }
  double time_coord() const noexcept { return z_.back(); }

  /// |z*z + 1| / max(1, z_{d+1}^2)
  double constraint_residual() const {
    const double r = std::abs(minkowski_product(z_, z_) + 1.0);
    return r / std::max(1.0, z_.back() * z_.back());
  }

  /// Distance to the base point, arccosh z_{d+1}.
  double radius() const { return std::acosh(std::max(1.0, z_.back())); }

  void renormalize() {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < z_.size(); ++i) s += z_[i] * z_[i];
    z_.back() = std::sqrt(1.0 + s);
  }

  friend bool operator==(const HPoint&, const HPoint&) = default;

 private:
  explicit HPoint(std::vector<double> z) : z_(std::move(z)) {}
  std::vector<double> z_;
};

/// Tangent vector at a point; Minkowski-orthogonal to its base.
struct TangentVec {
  HPoint base;
  std::vector<double> vec;

  static TangentVec make(HPoint base, std::vector<double> vec) {
    if (vec.size() != base.coords().size()) {
      throw std::invalid_argument("TangentVec: dimension mismatch");
    }
    const double scale = std::max(1.0, base.time_coord());
    double vnorm = 0.0;
    for (double v : vec) vnorm = std::max(vnorm, std::abs(v));
    if (std::abs(minkowski_product(base.coords(), vec)) > kConstraintTol * scale * std::max(1.0, vnorm)) {
      throw std::invalid_argument("TangentVec: not orthogonal to base");
    }
    return TangentVec{std::move(base), std::move(vec)};
  }

  /// Riemannian norm (the Minkowski form is positive definite on tangent spaces).
  double norm() const { return std::sqrt(std::max(0.0, minkowski_product(vec, vec))); }
};

/// Lifts v in T_oM (given by its d spatial components) to T_xM via the Lorentz
/// boost taking o to x. Isometric, so it preserves norms and angles.
inline void lift_from_origin(std::span<const double> x, std::span<const double> v, std::span<double> out) {
  const std::size_t d = x.size() - 1;
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += x[i] * v[i];
  const double k = s / (1.0 + x[d]);
  for (std::size_t i = 0; i < d; ++i) out[i] = v[i] + x[i] * k;
  out[d] = s;
}

inline TangentVec lift_from_origin(const HPoint& base, std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(base.dim())) {
    throw std::invalid_argument("lift_from_origin: expected d components");
  }
  std::vector<double> out(base.coords().size());
  lift_from_origin(base.coords(), v, out);
  return TangentVec{base, std::move(out)};
}

/// Hyperbolic distance arccosh(-a*b). Nearby points use the chord form
/// 2 asinh(|a-b|/2), which is the same quantity without the cancellation.
inline double distance(std::span<const double> za, std::span<const double> zb) {
  const double p = -minkowski_product(za, zb);
  if (!std::isfinite(p)) throw numeric_domain_error("distance: Minkowski product overflow");
  // Roundoff in -a*b scales with |a_{d+1} b_{d+1}|, so the window does too.
  if (p < 1.0 - kDistanceClampWindow * std::max(1.0, za.back() * zb.back())) {
    throw numeric_domain_error("distance: -a*b < 1, point off the hyperboloid");
  }
  if (p < 2.0) {
    double q = 0.0;
    for (std::size_t i = 0; i < za.size(); ++i) {
      const double diff = za[i] - zb[i];
      q += (i + 1 == za.size()) ? -diff * diff : diff * diff;
    }
    return 2.0 * std::asinh(std::sqrt(std::max(0.0, q)) / 2.0);
  }
  return std::acosh(p);
}

inline double distance(const HPoint& a, const HPoint& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("distance: dimension mismatch");
  return distance(a.coords(), b.coords());
}

/// Point at distance rho from sigma.base along the unit direction sigma.
inline HPoint exp_map(const TangentVec& sigma, double rho) {
  double e2 = 0.0;
  for (double v : sigma.vec) e2 += v * v;
  if (std::abs(minkowski_product(sigma.vec, sigma.vec) - 1.0) > 1e-9 * std::max(1.0, e2)) {
    throw std::invalid_argument("exp_map: direction is not unit length");
  }
  if (!(rho >= 0.0) || rho > kMaxRadius) throw std::invalid_argument("exp_map: rho outside [0, 700]");
  if (rho == 0.0) return sigma.base;
  const double c = std::cosh(rho);
  const double s = std::sinh(rho);
  const auto x = sigma.base.coords();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = c * x[i] + s * sigma.vec[i];
  return HPoint::renormalized(std::move(z));
}

/// exp of an arbitrary (not necessarily unit) tangent vector.
inline HPoint exp_tangent(const TangentVec& v) {
  const double n = v.norm();
  if (n == 0.0) return v.base;
  std::vector<double> unit(v.vec);
  for (double& u : unit) u /= n;
  return exp_map(TangentVec{v.base, std::move(unit)}, n);
}

/// Inverse of exp_map: tangent vector at base of length distance(base, p).
inline TangentVec log_map(const HPoint& base, const HPoint& p) {
  const double rho = distance(base, p);
  const auto x = base.coords();
  const auto z = p.coords();
  std::vector<double> u(x.size(), 0.0);
  if (rho == 0.0) return TangentVec{base, std::move(u)};
  const double c = minkowski_product(x, z);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = z[i] + c * x[i];
  const double n = std::sqrt(std::max(0.0, minkowski_product(u, u)));
  if (n == 0.0) throw numeric_domain_error("log_map: tangent component vanished");
  for (double& v : u) v *= rho / n;
  return TangentVec{base, std::move(u)};
}

namespace detail {

inline std::vector<double> unit_direction(const HPoint& vertex, const HPoint& p) {
  const auto x = vertex.coords();
  const auto z = p.coords();
  const double c = minkowski_product(x, z);
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = z[i] + c * x[i];
  const double n = std::sqrt(std::max(0.0, minkowski_product(u, u)));
  if (!(n > 0.0)) throw numeric_domain_error("angle_at: degenerate direction");
  for (double& v : u) v /= n;
  return u;
}

/// Angle between unit vectors via 2 atan2(|a-b|, |a+b|); accurate near 0 and pi.
inline double angle_between(std::span<const double> a, std::span<const double> b,
                            double (*inner)(std::span<const double>, std::span<const double>)) {
  std::vector<double> dif(a.size()), sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    dif[i] = a[i] - b[i];
    sum[i] = a[i] + b[i];
  }
  const double nd = std::sqrt(std::max(0.0, inner(dif, dif)));
  const double ns = std::sqrt(std::max(0.0, inner(sum, sum)));
  return 2.0 * std::atan2(nd, ns);
}

inline double euclidean_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Angle at `vertex` between the geodesics towards p and q, in [0, pi].
inline double angle_at(const HPoint& vertex, const HPoint& p, const HPoint& q) {
  if (distance(vertex, p) <= 1e-8 || distance(vertex, q) <= 1e-8) {
    throw std::invalid_argument("angle_at: point coincides with vertex");
  }
  const auto up = detail::unit_direction(vertex, p);
  const auto uq = detail::unit_direction(vertex, q);
  auto mink = [](std::span<const double> a, std::span<const double> b) { return minkowski_product(a, b); };
  return detail::angle_between(up, uq, +mink);
}

struct TriangleDeficit {
  double deficit;  // b + c - a, a opposite the first vertex
  double bound;    // log(2 / (1 - cos A)); +inf when A < 1e-6
  double angle;    // A
};

/// Reverse triangle inequality data: 0 <= b + c - a <= log(2/(1 - cos A)).
inline TriangleDeficit triangle_deficit(const HPoint& a_vertex, const HPoint& b_vertex, const HPoint& c_vertex) {
  const double a = distance(b_vertex, c_vertex);
  const double b = distance(a_vertex, c_vertex);
  const double c = distance(a_vertex, b_vertex);
  const double angle = angle_at(a_vertex, b_vertex, c_vertex);
  // 2/(1 - cos A) = 1 / sin^2(A/2)
  const double bound = angle < 1e-6 ? std::numeric_limits<double>::infinity()
                                    : -2.0 * std::log(std::sin(angle / 2.0));
  return {b + c - a, bound, angle};
}

/// Cap {sigma : angle(sigma, axis) <= half_angle} on the unit sphere of T_oM.
struct SphericalCap {
  std::vector<double> axis;  // unit, d spatial components
  double half_angle;

  bool contains(std::span<const double> dir) const {
    if (dir.size() != axis.size()) throw std::invalid_argument("SphericalCap: dimension mismatch");
    const double n = std::sqrt(detail::euclidean_dot(dir, dir));
    if (n == 0.0) return false;
    std::vector<double> unit(dir.begin(), dir.end());
    for (double& v : unit) v /= n;
    return detail::angle_between(unit, axis, &detail::euclidean_dot) <= half_angle;
  }
};

struct ConeSets {
  SphericalCap A;
  SphericalCap B;

  /// Smallest angle between a direction in A and one in B.
  double min_separation() const { return std::numbers::pi - A.half_angle - B.half_angle; }
};

inline constexpr double kConeHalfAngle = std::numbers::pi / 8.0;

/// Two antipodal caps about +-e_1 with pairwise angle >= 3pi/4.
inline ConeSets cone_sets(int d) {
  if (d < 2) throw std::invalid_argument("cone_sets: need d >= 2");
  std::vector<double> e1(static_cast<std::size_t>(d), 0.0);
  e1[0] = 1.0;
  std::vector<double> minus_e1(e1);
  minus_e1[0] = -1.0;
  return {SphericalCap{std::move(e1), kConeHalfAngle}, SphericalCap{std::move(minus_e1), kConeHalfAngle}};
}

/// Uniform direction on S^{d-1} (spatial components only).
inline std::vector<double> uniform_unit_vector(int d, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> g(static_cast<std::size_t>(d));
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : g) {
      v = normal(rng);
      n2 += v * v;
    }
  } while (n2 == 0.0);
  const double n = std::sqrt(n2);
  for (double& v : g) v /= n;
  return g;
}

/// Uniform direction restricted to a cap: the polar angle has density
/// proportional to sin^{d-2}(theta) on [0, half_angle].
inline std::vector<double> sample_in_cap(const SphericalCap& cap, Rng& rng) {
  const int d = static_cast<int>(cap.axis.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double h = std::min(cap.half_angle, std::numbers::pi);
  const double top = h >= std::numbers::pi / 2 ? 1.0 : std::pow(std::sin(h), d - 2);
  double theta = 0.0;
  for (;;) {
    theta = h * unif(rng);
    if (top * unif(rng) <= std::pow(std::sin(theta), d - 2)) break;
  }
  // Uniform unit vector orthogonal to the axis.
  std::vector<double> w;
  double wn = 0.0;
  do {
    w = uniform_unit_vector(d, rng);
    const double along = detail::euclidean_dot(w, cap.axis);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= along * cap.axis[i];
    wn = std::sqrt(detail::euclidean_dot(w, w));
  } while (wn < 1e-8);
  std::vector<double> out(cap.axis.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::cos(theta) * cap.axis[i] + std::sin(theta) * w[i] / wn;
  }
  return out;
}

/// Rotation-invariant unit tangent vector at base.
inline TangentVec uniform_sphere_direction(const HPoint& base, Rng& rng) {
  const auto v = uniform_unit_vector(base.dim(), rng);
  return lift_from_origin(base, v);
}

/// exp_o(rho * sigma) for sigma given by its d spatial components (unit).
inline HPoint from_polar(int d, double rho, std::span<const double> direction) {
  if (direction.size() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("from_polar: direction must have d components");
  }
  std::vector<double> v(direction.begin(), direction.end());
  v.push_back(0.0);
  return exp_map(TangentVec{HPoint::origin(d), std::move(v)}, rho);
}

/// Angular component of y in geodesic polar coordinates about o.
inline std::vector<double> polar_direction(const HPoint& y) {
  const auto z = y.coords();
  std::vector<double> dir(z.begin(), z.end() - 1);
  const double n = std::sqrt(detail::euclidean_dot(dir, dir));
  if (n == 0.0) throw std::invalid_argument("polar_direction: point is the origin");
  for (double& v : dir) v /= n;
  return dir;
}

}  // namespace hypam
