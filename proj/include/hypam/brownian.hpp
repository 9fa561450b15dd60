#pragma once

// Hyperbolic Brownian motion on the hyperboloid. Generator convention: the
// process has generator Delta (not Delta/2), so the radial part drifts at
// speed (d-1) and flat-space increments have variance 2 dt per coordinate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hypam/errors.hpp"
#include "hypam/geometry.hpp"
#include "hypam/rng.hpp"

namespace hypam {

inline constexpr double kGeneratorScale = 2.0;  // generator Delta = 2 x (Delta/2)
inline constexpr double kMaxStep = 0.1;
inline constexpr double kMaxStepsPerPath = 1e8;

enum class Scheme { embedded_sde, geodesic_walk };

inline std::string to_string(Scheme s) {
  return s == Scheme::embedded_sde ? "embedded-sde" : "geodesic-walk";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "embedded-sde") return Scheme::embedded_sde;
  if (s == "geodesic-walk") return Scheme::geodesic_walk;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

struct SamplerConfig {
  int dim = 3;
  double step = 1e-3;
  Scheme scheme = Scheme::embedded_sde;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 2) throw std::invalid_argument("SamplerConfig: dim must be >= 2");
    if (!(step > 0.0) || step > kMaxStep) throw std::invalid_argument("SamplerConfig: step must be in (0, 0.1]");
  }
};

/// Uniform grid with n steps of size t/n <= cfg.step.
struct TimeGrid {
  std::size_t n_steps;
  double h;

  static TimeGrid make(double t, const SamplerConfig& cfg) {
    cfg.validate();
    if (!(t > 0.0)) throw std::invalid_argument("time horizon must be > 0");
    const double raw = t / cfg.step;
    if (raw > kMaxStepsPerPath) throw std::invalid_argument("t / step exceeds 1e8");
    const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return {std::max<std::size_t>(n, 1), t / static_cast<double>(std::max<std::size_t>(n, 1))};
  }
};

/// One hyperbolic Brownian particle advanced in place.
class Walker {
 public:
  Walker(const HPoint& start, const SamplerConfig& cfg, Rng rng)
      : z_(start.coords().begin(), start.coords().end()),
        xi_(static_cast<std::size_t>(start.dim())),
        v_(z_.size()),
        scheme_(cfg.scheme),
        rng_(std::move(rng)) {
    if (start.dim() != cfg.dim) throw std::invalid_argument("Walker: start point dimension != cfg.dim");
  }

  /// Advances by h (h <= 0.1).
  void step(double h) {
    const std::size_t d = xi_.size();
    const double amp = std::sqrt(kGeneratorScale * h);
    double xi2 = 0.0;
    for (double& x : xi_) {
      x = normal_(rng_);
      xi2 += x * x;
    }
    lift_from_origin(z_, xi_, v_);
    if (scheme_ == Scheme::embedded_sde) {
      // Euler step of dX = sqrt(2) L_X dW + d X dt, then back onto the sheet.
      const double drift = static_cast<double>(d) * h;
      for (std::size_t i = 0; i < d; ++i) z_[i] += amp * v_[i] + drift * z_[i];
    } else {
      // Geodesic step along a Gaussian tangent vector of covariance 2h.
      const double len = amp * std::sqrt(xi2);
      if (len > 0.0) {
        const double c = std::cosh(len);
        const double s = std::sinh(len) / std::sqrt(xi2);
        for (std::size_t i = 0; i < d; ++i) z_[i] = c * z_[i] + s * v_[i];
      }
    }
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) r2 += z_[i] * z_[i];
    z_[d] = std::sqrt(1.0 + r2);
  }

  std::span<const double> coords() const noexcept { return z_; }
  HPoint point() const { return HPoint::renormalized(z_); }
  /// Distance to the base point o.
  double radius() const { return std::acosh(std::max(1.0, z_.back())); }

 private:
  std::vector<double> z_;
  std::vector<double> xi_;
  std::vector<double> v_;
  Scheme scheme_;
  Rng rng_;
  std::normal_distribution<double> normal_;
};

struct BrownianPath {
  std::vector<double> times;
  std::vector<HPoint> points;
  std::uint64_t seed = 0;

  double end_time() const { return times.back(); }
  const HPoint& end() const { return points.back(); }

  /// Index of the stored sample at time s (within half a stored spacing).
  std::size_t index_at(double s) const {
    if (times.empty()) throw std::invalid_argument("BrownianPath: empty");
    auto it = std::lower_bound(times.begin(), times.end(), s);
    std::size_t k = static_cast<std::size_t>(it - times.begin());
    if (k == times.size()) k = times.size() - 1;
    if (k > 0 && std::abs(times[k - 1] - s) < std::abs(times[k] - s)) --k;
    const double spacing = times.size() > 1 ? times[1] - times[0] : 0.0;
    if (std::abs(times[k] - s) > 0.5 * spacing + 1e-12) {
      throw std::invalid_argument("BrownianPath: time not on the stored grid");
    }
    return k;
  }
};

/// Stored-grid stride: spacing at most 1% of the horizon.
inline std::size_t storage_stride(const TimeGrid& g, double t) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.01 * t / g.h + 1e-9)));
}

inline BrownianPath sample_path(const HPoint& x0, double t, const SamplerConfig& cfg, Rng& rng) {
  const TimeGrid grid = TimeGrid::make(t, cfg);
  const std::uint64_t seed = rng();
  Walker w(x0, cfg, Rng(seed));
  const std::size_t stride = storage_stride(grid, t);
  BrownianPath path;
  path.seed = seed;
  path.times.reserve(grid.n_steps / stride + 2);
  path.points.reserve(grid.n_steps / stride + 2);
  path.times.push_back(0.0);
  path.points.push_back(x0);
  for (std::size_t k = 1; k <= grid.n_steps; ++k) {
    w.step(grid.h);
    if (k % stride == 0 || k == grid.n_steps) {
      path.times.push_back(k == grid.n_steps ? t : static_cast<double>(k) * grid.h);
      path.points.push_back(w.point());
    }
  }
  return path;
}

/// Two independent paths started at x0 and y0 (substreams of rng).
inline std::pair<BrownianPath, BrownianPath> sample_pair(const HPoint& x0, const HPoint& y0, double t,
                                                         const SamplerConfig& cfg, Rng& rng) {
  Rng first(rng());
  Rng second(rng());
  auto a = sample_path(x0, t, cfg, first);
  auto b = sample_path(y0, t, cfg, second);
  return {std::move(a), std::move(b)};
}

inline std::pair<BrownianPath, BrownianPath> sample_pair(const HPoint& x0, double t, const SamplerConfig& cfg,
                                                         Rng& rng) {
  return sample_pair(x0, x0, t, cfg, rng);
}

/// (rho - (d-1)t) / sqrt(t)
inline double xi_statistic(double rho, double t, int d) {
  return (rho - static_cast<double>(d - 1) * t) / std::sqrt(t);
}

struct RadialStatistics {
  double xi_t;
};

inline RadialStatistics radial_statistics(const BrownianPath& path, const HPoint& x0) {
  const double t = path.end_time();
  if (t < 1.0) throw std::invalid_argument("radial_statistics: endpoint time must be >= 1");
  return {xi_statistic(distance(x0, path.end()), t, x0.dim())};
}

/// log(2 / (1 - cos theta)); +inf at theta = 0.
inline double angle_log_term(double theta) {
  const double s = std::sin(theta / 2.0);
  if (s <= 0.0) return std::numeric_limits<double>::infinity();
  return -2.0 * std::log(s);
}

struct EventIndicators {
  bool M_s;
  bool A_s;
};

/// Localising events at time s for a pair started at (x, y).
/// A_s uses the single angle at x between B_s and B~_s. For distinct starts
/// M_s uses Phi_s = angle(B_s, x, y) and Psi_s = angle(B_s, y, B~_s); when the
/// starts coincide Phi_s is undefined and M_s reduces to A_s.
inline EventIndicators event_indicators(const std::pair<BrownianPath, BrownianPath>& pair, const HPoint& x,
                                        const HPoint& y, double delta, double s) {
  if (!(delta > 0.0)) throw std::invalid_argument("event_indicators: delta must be > 0");
  if (!(s > 0.0) || s > pair.first.end_time() + 1e-12 || s > pair.second.end_time() + 1e-12) {
    throw std::invalid_argument("event_indicators: s outside (0, endpoint]");
  }
  const int d = x.dim();
  const HPoint& b = pair.first.points[pair.first.index_at(s)];
  const HPoint& bt = pair.second.points[pair.second.index_at(s)];
  const double xi = xi_statistic(distance(x, b), s, d);
  const double eta = xi_statistic(distance(y, bt), s, d);
  const double radial_floor = -delta * std::sqrt(s);
  const double angle_cap = delta * s;

  auto safe_angle_term = [](const HPoint& vertex, const HPoint& p, const HPoint& q) {
    try {
      return angle_log_term(angle_at(vertex, p, q));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();  // degenerate counts as failed
    }
  };

  const bool radial_ok = xi > radial_floor && eta > radial_floor;
  const bool a_s = radial_ok && safe_angle_term(x, b, bt) <= angle_cap;
  bool m_s = a_s;
  if (distance(x, y) > 1e-8) {
    const double phi = safe_angle_term(x, b, y);
    const double psi = safe_angle_term(y, b, bt);
    m_s = radial_ok && std::max(phi, psi) <= angle_cap;
  }
  return {m_s, a_s};
}

inline EventIndicators event_indicators(const std::pair<BrownianPath, BrownianPath>& pair, const HPoint& x0,
                                        double delta, double s) {
  return event_indicators(pair, x0, x0, delta, s);
}

/// CSV dump with columns path_id,t,z1..z_{d+1}.
inline void write_paths_csv(std::ostream& os, std::span<const BrownianPath> paths) {
  if (paths.empty()) return;
  const int d = paths.front().points.front().dim();
  os << "path_id,t";
  for (int i = 1; i <= d + 1; ++i) os << ",z" << i;
  os << '\n';
  os << std::setprecision(17);
  for (std::size_t id = 0; id < paths.size(); ++id) {
    const auto& p = paths[id];
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      os << id << ',' << p.times[k];
      for (double z : p.points[k].coords()) os << ',' << z;
      os << '\n';
    }
  }
}

}  // namespace hypam
