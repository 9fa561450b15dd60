#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "hypam/brownian.hpp"
#include "hypam/errors.hpp"
#include "hypam/geometry.hpp"
#include "hypam/parallel.hpp"
#include "hypam/rng.hpp"
#include "hypam/stats.hpp"

namespace hypam {

// ---------------------------------------------------------------------------
// Heat kernels (generator Delta, curvature -1)

/// log of the d = 3 heat kernel (4 pi t)^{-3/2} (rho / sinh rho) e^{-t - rho^2/4t}.
inline double log_hk_exact_d3(double t, double rho) {
  if (!(t > 0.0)) throw std::invalid_argument("hk_exact_d3: t must be > 0");
  if (!(rho >= 0.0)) throw std::invalid_argument("hk_exact_d3: rho must be >= 0");
  const double ratio = rho < 1e-4 ? -rho * rho / 6.0 : std::log(rho) - log_sinh(rho);
  return -1.5 * std::log(4.0 * std::numbers::pi * t) + ratio - t - rho * rho / (4.0 * t);
}

inline double hk_exact_d3(double t, double rho) { return std::exp(log_hk_exact_d3(t, rho)); }

/// log of t^{-d/2} exp(-(d-1)^2 t/4 - rho^2/4t - (d-1) rho/2) (1+rho+t)^{(d-3)/2} (1+rho),
/// the two-sided heat kernel envelope (unspecified universal constants omitted).
inline double log_hk_envelope(double t, double rho, int d) {
  if (!(t > 0.0)) throw std::invalid_argument("hk_envelope: t must be > 0");
  if (d < 2) throw std::invalid_argument("hk_envelope: d must be >= 2");
  if (!(rho >= 0.0)) throw std::invalid_argument("hk_envelope: rho must be >= 0");
  const double dm1 = d - 1.0;
  return -0.5 * d * std::log(t) - dm1 * dm1 * t / 4.0 - rho * rho / (4.0 * t) - dm1 * rho / 2.0 +
         0.5 * (d - 3.0) * std::log1p(rho + t) + std::log1p(rho);
}

inline double hk_envelope(double t, double rho, int d) { return std::exp(log_hk_envelope(t, rho, d)); }

/// Radial density of rho(o, B_t) for d = 3: 4 pi sinh^2(rho) hk_exact_d3(t, rho).
inline double radial_density_d3(double t, double rho) {
  if (rho <= 0.0) return 0.0;
  return std::exp(std::log(4.0 * std::numbers::pi) + 2.0 * log_sinh(rho) + log_hk_exact_d3(t, rho));
}

/// CDF of rho(o, B_t) for d = 3 in closed form: the density is
/// rho/(4 sqrt(pi) t^{3/2}) (g(rho - 2t) - g(rho + 2t)) with g(u) = exp(-u^2/4t).
inline double radial_cdf_d3(double t, double rho) {
  if (!(t > 0.0)) throw std::invalid_argument("radial_cdf_d3: t must be > 0");
  if (rho <= 0.0) return 0.0;
  if (std::isinf(rho)) return 1.0;
  const double s = std::sqrt(2.0 * t);
  auto ncdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  // int_0^R u exp(-(u - m)^2 / 2 s^2) du
  auto part = [&](double m) {
    return s * s * (std::exp(-m * m / (2.0 * s * s)) - std::exp(-(rho - m) * (rho - m) / (2.0 * s * s))) +
           m * s * std::sqrt(2.0 * std::numbers::pi) * (ncdf((rho - m) / s) - ncdf(-m / s));
  };
  const double v = (part(2.0 * t) - part(-2.0 * t)) / (4.0 * std::sqrt(std::numbers::pi) * std::pow(t, 1.5));
  return std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Exact radial sampler, d = 3

/// Draws rho(o, B_t) in d = 3 from the density proportional to
/// rho sinh(rho) e^{-rho^2/4t} by rejection from a truncated Gaussian.
/// The proposal sits at the target mean with width 1.25 sqrt(2t), wide
/// enough that the density ratio stays bounded; its envelope constant is
/// found numerically at construction.
class ExactRadialSamplerD3 {
 public:
  static constexpr int kMaxTries = 10000;

  explicit ExactRadialSamplerD3(double t) : t_(t) {
    if (!(t > 0.0)) throw std::invalid_argument("sample_radial_exact_d3: t must be > 0");
    compute_moments();
    proposal_sd_ = 1.25 * std::max(std::sqrt(2.0 * t_), target_sd_);
    proposal_mean_ = target_mean_;
    find_envelope();
  }

  double operator()(Rng& rng) {
    std::normal_distribution<double> normal(proposal_mean_, proposal_sd_);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < kMaxTries; ++k) {
      ++tries_;
      const double rho = normal(rng);
      if (rho <= 0.0) continue;
      if (std::log(unif(rng)) <= log_ratio(rho) - log_envelope_) {
        ++accepted_;
        return rho;
      }
    }
    throw sampler_failure("sample_radial_exact_d3: rejection budget of 10^4 tries exhausted");
  }

  double t() const noexcept { return t_; }
  double target_mean() const noexcept { return target_mean_; }
  double target_sd() const noexcept { return target_sd_; }
  double acceptance_rate() const noexcept {
    return tries_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(tries_);
  }

 private:
  double log_target(double rho) const { return std::log(rho) + log_sinh(rho) - rho * rho / (4.0 * t_); }

  double log_ratio(double rho) const {
    const double z = (rho - proposal_mean_) / proposal_sd_;
    return log_target(rho) + 0.5 * z * z;
  }

  void compute_moments() {
    // Mode of rho sinh(rho) e^{-rho^2/4t} is close to max(2t, sqrt(4t)); shift by it.
    const double center = 2.0 * t_ + std::sqrt(4.0 * t_);
    const double width = std::sqrt(2.0 * t_);
    const double lo = 0.0;
    const double hi = center + 40.0 * width + 1.0;
    const double shift = log_target(center);
    auto dens = [&](double r) { return r <= 0.0 ? 0.0 : std::exp(log_target(r) - shift); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double peak_lo = std::max(lo, center - 12.0 * width);
    const double peak_hi = center + 12.0 * width;
    auto integrate = [&](auto f) {
      double s = GK::integrate(f, lo, peak_lo, 15, 1e-12) + GK::integrate(f, peak_lo, peak_hi, 15, 1e-12) +
                 GK::integrate(f, peak_hi, hi, 15, 1e-12);
      return s;
    };
    const double z = integrate(dens);
    const double m1 = integrate([&](double r) { return r * dens(r); }) / z;
    const double m2 = integrate([&](double r) { return (r - m1) * (r - m1) * dens(r); }) / z;
    target_mean_ = m1;
    target_sd_ = std::sqrt(m2);
  }

  void find_envelope() {
    const double hi = proposal_mean_ + 12.0 * proposal_sd_;
    constexpr int kGrid = 4000;
    double best_x = hi / kGrid;
    double best = log_ratio(best_x);
    for (int i = 1; i <= kGrid; ++i) {
      const double x = hi * i / kGrid;
      const double v = log_ratio(x);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    // Golden-section refinement around the best grid point.
    double a = std::max(1e-300, best_x - hi / kGrid);
    double b = best_x + hi / kGrid;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double c = b - g * (b - a);
      const double d = a + g * (b - a);
      if (log_ratio(c) > log_ratio(d)) b = d; else a = c;
    }
    best = std::max(best, log_ratio(0.5 * (a + b)));
    log_envelope_ = best + 1e-9;
  }

  double t_;
  double target_mean_ = 0.0;
  double target_sd_ = 0.0;
  double proposal_mean_ = 0.0;
  double proposal_sd_ = 0.0;
  double log_envelope_ = 0.0;
  std::uint64_t tries_ = 0;
  std::uint64_t accepted_ = 0;
};

/// One-off draw; builds the sampler (envelope search included) each call.
inline double sample_radial_exact_d3(double t, Rng& rng) {
  ExactRadialSamplerD3 sampler(t);
  return sampler(rng);
}

// ---------------------------------------------------------------------------
// Principal Dirichlet eigenvalue of -Delta on a geodesic ball

enum class BallGeometry { hyperbolic, euclidean };

inline constexpr double kShootingStart = 1e-6;

struct DirichletEigenpair {
  double lambda = 0.0;
  std::vector<double> rho;   // grid on [eps, r]
  std::vector<double> phi;   // radial eigenfunction (arbitrary scale)
  std::vector<double> dphi;  // its derivative
};

namespace detail {

using OdeState = std::array<double, 2>;

struct RadialOde {
  double lambda;
  double dm1;
  BallGeometry geometry;

  void operator()(const OdeState& s, OdeState& ds, double rho) const {
    const double drift = geometry == BallGeometry::hyperbolic ? dm1 / std::tanh(rho) : dm1 / rho;
    ds[0] = s[1];
    ds[1] = -drift * s[1] - lambda * s[0];
  }
};

/// Keeps the linear ODE state O(1); sign information is unaffected.
inline void rescale(OdeState& s) {
  const double m = std::max(std::abs(s[0]), std::abs(s[1]));
  if (m > 0.0 && (m < 1e-3 || m > 1e3)) {
    s[0] /= m;
    s[1] /= m;
  }
}

/// True if the regular solution changes sign on (0, r].
inline bool has_node(double lambda, double r, int d, BallGeometry geometry) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(1e-13, 1e-12, ode::runge_kutta_cash_karp54<OdeState>());
  RadialOde sys{lambda, d - 1.0, geometry};
  OdeState s{1.0, 0.0};
  double x = kShootingStart;
  double dt = kShootingStart;
  std::size_t iterations = 0;
  while (x < r) {
    if (++iterations > 50'000'000) throw solver_error("dirichlet_eigenvalue: ODE integration did not finish");
    if (x + dt > r) dt = r - x;
    if (stepper.try_step(sys, s, x, dt) == ode::success) {
      if (s[0] <= 0.0) return true;
      rescale(s);
    }
  }
  return false;
}

}  // namespace detail

/// Smallest lambda with a radial eigenfunction regular at 0 and vanishing at r,
/// by shooting from (phi, phi') = (1, 0) at rho = 1e-6 and bisecting on lambda.
inline double dirichlet_eigenvalue(double r, int d, BallGeometry geometry) {
  if (!(r > 0.0) || r > 100.0) throw std::invalid_argument("dirichlet_eigenvalue: r must be in (0, 100]");
  if (d < 2) throw std::invalid_argument("dirichlet_eigenvalue: d must be >= 2");
  double lo = 0.0;
  double hi = (geometry == BallGeometry::hyperbolic ? (d - 1.0) * (d - 1.0) / 4.0 : 0.0) + 4.0 / (r * r) + 1.0;
  int doublings = 0;
  while (!detail::has_node(hi, r, d, geometry)) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) {
      std::ostringstream msg;
      msg << "dirichlet_eigenvalue: no bracket found (r=" << r << ", d=" << d << ", last lambda=" << hi << ")";
      throw solver_error(msg.str());
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::has_node(mid, r, d, geometry)) hi = mid; else lo = mid;
  }
  if (hi - lo > 1e-8 * hi) {
    std::ostringstream msg;
    msg << "dirichlet_eigenvalue: bisection stalled at [" << lo << ", " << hi << "]";
    throw solver_error(msg.str());
  }
  return 0.5 * (lo + hi);
}

/// Eigenvalue plus the eigenfunction sampled on n_grid points of [1e-6, r].
/// Intended for moderate r (the eigenfunction decays like e^{-(d-1)rho/2}).
inline DirichletEigenpair dirichlet_eigenpair(double r, int d, BallGeometry geometry, std::size_t n_grid = 4001) {
  namespace ode = boost::numeric::odeint;
  DirichletEigenpair out;
  out.lambda = dirichlet_eigenvalue(r, d, geometry);
  detail::RadialOde sys{out.lambda, d - 1.0, geometry};
  detail::OdeState s{1.0, 0.0};
  auto stepper = ode::make_controlled(1e-14, 1e-13, ode::runge_kutta_cash_karp54<detail::OdeState>());
  out.rho.resize(n_grid);
  out.phi.resize(n_grid);
  out.dphi.resize(n_grid);
  for (std::size_t k = 0; k < n_grid; ++k) {
    out.rho[k] = kShootingStart + (r - kShootingStart) * static_cast<double>(k) / static_cast<double>(n_grid - 1);
  }
  out.phi[0] = s[0];
  out.dphi[0] = s[1];
  for (std::size_t k = 1; k < n_grid; ++k) {
    ode::integrate_adaptive(stepper, sys, s, out.rho[k - 1], out.rho[k], kShootingStart);
    out.phi[k] = s[0];
    out.dphi[k] = s[1];
  }
  return out;
}

inline double dirichlet_eigenvalue(double r, int d, const std::string& mode) {
  if (mode == "hyperbolic") return dirichlet_eigenvalue(r, d, BallGeometry::hyperbolic);
  if (mode == "euclidean") return dirichlet_eigenvalue(r, d, BallGeometry::euclidean);
  throw std::invalid_argument("dirichlet_eigenvalue: mode must be hyperbolic or euclidean");
}

// ---------------------------------------------------------------------------
// Exit-time survival

struct ExitTailEntry {
  double t = 0.0;
  double prob = 0.0;
  double stderr_prob = 0.0;
  std::size_t survivors = 0;
  bool flagged = false;  // no survivors: excluded from the fit
};

struct ExitTailEstimate {
  std::vector<ExitTailEntry> entries;
  double slope = 0.0;  // of log P(sigma_r > t) against t
  double intercept = 0.0;
  std::size_t n_paths = 0;
};

/// Monte Carlo survival function of sigma_r = inf{t : rho(o, B_t) > r},
/// monitored on the sampler grid, plus a log-linear fit over entries with t > 0.
inline ExitTailEstimate exit_tail_estimate(double r, std::span<const double> t_grid, std::size_t n_paths,
                                           const SamplerConfig& cfg, unsigned workers = 0) {
  if (!(r > 0.0)) throw std::invalid_argument("exit_tail_estimate: r must be > 0");
  if (t_grid.empty() || n_paths == 0) throw std::invalid_argument("exit_tail_estimate: empty grid or ensemble");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < 0.0 || (i > 0 && !(t_grid[i] > t_grid[i - 1]))) {
      throw std::invalid_argument("exit_tail_estimate: t_grid must be increasing and >= 0");
    }
  }
  cfg.validate();
  const double t_end = t_grid.back();
  const TimeGrid grid = t_end > 0.0 ? TimeGrid::make(t_end, cfg) : TimeGrid{0, cfg.step};
  const HPoint o = HPoint::origin(cfg.dim);
  const double cosh_r = std::cosh(r);

  auto blocks = run_blocks<std::vector<double>>(n_paths, 256, workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> exits;
    exits.reserve(e - b);
    for (std::size_t i = b; i < e; ++i) {
      Walker w(o, cfg, make_stream(cfg.seed, i));
      double exit_time = std::numeric_limits<double>::infinity();
      for (std::size_t k = 1; k <= grid.n_steps; ++k) {
        w.step(grid.h);
        if (w.coords().back() > cosh_r) {
          exit_time = static_cast<double>(k) * grid.h;
          break;
        }
      }
      exits.push_back(exit_time);
    }
    return exits;
  });

  ExitTailEstimate out;
  out.n_paths = n_paths;
  const double n = static_cast<double>(n_paths);
  std::vector<double> fit_t, fit_log;
  for (double t : t_grid) {
    std::size_t alive = 0;
    for (const auto& blk : blocks) {
      for (double ex : blk) alive += ex > t + 1e-12 ? 1 : 0;
    }
    ExitTailEntry entry;
    entry.t = t;
    entry.survivors = alive;
    entry.prob = static_cast<double>(alive) / n;
    entry.stderr_prob = std::sqrt(entry.prob * (1.0 - entry.prob) / n);
    entry.flagged = alive == 0;
    if (!entry.flagged && t > 0.0) {
      fit_t.push_back(t);
      fit_log.push_back(std::log(entry.prob));
    }
    out.entries.push_back(entry);
  }
  if (fit_t.size() >= 2) {
    const auto fit = stats::linear_fit(fit_t, fit_log);
    out.slope = fit.slope;
    out.intercept = fit.intercept;
  }
  return out;
}

}  // namespace hypam
