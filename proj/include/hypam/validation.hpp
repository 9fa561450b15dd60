#pragma once

// Property suites behind `hypam validate`. Each check reports a measured
// value and the tolerance it is held to; a check passes when
// value <= tolerance * tolerance_scale.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <nlohmann/json.hpp>

#include "hypam/brownian.hpp"
#include "hypam/covariance.hpp"
#include "hypam/geometry.hpp"
#include "hypam/heatkernel.hpp"
#include "hypam/io.hpp"
#include "hypam/stats.hpp"

namespace hypam {

struct ValidationOptions {
  double tolerance_scale = 1.0;  // < 1 tightens every check (fault injection)
  std::uint64_t seed = 20240611;
  unsigned workers = 1;
};

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

class CheckRecorder {
 public:
  CheckRecorder(std::string suite, const ValidationOptions& opt, std::vector<CheckResult>& out)
      : suite_(std::move(suite)), opt_(opt), out_(out) {}

  /// fn returns {value, detail}; exceptions count as failures.
  void run(const std::string& name, double tolerance, const std::function<std::pair<double, std::string>()>& fn) {
    CheckResult r;
    r.suite = suite_;
    r.name = name;
    r.tolerance = tolerance;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto [value, detail] = fn();
      r.value = value;
      r.detail = std::move(detail);
      r.passed = std::isfinite(value) && value <= tolerance * opt_.tolerance_scale;
    } catch (const std::exception& ex) {
      r.value = std::numeric_limits<double>::quiet_NaN();
      r.detail = std::string("exception: ") + ex.what();
      r.passed = false;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out_.push_back(std::move(r));
  }

  Rng rng(std::uint64_t salt) const { return make_stream(opt_.seed, salt); }
  std::uint64_t seed(std::uint64_t salt) const { return stream_seed(opt_.seed, salt); }
  unsigned workers() const { return opt_.workers; }

 private:
  std::string suite_;
  const ValidationOptions& opt_;
  std::vector<CheckResult>& out_;
};

inline HPoint random_point(int d, double max_radius, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, max_radius);
  return from_polar(d, u(rng), uniform_unit_vector(d, rng));
}

inline double simpson(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("simpson: need an odd number >= 3 of samples");
  double s = y.front() + y.back();
  for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
  return s * h / 3.0;
}

inline std::string num(double v) { return fmt_double(v); }

inline void geometry_suite(CheckRecorder& c) {
  c.run("hyperboloid-constraint", kConstraintTol, [&] {
    auto rng = c.rng(1);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const int d = 2 + i % 4;
      const auto p = random_point(d, 40.0, rng);
      worst = std::max(worst, p.constraint_residual());
      const auto q = exp_map(uniform_sphere_direction(p, rng), 3.0);
      worst = std::max(worst, q.constraint_residual());
    }
    return std::pair{worst, "max relative residual |z*z+1|/z_{d+1}^2"};
  });
  c.run("distance-metric-axioms", 1e-9, [&] {
    auto rng = c.rng(2);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const auto a = random_point(3, 10.0, rng), b = random_point(3, 10.0, rng), e = random_point(3, 10.0, rng);
      const double ab = distance(a, b), ba = distance(b, a), ae = distance(a, e), be = distance(b, e);
      worst = std::max({worst, std::abs(ab - ba), ae - (ab + be), distance(a, a)});
    }
    return std::pair{worst, "max of asymmetry, triangle excess, d(a,a)"};
  });
  c.run("exp-log-roundtrip", 1e-8, [&] {
    auto rng = c.rng(3);
    std::uniform_real_distribution<double> len(0.0, 30.0);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const auto x = random_point(3, 3.0, rng);
      const auto sigma = uniform_sphere_direction(x, rng);
      const double r = len(rng);
      const auto back = log_map(x, exp_map(sigma, r));
      double err = 0.0, scale = 0.0;
      for (std::size_t k = 0; k < back.vec.size(); ++k) {
        err = std::max(err, std::abs(back.vec[k] - r * sigma.vec[k]));
        scale = std::max(scale, std::abs(r * sigma.vec[k]));
      }
      worst = std::max(worst, err / std::max(1.0, scale));
    }
    return std::pair{worst, "max relative |log_x(exp_x(v)) - v|, |v| <= 30"};
  });
  c.run("reverse-triangle-inequality", 0.0, [&] {
    auto rng = c.rng(4);
    std::size_t bad = 0, used = 0;
    for (int i = 0; i < 20000; ++i) {
      const auto a = random_point(3, 10.0, rng), b = random_point(3, 10.0, rng), e = random_point(3, 10.0, rng);
      if (distance(a, b) < 1e-6 || distance(a, e) < 1e-6) continue;
      const auto td = triangle_deficit(a, b, e);
      if (td.angle < 1e-3) continue;
      ++used;
      if (td.deficit < -1e-9 || td.deficit > td.bound + 1e-6) ++bad;
    }
    return std::pair{static_cast<double>(bad), "violations among " + std::to_string(used) + " triangles"};
  });
  c.run("cone-localization", 0.0, [&] {
    auto rng = c.rng(5);
    const auto cones = cone_sets(3);
    const auto o = HPoint::origin(3);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    std::size_t bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto y = from_polar(3, u(rng), sample_in_cap(cones.A, rng));
      const auto z = from_polar(3, u(rng), sample_in_cap(cones.B, rng));
      if (distance(y, z) < std::max(distance(y, o), distance(z, o)) - 1e-9) ++bad;
    }
    return std::pair{static_cast<double>(bad), "violations among 10000 cap pairs"};
  });
}

inline void heatkernel_suite(CheckRecorder& c) {
  c.run("heat-kernel-normalization", 1e-6, [&] {
    double worst = 0.0;
    for (double t : {0.1, 1.0, 10.0}) {
      const double hi = 2.0 * t + 12.0 * std::sqrt(2.0 * t) + 10.0;
      const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [t](double r) { return radial_density_d3(t, r); }, 0.0, hi, 15, 1e-12);
      worst = std::max(worst, std::abs(mass - 1.0));
    }
    return std::pair{worst, "max |mass - 1| over t in {0.1, 1, 10}"};
  });
  c.run("heat-kernel-small-time", 0.01, [&] {
    const double t = 1e-4, r = 0.01;
    const double flat = std::pow(4.0 * std::numbers::pi * t, -1.5) * std::exp(-r * r / (4.0 * t));
    const double v = std::abs(hk_exact_d3(t, r) / flat - 1.0);
    return std::pair{v, "|p_t / flat Gaussian - 1| at rho=0.01, t=1e-4"};
  });
  c.run("heat-kernel-envelope-sandwich", 0.0, [&] {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double t = 0.5; t <= 20.0; t += 0.5) {
      for (double r = 0.0; r <= 60.0; r += 0.5) {
        const double q = std::exp(log_hk_exact_d3(t, r) - log_hk_envelope(t, r, 3));
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
    }
    const bool ok = lo > 0.0 && std::isfinite(hi);
    return std::pair{ok ? 0.0 : 1.0, "exact/envelope ratio in [" + num(lo) + ", " + num(hi) + "]"};
  });
  c.run("dirichlet-eigenvalue-euclidean", 1e-6, [&] {
    double worst = 0.0;
    for (double r : {0.5, 1.0, 2.0}) {
      const double l = dirichlet_eigenvalue(r, 3, BallGeometry::euclidean);
      worst = std::max(worst, std::abs(l * r * r / (std::numbers::pi * std::numbers::pi) - 1.0));
    }
    return std::pair{worst, "max |lambda r^2 / pi^2 - 1|"};
  });
  c.run("dirichlet-eigenvalue-hyperbolic", 1e-6, [&] {
    double worst = 0.0;
    for (double r : {0.5, 1.0, 2.0, 8.0}) {
      const double exact = 1.0 + std::numbers::pi * std::numbers::pi / (r * r);
      worst = std::max(worst, std::abs(dirichlet_eigenvalue(r, 3, BallGeometry::hyperbolic) / exact - 1.0));
    }
    return std::pair{worst, "max relative error vs 1 + pi^2/r^2 (d=3)"};
  });
  c.run("dirichlet-rayleigh-quotient", 1e-6, [&] {
    double worst = 0.0;
    for (double r : {1.0, 4.0}) {
      for (int d : {2, 3, 5}) {
        const auto ep = dirichlet_eigenpair(r, d, BallGeometry::hyperbolic, 8001);
        std::vector<double> num_v(ep.rho.size()), den_v(ep.rho.size());
        for (std::size_t k = 0; k < ep.rho.size(); ++k) {
          const double w = std::pow(std::sinh(ep.rho[k]), d - 1);
          num_v[k] = ep.dphi[k] * ep.dphi[k] * w;
          den_v[k] = ep.phi[k] * ep.phi[k] * w;
        }
        const double h = ep.rho[1] - ep.rho[0];
        worst = std::max(worst, std::abs(simpson(num_v, h) / simpson(den_v, h) / ep.lambda - 1.0));
      }
    }
    return std::pair{worst, "max relative |Rayleigh quotient / lambda - 1|"};
  });
  c.run("exact-radial-sampler-ks", 0.02, [&] {
    auto rng = c.rng(6);
    double worst = 0.0;
    for (double t : {0.5, 5.0}) {
      ExactRadialSamplerD3 s(t);
      std::vector<double> x(20000);
      for (double& v : x) v = s(rng);
      worst = std::max(worst, stats::ks_one_sample(x, [t](double r) { return radial_cdf_d3(t, r); }));
    }
    return std::pair{worst, "KS vs closed-form CDF, 20000 draws, t in {0.5, 5}"};
  });
  c.run("exit-time-tail-rate", 0.15, [&] {
    SamplerConfig cfg;
    cfg.seed = c.seed(7);
    const std::vector<double> grid{0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    const auto est = exit_tail_estimate(2.0, grid, 10000, cfg, c.workers());
    const double lambda = dirichlet_eigenvalue(2.0, 3, BallGeometry::hyperbolic);
    return std::pair{std::abs(-est.slope / lambda - 1.0),
                     "fitted decay " + num(-est.slope) + " vs lambda_2 " + num(lambda)};
  });
}

inline void brownian_suite(CheckRecorder& c) {
  auto endpoint_radii = [&](Scheme scheme, double t, std::size_t n, std::uint64_t salt) {
    SamplerConfig cfg;
    cfg.scheme = scheme;
    const TimeGrid g = TimeGrid::make(t, cfg);
    const auto o = HPoint::origin(3);
    auto blocks = run_blocks<std::vector<double>>(n, 256, c.workers(), [&](std::size_t b, std::size_t e) {
      std::vector<double> out;
      for (std::size_t i = b; i < e; ++i) {
        Walker w(o, cfg, make_stream(c.seed(salt), i));
        for (std::size_t k = 0; k < g.n_steps; ++k) w.step(g.h);
        out.push_back(w.radius());
      }
      return out;
    });
    std::vector<double> all;
    for (auto& b : blocks) all.insert(all.end(), b.begin(), b.end());
    return all;
  };
  c.run("radial-speed", 4.0, [&] {
    const double t = 5.0;
    const auto r = endpoint_radii(Scheme::embedded_sde, t, 4000, 8);
    const auto s = stats::summarize(r);
    const double exact = 2.0 * t + 1.0;
    return std::pair{std::abs(s.mean - exact) / s.stderr_of_mean(),
                     "mean rho " + num(s.mean) + " vs exact " + num(exact) + " (in standard errors)"};
  });
  for (Scheme scheme : {Scheme::embedded_sde, Scheme::geodesic_walk}) {
    c.run("sde-vs-exact-radial-ks-" + to_string(scheme), 0.03, [&, scheme] {
      const double t = 2.0;
      const auto r = endpoint_radii(scheme, t, 4000, scheme == Scheme::embedded_sde ? 9 : 10);
      const double ks = stats::ks_one_sample(r, [t](double x) { return radial_cdf_d3(t, x); });
      return std::pair{ks, "KS of 4000 endpoint radii at t=2 vs closed-form CDF"};
    });
  }
  c.run("path-stays-on-hyperboloid", kConstraintTol, [&] {
    auto rng = c.rng(11);
    SamplerConfig cfg;
    cfg.step = 1e-2;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const auto p = sample_path(HPoint::origin(3), 20.0, cfg, rng);
      for (const auto& z : p.points) worst = std::max(worst, z.constraint_residual());
    }
    return std::pair{worst, "max relative residual along 20 paths to t=20"};
  });
  c.run("seeded-streams-reproducible", 0.0, [&] {
    SamplerConfig cfg;
    Rng a = c.rng(12), b = c.rng(12);
    const auto pa = sample_path(HPoint::origin(3), 1.0, cfg, a);
    const auto pb = sample_path(HPoint::origin(3), 1.0, cfg, b);
    double diff = 0.0;
    for (std::size_t k = 0; k < pa.points.size(); ++k) {
      for (std::size_t i = 0; i < 4; ++i) diff = std::max(diff, std::abs(pa.points[k][i] - pb.points[k][i]));
    }
    return std::pair{diff, "max coordinate difference for equal seeds"};
  });
}

inline void covariance_suite(CheckRecorder& c) {
  c.run("incomplete-gamma-identities", 1e-10, [&] {
    double worst = 0.0;
    for (double x : {0.01, 0.5, 1.0, 3.0, 10.0, 40.0}) {
      worst = std::max(worst, std::abs(lower_incomplete_gamma(1.0, x) / -std::expm1(-x) - 1.0));
    }
    worst = std::max(worst, std::abs(lower_incomplete_gamma(2.0, 1.0) / (1.0 - 2.0 / std::numbers::e) - 1.0));
    worst = std::max(worst, std::abs(lower_incomplete_gamma(0.5, 50.0) / std::sqrt(std::numbers::pi) - 1.0));
    return std::pair{worst, "max relative error on closed-form cases"};
  });
  c.run("phi-alpha-quadrature", 1e-8, [&] {
    boost::math::quadrature::tanh_sinh<double> ts;
    double worst = 0.0;
    for (double a = 0.25; a <= 3.0 + 1e-12; a += 0.25) {
      for (double r = 0.0; r <= 60.0; r += 5.0) {
        const double p = psi(r);
        const double q = ts.integrate([&](double u) { return std::exp(-std::pow(u, 1.0 / a) * p); }, 0.0, 1.0);
        worst = std::max(worst, std::abs(q - phi_alpha(r, a)));
      }
    }
    return std::pair{worst, "max |u-integral - closed form| on alpha x rho grid"};
  });
  c.run("phi-alpha-nonincreasing", 0.0, [&] {
    double worst = 0.0;
    for (double a : {0.25, 0.5, 1.0, 2.0, 3.0}) {
      double prev = phi_alpha(0.0, a);
      for (double r = 0.01; r <= 100.0; r += 0.01) {
        const double v = phi_alpha(r, a);
        worst = std::max(worst, v - prev);
        prev = v;
      }
    }
    return std::pair{worst, "largest increase between consecutive grid points"};
  });
  c.run("phi-alpha-decay-limit-monotone", 0.0, [&] {
    double worst = 0.0;
    for (double a : {0.5, 1.0, 1.5}) {
      const double limit = a * std::tgamma(a);
      double prev_gap = std::numeric_limits<double>::infinity();
      for (double r = 5.0; r <= 200.0; r += 0.5) {
        const double gap = std::abs(std::pow(r, a) * phi_alpha(r, a) - limit);
        worst = std::max(worst, gap - prev_gap);
        prev_gap = gap;
      }
    }
    return std::pair{worst, "largest growth of |rho^a Phi_a - a Gamma(a)| for rho >= 5"};
  });
  c.run("positive-type-gram", 1e-8, [&] {
    auto rng = c.rng(13);
    std::uniform_int_distribution<int> n_dist(2, 100);
    const double alphas[] = {0.5, 1.0, 2.0};
    double worst = 0.0;
    for (int k = 0; k < 30; ++k) {
      std::vector<HPoint> pts;
      const int n = n_dist(rng);
      for (int i = 0; i < n; ++i) pts.push_back(random_point(3, 30.0, rng));
      const auto rep = psd_check(CovarianceModel::phi(alphas[k % 3]), pts);
      worst = std::max(worst, -rep.min_eigenvalue / rep.gram_trace);
    }
    return std::pair{worst, "max of -min_eig/trace over 30 random Gram matrices"};
  });
}

}  // namespace detail

inline const std::vector<std::string>& validation_suites() {
  static const std::vector<std::string> s{"geometry", "heatkernel", "brownian", "covariance"};
  return s;
}

inline std::vector<CheckResult> run_validate(const std::string& suite, const ValidationOptions& opt = {}) {
  const bool all = suite == "all";
  bool known = all;
  for (const auto& s : validation_suites()) known = known || s == suite;
  if (!known) throw std::invalid_argument("unknown validation suite '" + suite + "'");
  std::vector<CheckResult> out;
  for (const auto& s : validation_suites()) {
    if (!all && s != suite) continue;
    detail::CheckRecorder rec(s, opt, out);
    if (s == "geometry") detail::geometry_suite(rec);
    if (s == "heatkernel") detail::heatkernel_suite(rec);
    if (s == "brownian") detail::brownian_suite(rec);
    if (s == "covariance") detail::covariance_suite(rec);
  }
  return out;
}

inline nlohmann::json validation_report(const std::vector<CheckResult>& checks, const ValidationOptions& opt) {
  nlohmann::json arr = nlohmann::json::array();
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    arr.push_back({{"suite", c.suite},
                   {"name", c.name},
                   {"passed", c.passed},
                   {"value", json_number(c.value)},
                   {"tolerance", c.tolerance * opt.tolerance_scale},
                   {"detail", c.detail},
                   {"seconds", c.seconds}});
  }
  return {{"passed", ok}, {"tolerance_scale", opt.tolerance_scale}, {"checks", arr}};
}

}  // namespace hypam
