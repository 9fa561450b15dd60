#pragma once

// Second moment E[u(t,x)^2] = E exp(beta^2 int_0^t f(B_s, B~_s) ds) over two
// independent Brownian motions, and the estimators built on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hypam/brownian.hpp"
#include "hypam/covariance.hpp"
#include "hypam/errors.hpp"
#include "hypam/geometry.hpp"
#include "hypam/parallel.hpp"
#include "hypam/rng.hpp"
#include "hypam/stats.hpp"

namespace hypam {

inline constexpr double kMaxExclusionRate = 1e-3;
inline constexpr std::size_t kPairBlock = 64;
inline constexpr int kMaxDysonTerms = 8;
inline constexpr std::size_t kDysonTuples = 32;
inline constexpr double kDysonFlagFraction = 0.01;

enum class EstimatorKind { fk, jensen, dyson };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::fk: return "fk";
    case EstimatorKind::jensen: return "jensen";
    case EstimatorKind::dyson: return "dyson";
  }
  return "?";
}

inline EstimatorKind parse_estimator_kind(const std::string& s) {
  if (s == "fk") return EstimatorKind::fk;
  if (s == "jensen") return EstimatorKind::jensen;
  if (s == "dyson") return EstimatorKind::dyson;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

struct MomentEstimate {
  double t = 0.0;
  double log_m2 = 0.0;
  double stderr_log = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_excluded = 0;
  double beta = 0.0;
  CovarianceModel model;
  std::uint64_t seed = 0;
  double max_z = 0.0;  // largest beta^2 int f over the ensemble
  EstimatorKind kind = EstimatorKind::fk;
  // dyson only
  std::vector<double> terms;  // mean of each series term, order 0..n_terms
  bool truncated = false;     // last term above 1% of the partial sum
  double truncation_bound = 0.0;
};

struct PhaseRow {
  double alpha = 0.0;
  double beta = 0.0;
  double t = 0.0;
  double log_m2 = 0.0;
  double stderr_log = 0.0;
  std::size_t n_paths = 0;
  EstimatorKind kind = EstimatorKind::fk;
  std::uint64_t seed = 0;
};

inline PhaseRow to_row(const MomentEstimate& e) {
  return {e.model.alpha, e.beta, e.t, e.log_m2, e.stderr_log, e.n_paths, e.kind, e.seed};
}

enum class Space { hyperbolic, euclidean };

/// Flat Brownian motion in R^d with generator Delta (variance 2t per coordinate).
class FlatWalker {
 public:
  FlatWalker(std::span<const double> start, Rng rng) : x_(start.begin(), start.end()), rng_(std::move(rng)) {}

  void step(double h) {
    const double amp = std::sqrt(kGeneratorScale * h);
    for (double& v : x_) v += amp * normal_(rng_);
  }

  std::span<const double> coords() const noexcept { return x_; }

 private:
  std::vector<double> x_;
  Rng rng_;
  std::normal_distribution<double> normal_;
};

inline double flat_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct EnsembleRequest {
  Space space = Space::hyperbolic;
  std::vector<double> start_x;  // hyperboloid coords (d+1) or flat coords (d)
  std::vector<double> start_y;
  std::vector<double> horizons;  // increasing
  std::size_t n_pairs = 0;
  CovarianceModel model;
  SamplerConfig cfg;  // cfg.seed is the master seed of the ensemble
  unsigned workers = 1;
  double spacing = 0.0;  // stored-grid spacing; 0 means 1% of the first horizon
  int dyson_order = 0;
  std::size_t dyson_tuples = kDysonTuples;
};

/// Per-pair time integrals of f(B_s, B~_s) at each horizon plus the
/// ensemble-mean profile of f on the stored grid.
struct Ensemble {
  std::vector<double> horizons;
  std::vector<double> times;
  std::vector<double> f_mean;     // over included pairs
  std::vector<double> integrals;  // [pair * horizons + h]; NaN when excluded
  std::vector<double> dyson;      // [pair * (order+1) + n]: t^n/n! * mean of prod f over tuples at the last horizon
  std::size_t n_pairs = 0;
  std::size_t n_excluded = 0;
  std::uint64_t seed = 0;
  int dyson_order = 0;
  CovarianceModel model;

  std::size_t horizon_index(double t) const {
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      if (std::abs(horizons[h] - t) <= 1e-9 * std::max(1.0, t)) return h;
    }
    throw std::invalid_argument("Ensemble: t is not one of the horizons");
  }

  double integral(std::size_t pair, std::size_t h) const { return integrals[pair * horizons.size() + h]; }
};

namespace detail {

inline std::vector<double> stored_grid(std::span<const double> horizons, double spacing) {
  const double t_max = horizons.back();
  std::vector<double> times;
  const auto n = static_cast<std::size_t>(std::floor(t_max / spacing + 1e-9));
  times.reserve(n + horizons.size() + 1);
  for (std::size_t k = 0; k <= n; ++k) times.push_back(static_cast<double>(k) * spacing);
  for (double h : horizons) times.push_back(h);
  std::sort(times.begin(), times.end());
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t > t_max) continue;
    if (!out.empty() && t - out.back() <= 1e-9 * std::max(1.0, t)) {
      out.back() = std::max(out.back(), t);  // prefer the exact horizon value
      continue;
    }
    out.push_back(t);
  }
  return out;
}

inline double interpolate(std::span<const double> x, std::span<const double> y, double s) {
  auto it = std::upper_bound(x.begin(), x.end(), s);
  if (it == x.begin()) return y.front();
  if (it == x.end()) return y.back();
  const auto k = static_cast<std::size_t>(it - x.begin());
  const double w = (s - x[k - 1]) / (x[k] - x[k - 1]);
  return (1.0 - w) * y[k - 1] + w * y[k];
}

struct BlockResult {
  std::vector<double> f_sum;
  std::vector<double> integrals;
  std::vector<double> dyson;
  std::size_t excluded = 0;
};

inline void validate_request(const EnsembleRequest& r) {
  r.cfg.validate();
  r.model.validate();
  if (r.n_pairs == 0) throw std::invalid_argument("ensemble: n_paths must be >= 1");
  if (r.horizons.empty()) throw std::invalid_argument("ensemble: no horizons");
  for (std::size_t i = 0; i < r.horizons.size(); ++i) {
    if (!(r.horizons[i] > 0.0) || (i > 0 && !(r.horizons[i] > r.horizons[i - 1]))) {
      throw std::invalid_argument("ensemble: horizons must be positive and increasing");
    }
  }
  if (r.horizons.back() / r.cfg.step > kMaxStepsPerPath) throw std::invalid_argument("ensemble: t / step exceeds 1e8");
  if (r.spacing < 0.0) throw std::invalid_argument("ensemble: spacing must be >= 0");
  if (r.dyson_order < 0 || r.dyson_order > kMaxDysonTerms) {
    throw std::invalid_argument("ensemble: Dyson order must be in [0, 8]");
  }
  const std::size_t want = static_cast<std::size_t>(r.cfg.dim) + (r.space == Space::hyperbolic ? 1 : 0);
  if (r.start_x.size() != want || r.start_y.size() != want) {
    throw std::invalid_argument("ensemble: start points do not match cfg.dim");
  }
  if (r.space == Space::hyperbolic) {
    (void)HPoint::from_coords(r.start_x);
    (void)HPoint::from_coords(r.start_y);
  }
}

}  // namespace detail

inline Ensemble run_ensemble(const EnsembleRequest& req) {
  detail::validate_request(req);
  const double spacing = req.spacing > 0.0 ? req.spacing : 0.01 * req.horizons.front();
  Ensemble ens;
  ens.horizons = req.horizons;
  ens.times = detail::stored_grid(req.horizons, spacing);
  ens.n_pairs = req.n_pairs;
  ens.seed = req.cfg.seed;
  ens.dyson_order = req.dyson_order;
  ens.model = req.model;

  const std::size_t n_times = ens.times.size();
  const std::size_t n_h = req.horizons.size();
  std::vector<std::size_t> h_at(n_h);
  for (std::size_t h = 0; h < n_h; ++h) {
    h_at[h] = static_cast<std::size_t>(std::lower_bound(ens.times.begin(), ens.times.end(),
                                                        req.horizons[h] * (1.0 - 1e-12)) -
                                       ens.times.begin());
  }
  std::vector<std::size_t> substeps(n_times, 0);
  for (std::size_t k = 1; k < n_times; ++k) {
    const double len = ens.times[k] - ens.times[k - 1];
    substeps[k] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / req.cfg.step - 1e-9)));
  }
  const int order = req.dyson_order;
  const double t_last = req.horizons.back();
  const bool is_constant = req.model.kind == CovarianceKind::constant;

  auto simulate = [&](auto& wa, auto& wb, auto dist, std::vector<double>& f) {
    auto eval = [&] { return is_constant ? req.model.c : req.model.profile(dist(wa.coords(), wb.coords())); };
    f[0] = eval();
    for (std::size_t k = 1; k < n_times; ++k) {
      const double h = (ens.times[k] - ens.times[k - 1]) / static_cast<double>(substeps[k]);
      for (std::size_t j = 0; j < substeps[k]; ++j) {
        wa.step(h);
        wb.step(h);
      }
      f[k] = eval();
    }
  };

  auto blocks = run_blocks<detail::BlockResult>(req.n_pairs, kPairBlock, req.workers, [&](std::size_t b,
                                                                                          std::size_t e) {
    detail::BlockResult out;
    out.f_sum.assign(n_times, 0.0);
    out.integrals.reserve((e - b) * n_h);
    if (order > 0) out.dyson.reserve((e - b) * static_cast<std::size_t>(order + 1));
    std::vector<double> f(n_times);
    std::vector<double> prod(static_cast<std::size_t>(order + 1));
    for (std::size_t i = b; i < e; ++i) {
      Rng pair_rng = make_stream(req.cfg.seed, i);
      const std::uint64_t sa = pair_rng();
      const std::uint64_t sb = pair_rng();
      bool ok = true;
      try {
        if (req.space == Space::hyperbolic) {
          Walker wa(HPoint::from_coords(req.start_x), req.cfg, Rng(sa));
          Walker wb(HPoint::from_coords(req.start_y), req.cfg, Rng(sb));
          simulate(wa, wb, [](std::span<const double> p, std::span<const double> q) { return distance(p, q); }, f);
        } else {
          FlatWalker wa(req.start_x, Rng(sa));
          FlatWalker wb(req.start_y, Rng(sb));
          simulate(wa, wb, &flat_distance, f);
        }
      } catch (const numeric_domain_error&) {
        ok = false;
      }
      if (ok) ok = std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });

      if (!ok) {
        ++out.excluded;
        for (std::size_t h = 0; h < n_h; ++h) out.integrals.push_back(std::numeric_limits<double>::quiet_NaN());
        for (int n = 0; n <= order && order > 0; ++n) out.dyson.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      for (std::size_t k = 0; k < n_times; ++k) out.f_sum[k] += f[k];
      double acc = 0.0;
      std::size_t next_h = 0;
      for (std::size_t k = 1; k < n_times && next_h < n_h; ++k) {
        acc += 0.5 * (ens.times[k] - ens.times[k - 1]) * (f[k] + f[k - 1]);
        while (next_h < n_h && h_at[next_h] == k) {
          out.integrals.push_back(acc);
          ++next_h;
        }
      }
      if (order > 0) {
        // Uniform tuples (s_1..s_order) in [0,t]^order; prefix products give every order at once.
        Rng trng = make_stream(req.cfg.seed ^ kTimeSampleSalt, i);
        std::uniform_real_distribution<double> unif(0.0, t_last);
        std::fill(prod.begin(), prod.end(), 0.0);
        for (std::size_t m = 0; m < req.dyson_tuples; ++m) {
          double p = 1.0;
          for (int n = 1; n <= order; ++n) {
            p *= detail::interpolate(ens.times, f, unif(trng));
            prod[static_cast<std::size_t>(n)] += p;
          }
        }
        double scale = 1.0;  // t^n / n!
        out.dyson.push_back(1.0);
        for (int n = 1; n <= order; ++n) {
          scale *= t_last / static_cast<double>(n);
          out.dyson.push_back(scale * prod[static_cast<std::size_t>(n)] / static_cast<double>(req.dyson_tuples));
        }
      }
    }
    return out;
  });

  ens.f_mean.assign(n_times, 0.0);
  ens.integrals.reserve(req.n_pairs * n_h);
  for (const auto& blk : blocks) {
    for (std::size_t k = 0; k < n_times; ++k) ens.f_mean[k] += blk.f_sum[k];
    ens.integrals.insert(ens.integrals.end(), blk.integrals.begin(), blk.integrals.end());
    ens.dyson.insert(ens.dyson.end(), blk.dyson.begin(), blk.dyson.end());
    ens.n_excluded += blk.excluded;
  }
  const std::size_t included = ens.n_pairs - ens.n_excluded;
  for (double& v : ens.f_mean) v = included > 0 ? v / static_cast<double>(included) : 0.0;
  return ens;
}

namespace detail {

inline void check_exclusions(const Ensemble& ens) {
  if (static_cast<double>(ens.n_excluded) > kMaxExclusionRate * static_cast<double>(ens.n_pairs)) {
    throw estimator_error("estimator: " + std::to_string(ens.n_excluded) + " of " + std::to_string(ens.n_pairs) +
                          " paths produced non-finite values (limit 0.1%)");
  }
}

inline std::vector<double> included_integrals(const Ensemble& ens, std::size_t h) {
  std::vector<double> out;
  out.reserve(ens.n_pairs);
  for (std::size_t i = 0; i < ens.n_pairs; ++i) {
    const double v = ens.integral(i, h);
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

inline MomentEstimate base_estimate(const Ensemble& ens, double t, double beta, EstimatorKind kind) {
  if (!(beta >= 0.0)) throw std::invalid_argument("estimator: beta must be >= 0");
  MomentEstimate m;
  m.t = t;
  m.beta = beta;
  m.n_paths = ens.n_pairs;
  m.n_excluded = ens.n_excluded;
  m.model = ens.model;
  m.seed = ens.seed;
  m.kind = kind;
  return m;
}

}  // namespace detail

/// log of mean exp(Z_i), Z_i = beta^2 I_i; stderr by the delta method.
inline MomentEstimate fk_from_ensemble(const Ensemble& ens, double t, double beta) {
  MomentEstimate m = detail::base_estimate(ens, t, beta, EstimatorKind::fk);
  if (beta == 0.0) return m;
  detail::check_exclusions(ens);
  auto z = detail::included_integrals(ens, ens.horizon_index(t));
  for (double& v : z) v *= beta * beta;
  m.max_z = *std::max_element(z.begin(), z.end());
  std::vector<double> w(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) w[i] = std::exp(z[i] - m.max_z);
  const auto s = stats::summarize(w);
  m.log_m2 = m.max_z + std::log(s.mean);
  m.stderr_log = s.stderr_of_mean() / s.mean;
  return m;
}

/// beta^2 int_0^t (ensemble mean of f) ds; the mean is taken before exponentiating.
inline MomentEstimate jensen_from_ensemble(const Ensemble& ens, double t, double beta) {
  MomentEstimate m = detail::base_estimate(ens, t, beta, EstimatorKind::jensen);
  if (beta == 0.0) return m;
  detail::check_exclusions(ens);
  const auto in = detail::included_integrals(ens, ens.horizon_index(t));
  const auto s = stats::summarize(in);
  const double b2 = beta * beta;
  m.log_m2 = b2 * s.mean;
  m.stderr_log = b2 * s.stderr_of_mean();
  m.max_z = b2 * *std::max_element(in.begin(), in.end());
  return m;
}

/// Partial sum of the chaos series up to order ens.dyson_order, at the last horizon.
inline MomentEstimate dyson_from_ensemble(const Ensemble& ens, double beta) {
  const double t = ens.horizons.back();
  MomentEstimate m = detail::base_estimate(ens, t, beta, EstimatorKind::dyson);
  const int order = ens.dyson_order;
  const auto stride = static_cast<std::size_t>(order + 1);
  if (beta == 0.0 || order == 0) {
    m.terms.assign(stride, 0.0);
    m.terms[0] = 1.0;
    return m;
  }
  detail::check_exclusions(ens);
  const double b2 = beta * beta;
  std::vector<double> sums;
  m.terms.assign(stride, 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < ens.n_pairs; ++i) {
    const double* row = &ens.dyson[i * stride];
    if (!std::isfinite(row[0])) continue;
    double s = 0.0;
    double bp = 1.0;
    for (std::size_t k = 0; k < stride; ++k) {
      s += bp * row[k];
      m.terms[k] += bp * row[k];
      bp *= b2;
    }
    sums.push_back(s);
    ++n;
  }
  for (double& v : m.terms) v /= static_cast<double>(n);
  const auto s = stats::summarize(sums);
  m.log_m2 = std::log(s.mean);
  m.stderr_log = s.stderr_of_mean() / s.mean;
  m.truncated = m.terms.back() > kDysonFlagFraction * s.mean;
  // Tail of the exponential series for x = beta^2 sup f t.
  const double x = b2 * ens.model.sup() * t;
  const double next = static_cast<double>(order + 1);
  if (x < next + 1.0) {
    const double first = std::exp(next * std::log(x) - std::lgamma(next + 1.0));
    m.truncation_bound = first / (1.0 - x / (next + 1.0)) / s.mean;
  } else {
    m.truncation_bound = std::numeric_limits<double>::infinity();
  }
  return m;
}

namespace detail {

inline EnsembleRequest hyperbolic_request(const HPoint& x, double t, const CovarianceModel& model,
                                          std::size_t n_paths, const SamplerConfig& cfg, std::uint64_t seed,
                                          unsigned workers) {
  if (!(t > 0.0)) throw std::invalid_argument("estimator: t must be > 0");
  EnsembleRequest r;
  r.space = Space::hyperbolic;
  r.start_x.assign(x.coords().begin(), x.coords().end());
  r.start_y = r.start_x;
  r.horizons = {t};
  r.n_pairs = n_paths;
  r.model = model;
  r.cfg = cfg;
  r.cfg.seed = seed;
  r.workers = workers;
  return r;
}

}  // namespace detail

inline MomentEstimate fk_second_moment(const HPoint& x, double t, double beta, const CovarianceModel& model,
                                       std::size_t n_paths, const SamplerConfig& cfg, Rng& rng,
                                       unsigned workers = 1) {
  if (!(beta >= 0.0)) throw std::invalid_argument("fk_second_moment: beta must be >= 0");
  const std::uint64_t seed = rng();
  auto req = detail::hyperbolic_request(x, t, model, n_paths, cfg, seed, workers);
  if (beta == 0.0) {
    detail::validate_request(req);
    Ensemble empty;
    empty.n_pairs = n_paths;
    empty.seed = seed;
    empty.model = model;
    return detail::base_estimate(empty, t, 0.0, EstimatorKind::fk);
  }
  return fk_from_ensemble(run_ensemble(req), t, beta);
}

inline MomentEstimate jensen_lower(const HPoint& x, double t, double beta, const CovarianceModel& model,
                                   std::size_t n_paths, const SamplerConfig& cfg, Rng& rng, unsigned workers = 1) {
  if (!(beta >= 0.0)) throw std::invalid_argument("jensen_lower: beta must be >= 0");
  const std::uint64_t seed = rng();
  return jensen_from_ensemble(run_ensemble(detail::hyperbolic_request(x, t, model, n_paths, cfg, seed, workers)), t,
                              beta);
}

inline MomentEstimate dyson_partial(const HPoint& x, double t, double beta, const CovarianceModel& model, int n_terms,
                                    std::size_t n_paths, const SamplerConfig& cfg, Rng& rng, unsigned workers = 1) {
  if (n_terms < 0 || n_terms > kMaxDysonTerms) throw std::invalid_argument("dyson_partial: n_terms must be in [0, 8]");
  if (!(beta >= 0.0)) throw std::invalid_argument("dyson_partial: beta must be >= 0");
  const std::uint64_t seed = rng();
  auto req = detail::hyperbolic_request(x, t, model, n_paths, cfg, seed, workers);
  req.dyson_order = n_terms;
  return dyson_from_ensemble(run_ensemble(req), beta);
}

/// FK estimator with flat Brownian motion in R^d (d >= 3).
inline MomentEstimate euclidean_second_moment(std::span<const double> x, double t, double beta,
                                              const CovarianceModel& model, std::size_t n_paths,
                                              const SamplerConfig& cfg, Rng& rng, unsigned workers = 1) {
  if (x.size() < 3) throw std::invalid_argument("euclidean_second_moment: need d >= 3");
  if (model.kind == CovarianceKind::phi_alpha) {
    throw std::invalid_argument("euclidean_second_moment: model must be truncated-power or constant");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("euclidean_second_moment: beta must be >= 0");
  if (!(t > 0.0)) throw std::invalid_argument("euclidean_second_moment: t must be > 0");
  const std::uint64_t seed = rng();
  EnsembleRequest r;
  r.space = Space::euclidean;
  r.start_x.assign(x.begin(), x.end());
  r.start_y = r.start_x;
  r.horizons = {t};
  r.n_pairs = n_paths;
  r.model = model;
  r.cfg = cfg;
  r.cfg.dim = static_cast<int>(x.size());
  r.cfg.seed = seed;
  r.workers = workers;
  if (beta == 0.0) {
    detail::validate_request(r);
    Ensemble empty;
    empty.n_pairs = n_paths;
    empty.seed = seed;
    empty.model = model;
    return detail::base_estimate(empty, t, 0.0, EstimatorKind::fk);
  }
  return fk_from_ensemble(run_ensemble(r), t, beta);
}

// ---------------------------------------------------------------------------
// Lambda = sup over start pairs of int_0^inf E f(B_t, B~_t) dt

inline constexpr double kLambdaMinHorizon = 50.0;
inline constexpr double kLambdaSpacing = 0.05;
inline constexpr double kDecayFitStart = 5.0;

struct LambdaPair {
  double separation = 0.0;
  double integral = 0.0;  // int_0^T E f, trapezoid on the ensemble mean
  double stderr_integral = 0.0;
  double tail = 0.0;         // E f(T) T / (alpha - 1)
  double decay_slope = 0.0;  // log-log slope of E f(t) for t >= 5
  double total() const { return integral + tail; }
};

struct LambdaEstimate {
  double lambda_hat = 0.0;
  double beta0_hat = 0.0;
  double t_max = 0.0;
  std::vector<LambdaPair> pairs;
  std::vector<double> times;      // of the pair attaining the max
  std::vector<double> integrand;  // its ensemble-mean f
};

inline LambdaEstimate lambda_constant(const CovarianceModel& model, std::span<const std::pair<HPoint, HPoint>> starts,
                                      double t_max, std::size_t n_paths, const SamplerConfig& cfg, Rng& rng,
                                      unsigned workers = 1) {
  model.validate();
  if (model.kind == CovarianceKind::constant) {
    throw std::invalid_argument("lambda_constant: constant covariance does not decay, the time integral diverges");
  }
  if (!(model.alpha > 1.0)) {
    throw std::invalid_argument("lambda_constant: requires alpha > 1 (the integrand decays like t^-alpha)");
  }
  if (!(t_max >= kLambdaMinHorizon)) throw std::invalid_argument("lambda_constant: T_max must be >= 50");
  if (starts.empty()) throw std::invalid_argument("lambda_constant: no start pairs");

  LambdaEstimate out;
  out.t_max = t_max;
  std::size_t best = 0;
  std::vector<Ensemble> kept;
  for (std::size_t p = 0; p < starts.size(); ++p) {
    const auto& [x, y] = starts[p];
    EnsembleRequest r;
    r.space = Space::hyperbolic;
    r.start_x.assign(x.coords().begin(), x.coords().end());
    r.start_y.assign(y.coords().begin(), y.coords().end());
    r.horizons = {t_max};
    r.n_pairs = n_paths;
    r.model = model;
    r.cfg = cfg;
    r.cfg.seed = rng();
    r.workers = workers;
    r.spacing = kLambdaSpacing;
    Ensemble ens = run_ensemble(r);
    detail::check_exclusions(ens);

    LambdaPair lp;
    lp.separation = distance(x, y);
    const auto in = detail::included_integrals(ens, 0);
    const auto s = stats::summarize(in);
    lp.integral = s.mean;
    lp.stderr_integral = s.stderr_of_mean();
    lp.tail = ens.f_mean.back() * t_max / (model.alpha - 1.0);
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      if (ens.times[k] >= kDecayFitStart && ens.f_mean[k] > 0.0) {
        lx.push_back(std::log(ens.times[k]));
        ly.push_back(std::log(ens.f_mean[k]));
      }
    }
    if (lx.size() >= 2) lp.decay_slope = stats::linear_fit(lx, ly).slope;
    out.pairs.push_back(lp);
    if (lp.total() > out.pairs[best].total()) best = p;
    kept.push_back(std::move(ens));
  }
  out.lambda_hat = out.pairs[best].total();
  out.beta0_hat = 1.0 / std::sqrt(out.lambda_hat);
  out.times = kept[best].times;
  out.integrand = kept[best].f_mean;
  return out;
}

// ---------------------------------------------------------------------------
// Growth classification

enum class Growth { bounded, linear, power };

inline std::string to_string(Growth g) {
  switch (g) {
    case Growth::bounded: return "bounded";
    case Growth::linear: return "linear";
    case Growth::power: return "power";
  }
  return "?";
}

struct GrowthFit {
  double rate_or_exponent = 0.0;  // linear: slope in t; power: log-log exponent; bounded: slope
  double r_squared = 0.0;
  Growth classification = Growth::bounded;
  stats::LinearFit linear;  // log_m2 ~ a + b t
  stats::LinearFit power;   // log_m2 ~ a + b t^{1-alpha}
  double loglog_exponent = std::numeric_limits<double>::quiet_NaN();
};

/// Weighted least squares of log_m2 against t and t^{1-alpha} (weights 1/stderr^2).
inline GrowthFit growth_fit(std::span<const PhaseRow> rows, double alpha) {
  std::vector<double> ts;
  for (const auto& r : rows) {
    if (!(r.t > 0.0)) throw std::invalid_argument("growth_fit: t must be > 0");
    if (!(r.stderr_log >= 0.0) || !std::isfinite(r.log_m2)) {
      throw std::invalid_argument("growth_fit: rows need finite log_m2 and stderr");
    }
    ts.push_back(r.t);
  }
  std::sort(ts.begin(), ts.end());
  if (std::unique(ts.begin(), ts.end()) - ts.begin() < 4) {
    throw std::invalid_argument("growth_fit: need >= 4 distinct t values");
  }
  double scale = 1.0, max_se = 0.0, t_max = 0.0;
  for (const auto& r : rows) {
    scale = std::max(scale, std::abs(r.log_m2));
    max_se = std::max(max_se, r.stderr_log);
    t_max = std::max(t_max, r.t);
  }
  const double floor = 1e-9 * scale;
  std::vector<double> x_lin, x_pow, y, w, lx, ly;
  bool positive = true;
  for (const auto& r : rows) {
    x_lin.push_back(r.t);
    x_pow.push_back(std::pow(r.t, 1.0 - alpha));
    y.push_back(r.log_m2);
    w.push_back(1.0 / (r.stderr_log * r.stderr_log + floor * floor));
    if (r.log_m2 > 0.0) {
      lx.push_back(std::log(r.t));
      ly.push_back(std::log(r.log_m2));
    } else {
      positive = false;
    }
  }
  GrowthFit g;
  g.linear = stats::linear_fit(x_lin, y, w);
  const bool power_ok = alpha > 0.0 && alpha < 1.0;
  if (power_ok) g.power = stats::linear_fit(x_pow, y, w);
  if (positive) g.loglog_exponent = stats::linear_fit(lx, ly).slope;

  if (g.linear.slope * t_max <= 2.0 * max_se) {
    g.classification = Growth::bounded;
    g.rate_or_exponent = g.linear.slope;
    g.r_squared = g.linear.r_squared;
  } else if (power_ok && g.power.r_squared > g.linear.r_squared) {
    g.classification = Growth::power;
    g.rate_or_exponent = g.loglog_exponent;
    g.r_squared = g.power.r_squared;
  } else {
    g.classification = Growth::linear;
    g.rate_or_exponent = g.linear.slope;
    g.r_squared = g.linear.r_squared;
  }
  return g;
}

}  // namespace hypam
