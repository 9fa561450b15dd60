#pragma once

// Batch drivers behind the CLI: phase sweeps and Lambda runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypam/config.hpp"
#include "hypam/covariance.hpp"
#include "hypam/geometry.hpp"
#include "hypam/io.hpp"
#include "hypam/moments.hpp"

namespace hypam {

inline constexpr double kUnclassifiedR2 = 0.9;

struct CellError {
  double beta;
  double t;
  EstimatorKind kind;
  std::string message;
};

struct GrowthSummary {
  double beta;
  EstimatorKind kind;
  std::string classification;  // bounded | linear | power | unclassified | insufficient
  GrowthFit fit;
};

struct SweepResult {
  std::vector<PhaseRow> rows;
  std::vector<GrowthSummary> summaries;
  std::vector<CellError> errors;
};

/// Runs every (beta, t, estimator) cell of one config section. The fk and
/// jensen rows share one ensemble over all horizons (and all betas); dyson
/// rows get one ensemble per horizon. Cell failures become NaN rows.
inline SweepResult phase_sweep(const ExperimentConfig& cfg) {
  if (cfg.betas.empty() || cfg.ts.empty()) throw config_error(0, "[" + cfg.name + "] phase-sweep needs beta and t");
  std::vector<double> ts = cfg.ts;
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  const std::uint64_t seed = cfg.seed.value_or(0);
  const HPoint x = HPoint::origin(cfg.dim);

  auto request = [&](std::vector<double> horizons, std::uint64_t s) {
    EnsembleRequest r;
    r.space = Space::hyperbolic;
    r.start_x.assign(x.coords().begin(), x.coords().end());
    r.start_y = r.start_x;
    r.horizons = std::move(horizons);
    r.n_pairs = cfg.n_paths;
    r.model = cfg.model;
    r.cfg = cfg.sampler();
    r.cfg.seed = s;
    r.workers = cfg.workers;
    return r;
  };

  const bool any_beta = std::any_of(cfg.betas.begin(), cfg.betas.end(), [](double b) { return b > 0.0; });
  const bool wants_shared = std::any_of(cfg.estimators.begin(), cfg.estimators.end(),
                                        [](EstimatorKind k) { return k != EstimatorKind::dyson; });
  const std::uint64_t shared_seed = stream_seed(seed, 0);
  std::optional<Ensemble> shared;
  std::string shared_error;
  if (any_beta && wants_shared) {
    try {
      shared = run_ensemble(request(ts, shared_seed));
    } catch (const std::exception& ex) {
      shared_error = ex.what();
    }
  }
  std::map<std::size_t, Ensemble> dyson_ens;
  std::map<std::size_t, std::string> dyson_err;

  SweepResult out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double beta : cfg.betas) {
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      const double t = ts[ti];
      for (EstimatorKind kind : cfg.estimators) {
        const std::uint64_t cell_seed = kind == EstimatorKind::dyson ? stream_seed(seed, 1 + ti) : shared_seed;
        PhaseRow row{cfg.model.alpha, beta, t, nan, nan, cfg.n_paths, kind, cell_seed};
        try {
          MomentEstimate m;
          if (beta == 0.0) {
            m.log_m2 = 0.0;
            m.stderr_log = 0.0;
          } else if (kind == EstimatorKind::dyson) {
            if (!dyson_ens.count(ti) && !dyson_err.count(ti)) {
              try {
                auto r = request({t}, cell_seed);
                r.dyson_order = cfg.dyson_terms;
                dyson_ens.emplace(ti, run_ensemble(r));
              } catch (const std::exception& ex) {
                dyson_err[ti] = ex.what();
              }
            }
            if (dyson_err.count(ti)) throw estimator_error(dyson_err[ti]);
            m = dyson_from_ensemble(dyson_ens.at(ti), beta);
          } else {
            if (!shared) throw estimator_error(shared_error);
            m = kind == EstimatorKind::fk ? fk_from_ensemble(*shared, t, beta) : jensen_from_ensemble(*shared, t, beta);
          }
          row.log_m2 = m.log_m2;
          row.stderr_log = m.stderr_log;
        } catch (const std::exception& ex) {
          out.errors.push_back({beta, t, kind, ex.what()});
        }
        out.rows.push_back(row);
      }
    }
  }

  for (double beta : cfg.betas) {
    for (EstimatorKind kind : cfg.estimators) {
      std::vector<PhaseRow> sel;
      for (const auto& r : out.rows) {
        if (r.beta == beta && r.kind == kind && std::isfinite(r.log_m2)) sel.push_back(r);
      }
      GrowthSummary s{beta, kind, "insufficient", {}};
      if (sel.size() >= 4) {
        s.fit = growth_fit(sel, cfg.model.kind == CovarianceKind::constant ? 0.0 : cfg.model.alpha);
        s.classification = to_string(s.fit.classification);
        if (s.fit.classification != Growth::bounded && s.fit.r_squared < kUnclassifiedR2) {
          s.classification = "unclassified";
        }
      }
      out.summaries.push_back(s);
    }
  }
  return out;
}

inline void write_sweep(const SweepResult& res, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                        std::uint64_t config_hash) {
  const std::uint64_t seed = cfg.seed.value_or(0);
  {
    auto f = open_output(dir / (cfg.name + "_rows.csv"));
    write_rows_csv(f, res.rows, config_hash, seed);
  }
  {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : res.rows) rows.push_back(to_json(r));
    auto f = open_output(dir / (cfg.name + "_rows.json"));
    write_json(f, {{"name", cfg.name}, {"model", cfg.model.describe()}, {"rows", rows}}, config_hash, seed);
  }
  {
    auto f = open_output(dir / (cfg.name + "_summary.csv"));
    write_header_comment(f, config_hash, seed);
    f << "beta,estimator_kind,classification,rate_or_exponent,r_squared,linear_slope,linear_r_squared,"
         "power_slope,power_r_squared,loglog_exponent\n";
    for (const auto& s : res.summaries) {
      f << fmt_double(s.beta) << ',' << to_string(s.kind) << ',' << s.classification << ','
        << fmt_double(s.fit.rate_or_exponent) << ',' << fmt_double(s.fit.r_squared) << ','
        << fmt_double(s.fit.linear.slope) << ',' << fmt_double(s.fit.linear.r_squared) << ','
        << fmt_double(s.fit.power.slope) << ',' << fmt_double(s.fit.power.r_squared) << ','
        << fmt_double(s.fit.loglog_exponent) << '\n';
    }
  }
  if (!res.errors.empty()) {
    auto f = open_output(dir / (cfg.name + "_errors.csv"));
    write_header_comment(f, config_hash, seed);
    f << "beta,t,estimator_kind,error\n";
    for (const auto& e : res.errors) {
      std::string msg = e.message;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      f << fmt_double(e.beta) << ',' << fmt_double(e.t) << ',' << to_string(e.kind) << ",\"" << msg << "\"\n";
    }
  }
}

/// Start pairs (o, exp_o(s e_1)) for each separation s.
inline std::vector<std::pair<HPoint, HPoint>> separated_starts(int dim, std::span<const double> separations) {
  std::vector<double> e1(static_cast<std::size_t>(dim), 0.0);
  e1[0] = 1.0;
  std::vector<std::pair<HPoint, HPoint>> out;
  for (double s : separations) out.emplace_back(HPoint::origin(dim), from_polar(dim, s, e1));
  return out;
}

inline LambdaEstimate run_lambda(const ExperimentConfig& cfg) {
  const auto starts = separated_starts(cfg.dim, cfg.separations);
  Rng rng(cfg.seed.value_or(0));
  return lambda_constant(cfg.model, starts, cfg.t_max, cfg.n_paths, cfg.sampler(), rng, cfg.workers);
}

inline void write_lambda(const LambdaEstimate& est, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                         std::uint64_t config_hash) {
  const std::uint64_t seed = cfg.seed.value_or(0);
  {
    auto f = open_output(dir / (cfg.name + "_lambda.csv"));
    write_header_comment(f, config_hash, seed);
    f << "separation,integral,stderr_integral,tail,total,decay_slope\n";
    for (const auto& p : est.pairs) {
      f << fmt_double(p.separation) << ',' << fmt_double(p.integral) << ',' << fmt_double(p.stderr_integral) << ','
        << fmt_double(p.tail) << ',' << fmt_double(p.total()) << ',' << fmt_double(p.decay_slope) << '\n';
    }
  }
  {
    auto f = open_output(dir / (cfg.name + "_integrand.csv"));
    write_header_comment(f, config_hash, seed);
    f << "t,mean_f\n";
    for (std::size_t k = 0; k < est.times.size(); ++k) f << fmt_double(est.times[k]) << ',' << fmt_double(est.integrand[k]) << '\n';
  }
  {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : est.pairs) {
      pairs.push_back({{"separation", p.separation},
                       {"integral", json_number(p.integral)},
                       {"stderr_integral", json_number(p.stderr_integral)},
                       {"tail", json_number(p.tail)},
                       {"decay_slope", json_number(p.decay_slope)}});
    }
    auto f = open_output(dir / (cfg.name + "_lambda.json"));
    write_json(f,
               {{"name", cfg.name},
                {"model", cfg.model.describe()},
                {"lambda_hat", json_number(est.lambda_hat)},
                {"beta0_hat", json_number(est.beta0_hat)},
                {"t_max", est.t_max},
                {"n_paths", cfg.n_paths},
                {"pairs", pairs}},
               config_hash, seed);
  }
}

}  // namespace hypam
