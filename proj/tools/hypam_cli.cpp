#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hypam/hypam.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;  // 0: keep the config value
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config, "experiment config file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--workers", c.workers, "worker threads");
  sub->add_option("--out", c.out, "output directory");
}

struct Loaded {
  std::vector<hypam::ExperimentConfig> sections;
  std::uint64_t hash;
};

Loaded load(const Common& c) {
  const std::string text = hypam::read_text_file(c.config);
  Loaded l{hypam::parse_config(text, c.seed), hypam::fnv1a(text)};
  for (auto& s : l.sections) {
    if (c.workers > 0) s.workers = c.workers;
    if (!c.out.empty()) s.out = c.out;
    if (s.model.kind == hypam::CovarianceKind::constant) {
      std::cerr << "note: [" << s.name << "] constant covariance is an analytic oracle only; it does not decay\n";
    }
  }
  return l;
}

int phase_sweep(const Common& c) {
  const auto l = load(c);
  for (const auto& s : l.sections) {
    const auto res = hypam::phase_sweep(s);
    hypam::write_sweep(res, s, s.out, l.hash);
    for (const auto& sum : res.summaries) {
      std::cout << s.name << " beta=" << sum.beta << " " << hypam::to_string(sum.kind) << ": " << sum.classification
                << '\n';
    }
    for (const auto& e : res.errors) {
      std::cerr << s.name << " beta=" << e.beta << " t=" << e.t << " " << hypam::to_string(e.kind)
                << ": " << e.message << '\n';
    }
  }
  return kExitOk;
}

int lambda(const Common& c) {
  const auto l = load(c);
  for (const auto& s : l.sections) {
    if (s.model.kind == hypam::CovarianceKind::constant || !(s.model.alpha > 1.0)) {
      std::cerr << "[" << s.name << "] refused: the time integral of E f(B_t, B~_t) is finite only for "
                   "alpha > 1 (the integrand decays like t^-alpha); got "
                << s.model.describe() << '\n';
      return kExitConfig;
    }
    const auto est = hypam::run_lambda(s);
    hypam::write_lambda(est, s, s.out, l.hash);
    std::cout << s.name << " lambda_hat=" << hypam::fmt_double(est.lambda_hat)
              << " beta0_hat=" << hypam::fmt_double(est.beta0_hat) << '\n';
  }
  return kExitOk;
}

int validate(const std::string& suite, const Common& c, bool corrupt) {
  hypam::ValidationOptions opt;
  if (c.seed) opt.seed = *c.seed;
  opt.workers = c.workers > 0 ? c.workers : 1;
  if (corrupt) opt.tolerance_scale = 1e-12;
  const auto checks = hypam::run_validate(suite, opt);
  const auto report = hypam::validation_report(checks, opt);
  for (const auto& r : checks) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << '/' << r.name << "  value=" << hypam::fmt_double(r.value)
              << "  " << r.detail << '\n';
  }
  const std::filesystem::path dir = c.out.empty() ? "." : c.out;
  auto f = hypam::open_output(dir / ("validate_" + suite + ".json"));
  hypam::write_json(f, report, hypam::fnv1a("validate " + suite), opt.seed);
  return report["passed"].get<bool>() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypam: parabolic Anderson model on hyperbolic space"};
  app.require_subcommand(1);

  Common sweep_c, lambda_c, validate_c;
  auto* sweep = app.add_subcommand("phase-sweep", "second-moment sweep over (beta, t, estimator)");
  add_common(sweep, sweep_c, true);
  auto* lam = app.add_subcommand("lambda", "estimate Lambda and beta0 = 1/sqrt(Lambda)");
  add_common(lam, lambda_c, true);

  auto* val = app.add_subcommand("validate", "run property suites");
  add_common(val, validate_c, false);
  std::string suite = "all";
  bool corrupt = false;
  val->add_option("--suite", suite, "geometry | heatkernel | brownian | covariance | all")
      ->check(CLI::IsMember({"geometry", "heatkernel", "brownian", "covariance", "all"}));
  val->add_flag("--corrupt-tolerance", corrupt, "shrink every tolerance (harness self-test)");

  auto* sp = app.add_subcommand("sample-path", "dump Brownian paths as CSV");
  double sp_t = 1.0, sp_step = 1e-3;
  std::size_t sp_n = 1;
  int sp_dim = 3;
  std::string sp_scheme = "embedded-sde", sp_out;
  std::uint64_t sp_seed = 0;
  sp->add_option("--t", sp_t, "horizon")->check(CLI::PositiveNumber);
  sp->add_option("--n", sp_n, "number of paths");
  sp->add_option("--dim", sp_dim, "dimension d");
  sp->add_option("--step", sp_step, "time step");
  sp->add_option("--scheme", sp_scheme, "embedded-sde | geodesic-walk");
  sp->add_option("--seed", sp_seed, "seed")->required();
  sp->add_option("--out", sp_out, "output CSV file (default stdout)");

  auto* ev = app.add_subcommand("eigenvalue", "principal Dirichlet eigenvalue of a geodesic ball");
  double ev_r = 1.0;
  int ev_dim = 3;
  std::string ev_mode = "hyperbolic";
  ev->add_option("--r", ev_r, "ball radius")->required();
  ev->add_option("--dim", ev_dim, "dimension d");
  ev->add_option("--mode", ev_mode, "hyperbolic | euclidean")->check(CLI::IsMember({"hyperbolic", "euclidean"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sweep) return phase_sweep(sweep_c);
    if (*lam) return lambda(lambda_c);
    if (*val) return validate(suite, validate_c, corrupt);
    if (*sp) {
      hypam::SamplerConfig cfg;
      cfg.dim = sp_dim;
      cfg.step = sp_step;
      cfg.scheme = hypam::parse_scheme(sp_scheme);
      cfg.seed = sp_seed;
      hypam::Rng rng(sp_seed);
      std::vector<hypam::BrownianPath> paths;
      for (std::size_t i = 0; i < sp_n; ++i) paths.push_back(hypam::sample_path(hypam::HPoint::origin(sp_dim), sp_t, cfg, rng));
      std::ostringstream args;
      args << "sample-path t=" << sp_t << " n=" << sp_n << " dim=" << sp_dim << " step=" << sp_step
           << " scheme=" << sp_scheme;
      auto emit = [&](std::ostream& os) {
        hypam::write_header_comment(os, hypam::fnv1a(args.str()), sp_seed);
        hypam::write_paths_csv(os, paths);
      };
      if (sp_out.empty()) {
        emit(std::cout);
      } else {
        auto f = hypam::open_output(sp_out);
        emit(f);
      }
      return kExitOk;
    }
    if (*ev) {
      std::cout << hypam::fmt_double(hypam::dirichlet_eigenvalue(ev_r, ev_dim, ev_mode)) << '\n';
      return kExitOk;
    }
  } catch (const hypam::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
