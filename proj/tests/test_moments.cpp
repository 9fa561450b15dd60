#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hypam/moments.hpp"

using namespace hypam;

namespace {

SamplerConfig config(double step) {
  SamplerConfig c;
  c.step = step;
  return c;
}

Ensemble ensemble(const CovarianceModel& m, std::vector<double> horizons, std::size_t n, double step,
                  std::uint64_t seed, unsigned workers = 1, int dyson = 0) {
  EnsembleRequest r;
  const auto o = HPoint::origin(3);
  r.start_x.assign(o.coords().begin(), o.coords().end());
  r.start_y = r.start_x;
  r.horizons = std::move(horizons);
  r.n_pairs = n;
  r.model = m;
  r.cfg = config(step);
  r.cfg.seed = seed;
  r.workers = workers;
  r.dyson_order = dyson;
  return run_ensemble(r);
}

PhaseRow row(double t, double v, double se) {
  PhaseRow r;
  r.t = t;
  r.log_m2 = v;
  r.stderr_log = se;
  return r;
}

}  // namespace

TEST(Estimators, ZeroBetaIsExactlyZero) {
  Rng rng(1);
  const auto o = HPoint::origin(3);
  const auto m = CovarianceModel::phi(1.0);
  auto fk = fk_second_moment(o, 2.0, 0.0, m, 10, config(1e-2), rng);
  EXPECT_EQ(fk.log_m2, 0.0);
  EXPECT_EQ(fk.stderr_log, 0.0);
  auto j = jensen_lower(o, 2.0, 0.0, m, 10, config(1e-2), rng);
  EXPECT_EQ(j.log_m2, 0.0);
  const std::vector<double> x{0, 0, 0};
  EXPECT_EQ(euclidean_second_moment(x, 2.0, 0.0, CovarianceModel::truncated_power(1.0), 10, config(1e-2), rng).log_m2,
            0.0);
  auto d = dyson_partial(o, 2.0, 0.0, m, 3, 10, config(1e-2), rng);
  EXPECT_EQ(d.log_m2, 0.0);
}

TEST(Estimators, ConstantCovarianceIsExact) {
  Rng rng(2);
  const auto o = HPoint::origin(3);
  const auto m = CovarianceModel::constant(1.0);
  auto fk = fk_second_moment(o, 4.0, 0.5, m, 50, config(1e-2), rng);
  EXPECT_NEAR(fk.log_m2, 1.0, 1e-6);
  EXPECT_NEAR(fk.stderr_log, 0.0, 1e-9);
  auto j = jensen_lower(o, 4.0, 0.5, m, 50, config(1e-2), rng);
  EXPECT_NEAR(j.log_m2, 1.0, 1e-6);

  // partial sums of e^x, x = beta^2 c t = 1
  for (int n : {1, 2, 4, 8}) {
    auto d = dyson_partial(o, 4.0, 0.5, m, n, 20, config(1e-2), rng);
    double ref = 0, term = 1;
    for (int k = 0; k <= n; ++k) {
      ref += term;
      term /= (k + 1);
    }
    EXPECT_NEAR(d.log_m2, std::log(ref), 1e-10) << "n=" << n;
    EXPECT_GE(d.truncation_bound, 1.0 - ref / std::exp(1.0));
  }
  auto d4 = dyson_partial(o, 4.0, 0.5, m, 4, 20, config(1e-2), rng);
  ASSERT_EQ(d4.terms.size(), 5u);
  EXPECT_NEAR(d4.terms[2], 0.5, 1e-10);
  EXPECT_TRUE(d4.truncated);
}

TEST(Estimators, EuclideanConstantIsExact) {
  Rng rng(3);
  const std::vector<double> x{0, 0, 0, 0};
  auto e = euclidean_second_moment(x, 3.0, 0.4, CovarianceModel::constant(2.0), 40, config(1e-2), rng);
  EXPECT_NEAR(e.log_m2, 0.16 * 2.0 * 3.0, 1e-8);
  EXPECT_THROW(euclidean_second_moment(std::vector<double>{0, 0}, 1.0, 0.1, CovarianceModel::constant(1.0), 4,
                                       config(1e-2), rng),
               std::invalid_argument);
  EXPECT_THROW(euclidean_second_moment(x, 1.0, 0.1, CovarianceModel::phi(1.0), 4, config(1e-2), rng),
               std::invalid_argument);
}

TEST(Estimators, RejectBadArguments) {
  Rng rng(4);
  const auto o = HPoint::origin(3);
  const auto m = CovarianceModel::phi(1.0);
  EXPECT_THROW(fk_second_moment(o, 1.0, -0.1, m, 10, config(1e-2), rng), std::invalid_argument);
  EXPECT_THROW(fk_second_moment(o, 0.0, 0.1, m, 10, config(1e-2), rng), std::invalid_argument);
  EXPECT_THROW(fk_second_moment(o, 1.0, 0.1, m, 0, config(1e-2), rng), std::invalid_argument);
  EXPECT_THROW(dyson_partial(o, 1.0, 0.1, m, 9, 10, config(1e-2), rng), std::invalid_argument);
  EXPECT_THROW(fk_second_moment(o, 1.0, 0.1, m, 10, config(0.5), rng), std::invalid_argument);
}

TEST(Estimators, JensenBelowFeynmanKac) {
  const auto ens = ensemble(CovarianceModel::phi(0.5), {2.0, 5.0, 10.0}, 400, 1e-2, 5);
  for (double t : {2.0, 5.0, 10.0}) {
    for (double beta : {0.3, 1.0, 2.0}) {
      const auto fk = fk_from_ensemble(ens, t, beta);
      const auto j = jensen_from_ensemble(ens, t, beta);
      // Jensen holds pathwise on the sample, not only in expectation
      EXPECT_LE(j.log_m2, fk.log_m2 + 1e-12);
      EXPECT_LE(j.log_m2, fk.log_m2 + 3 * std::hypot(j.stderr_log, fk.stderr_log));
    }
  }
}

TEST(Estimators, MonotoneInBetaAndTime) {
  const auto ens = ensemble(CovarianceModel::truncated_power(1.5), {1.0, 4.0, 8.0}, 200, 1e-2, 6);
  double prev_t = 0;
  for (double t : {1.0, 4.0, 8.0}) {
    double prev = 0;
    for (double beta : {0.1, 0.5, 1.0, 1.5}) {
      const double v = fk_from_ensemble(ens, t, beta).log_m2;
      EXPECT_GT(v, prev);
      prev = v;
    }
    EXPECT_GT(prev, prev_t);
    prev_t = prev;
  }
}

TEST(Estimators, DysonFirstOrderMatchesJensen) {
  const auto ens = ensemble(CovarianceModel::phi(1.0), {3.0}, 2000, 1e-2, 7, 1, 1);
  const auto j = jensen_from_ensemble(ens, 3.0, 1.0);
  const auto d = dyson_from_ensemble(ens, 1.0);
  ASSERT_EQ(d.terms.size(), 2u);
  // D_1 estimates E int f from random time samples; jensen integrates the same paths
  EXPECT_NEAR(d.terms[1], j.log_m2, 3 * j.stderr_log + 0.02 * j.log_m2);
}

TEST(Estimators, DysonAgreesWithFeynmanKacAtSmallCoupling) {
  const auto m = CovarianceModel::truncated_power(2.0);
  const auto ens = ensemble(m, {5.0}, 1000, 1e-2, 8, 1, 4);
  const double beta = std::sqrt(0.5 / 5.0);
  const auto d = dyson_from_ensemble(ens, beta);
  const auto fk = fk_from_ensemble(ens, 5.0, beta);
  EXPECT_FALSE(d.truncated);
  EXPECT_NEAR(d.log_m2, fk.log_m2, 3 * std::hypot(d.stderr_log, fk.stderr_log) + d.truncation_bound);
}

TEST(Estimators, BoundedRegimeStaysFlat) {
  Rng rng(9);
  const auto o = HPoint::origin(3);
  const auto m = CovarianceModel::truncated_power(2.0);
  const auto a = fk_second_moment(o, 10.0, 0.3, m, 300, config(1e-2), rng);
  const auto b = fk_second_moment(o, 40.0, 0.3, m, 300, config(1e-2), rng);
  EXPECT_LE(std::abs(b.log_m2 - a.log_m2), 0.2);
}

TEST(Estimators, DeterministicAcrossWorkerCounts) {
  const auto m = CovarianceModel::phi(0.8);
  const auto a = ensemble(m, {2.0}, 300, 1e-2, 10, 1);
  const auto b = ensemble(m, {2.0}, 300, 1e-2, 10, 3);
  EXPECT_EQ(a.integrals, b.integrals);
  EXPECT_EQ(a.f_mean, b.f_mean);
  EXPECT_EQ(fk_from_ensemble(a, 2.0, 1.0).log_m2, fk_from_ensemble(b, 2.0, 1.0).log_m2);

  Rng r1(77), r2(77);
  const auto o = HPoint::origin(3);
  EXPECT_EQ(fk_second_moment(o, 1.0, 1.0, m, 50, config(1e-2), r1).log_m2,
            fk_second_moment(o, 1.0, 1.0, m, 50, config(1e-2), r2).log_m2);
}

TEST(Estimators, StderrShrinksLikeRootN) {
  const auto m = CovarianceModel::phi(0.5);
  const auto small = ensemble(m, {4.0}, 1500, 1e-2, 11);
  const auto large = ensemble(m, {4.0}, 3000, 1e-2, 12);
  const double ratio = fk_from_ensemble(small, 4.0, 1.0).stderr_log / fk_from_ensemble(large, 4.0, 1.0).stderr_log;
  EXPECT_NEAR(ratio, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(Estimators, OverflowingPathsRaiseEstimatorError) {
  // walkers started near the overflow radius leave the representable range
  Rng rng(13);
  const auto far = from_polar(3, 650.0, std::vector<double>{1, 0, 0});
  EXPECT_THROW(fk_second_moment(far, 60.0, 1.0, CovarianceModel::phi(1.0), 20, config(0.1), rng), estimator_error);
}

TEST(Euclidean, GrowsFasterThanHyperbolic) {
  Rng rng(14);
  const auto m = CovarianceModel::truncated_power(0.5);
  const auto h = fk_second_moment(HPoint::origin(3), 20.0, 0.5, m, 300, config(1e-2), rng);
  const auto e = euclidean_second_moment(std::vector<double>{0, 0, 0}, 20.0, 0.5, m, 300, config(1e-2), rng);
  EXPECT_GT(e.log_m2 - h.log_m2, 3 * std::hypot(e.stderr_log, h.stderr_log));
}

TEST(Lambda, Refusals) {
  Rng rng(15);
  const auto o = HPoint::origin(3);
  const std::vector<std::pair<HPoint, HPoint>> starts{{o, o}};
  EXPECT_THROW(lambda_constant(CovarianceModel::constant(1.0), starts, 50, 10, config(0.1), rng), std::invalid_argument);
  EXPECT_THROW(lambda_constant(CovarianceModel::phi(1.0), starts, 50, 10, config(0.1), rng), std::invalid_argument);
  EXPECT_THROW(lambda_constant(CovarianceModel::truncated_power(0.5), starts, 50, 10, config(0.1), rng),
               std::invalid_argument);
  EXPECT_THROW(lambda_constant(CovarianceModel::truncated_power(2.0), starts, 20, 10, config(0.1), rng),
               std::invalid_argument);
}

TEST(Lambda, TruncatedPowerAlphaTwo) {
  Rng rng(16);
  const auto o = HPoint::origin(3);
  std::vector<std::pair<HPoint, HPoint>> starts;
  for (double s : {0.0, 5.0, 10.0}) starts.emplace_back(o, from_polar(3, s, std::vector<double>{1, 0, 0}));
  const auto est = lambda_constant(CovarianceModel::truncated_power(2.0), starts, 50, 300, config(1e-2), rng);
  ASSERT_EQ(est.pairs.size(), 3u);
  for (const auto& p : est.pairs) {
    EXPECT_LE(p.integral, est.lambda_hat);
    EXPECT_GE(p.decay_slope, -2.4);
    EXPECT_LE(p.decay_slope, -1.6);
  }
  // the coincident start is the supremum; larger separations only lose mass
  EXPECT_EQ(est.lambda_hat, est.pairs[0].total());
  EXPECT_GT(est.pairs[0].total(), est.pairs[1].total());
  EXPECT_GT(est.pairs[1].total(), est.pairs[2].total());
  EXPECT_NEAR(est.beta0_hat, 1 / std::sqrt(est.lambda_hat), 1e-15);
  EXPECT_EQ(est.times.size(), est.integrand.size());
  EXPECT_NEAR(est.times[1] - est.times[0], 0.05, 1e-12);
}

TEST(GrowthFit, SyntheticLinear) {
  std::vector<PhaseRow> rows;
  for (double t : {5.0, 10.0, 20.0, 40.0}) rows.push_back(row(t, 3 * t, 0.01));
  const auto g = growth_fit(rows, 0.5);
  EXPECT_EQ(g.classification, Growth::linear);
  EXPECT_NEAR(g.rate_or_exponent, 3.0, 1e-9);
  EXPECT_NEAR(g.r_squared, 1.0, 1e-12);
}

TEST(GrowthFit, SyntheticPower) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<PhaseRow> rows;
  for (double t : {5.0, 10.0, 20.0, 40.0, 80.0}) rows.push_back(row(t, 2 * std::sqrt(t) + noise(rng), 0.05));
  const auto g = growth_fit(rows, 0.5);
  EXPECT_EQ(g.classification, Growth::power);
  EXPECT_NEAR(g.rate_or_exponent, 0.5, 0.05);
}

TEST(GrowthFit, SyntheticBounded) {
  std::vector<PhaseRow> rows;
  for (double t : {5.0, 10.0, 20.0, 40.0}) rows.push_back(row(t, 0.3 + 1e-4 * t, 0.01));
  EXPECT_EQ(growth_fit(rows, 2.0).classification, Growth::bounded);
}

TEST(GrowthFit, ConstantModelRate) {
  const double beta = 0.7, c = 1.3;
  const auto ens = ensemble(CovarianceModel::constant(c), {5.0, 10.0, 20.0, 40.0}, 20, 1e-2, 18);
  std::vector<PhaseRow> rows;
  for (double t : {5.0, 10.0, 20.0, 40.0}) rows.push_back(to_row(fk_from_ensemble(ens, t, beta)));
  const auto g = growth_fit(rows, 0.0);
  EXPECT_EQ(g.classification, Growth::linear);
  EXPECT_NEAR(g.rate_or_exponent, beta * beta * c, 0.01 * beta * beta * c);
}

TEST(GrowthFit, NeedsFourTimes) {
  std::vector<PhaseRow> rows{row(1, 1, 0.1), row(2, 2, 0.1), row(3, 3, 0.1), row(3, 3.1, 0.1)};
  EXPECT_THROW(growth_fit(rows, 0.5), std::invalid_argument);
}
