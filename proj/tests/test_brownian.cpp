#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "hypam/brownian.hpp"
#include "hypam/heatkernel.hpp"
#include "hypam/stats.hpp"

using namespace hypam;

namespace {

SamplerConfig config(double step, std::uint64_t seed = 1, Scheme scheme = Scheme::embedded_sde) {
  SamplerConfig c;
  c.step = step;
  c.seed = seed;
  c.scheme = scheme;
  return c;
}

std::vector<double> endpoint_radii(const HPoint& x0, double t, int n, const SamplerConfig& cfg, Rng& rng) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(distance(x0, sample_path(x0, t, cfg, rng).end()));
  return out;
}

}  // namespace

TEST(Sampler, RejectsBadConfig) {
  const auto o = HPoint::origin(3);
  Rng rng(1);
  EXPECT_THROW(sample_path(o, 1.0, config(0.2), rng), std::invalid_argument);
  EXPECT_THROW(sample_path(o, 1.0, config(0.0), rng), std::invalid_argument);
  EXPECT_THROW(sample_path(o, 2e7, config(0.1), rng), std::invalid_argument);
  EXPECT_THROW(sample_path(o, -1.0, config(0.01), rng), std::invalid_argument);
  EXPECT_THROW(sample_path(HPoint::origin(2), 1.0, config(0.01), rng), std::invalid_argument);
  EXPECT_THROW(parse_scheme("heun"), std::invalid_argument);
}

TEST(Sampler, PathInvariants) {
  Rng rng(2);
  for (Scheme s : {Scheme::embedded_sde, Scheme::geodesic_walk}) {
    const auto x0 = HPoint::renormalized({0.3, -1.0, 2.0, 0.0});
    const auto p = sample_path(x0, 7.3, config(1e-3, 1, s), rng);
    EXPECT_EQ(p.times.front(), 0.0);
    EXPECT_EQ(p.end_time(), 7.3);
    EXPECT_EQ(p.points.front(), x0);
    for (std::size_t k = 1; k < p.times.size(); ++k) {
      EXPECT_GT(p.times[k], p.times[k - 1]);
      EXPECT_LE(p.times[k] - p.times[k - 1], 0.01 * 7.3 + 1e-12);
    }
    for (const auto& z : p.points) EXPECT_LE(z.constraint_residual(), 1e-8);
  }
}

TEST(Sampler, SameSeedSameBytes) {
  auto dump = [](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<BrownianPath> paths;
    for (int k = 0; k < 3; ++k) paths.push_back(sample_path(HPoint::origin(3), 1.0, config(1e-2), rng));
    std::ostringstream os;
    write_paths_csv(os, paths);
    return os.str();
  };
  EXPECT_EQ(dump(42), dump(42));
  EXPECT_NE(dump(42), dump(43));
  EXPECT_EQ(dump(42).substr(0, dump(42).find('\n')), "path_id,t,z1,z2,z3,z4");
}

TEST(Sampler, SmallTimeRadiusIsScaledChi) {
  // rho / sqrt(2t) -> chi_3
  const double t = 1e-4;
  Rng rng(3);
  auto r = endpoint_radii(HPoint::origin(3), t, 5000, config(1e-6), rng);
  boost::math::chi_squared chi3(3);
  const double ks = stats::ks_one_sample(r, [&](double x) { return boost::math::cdf(chi3, x * x / (2 * t)); });
  EXPECT_LE(ks, 0.03);
}

TEST(Sampler, MatchesExactRadialLaw) {
  Rng rng(4);
  const double t = 1.0;
  for (Scheme s : {Scheme::embedded_sde, Scheme::geodesic_walk}) {
    auto r = endpoint_radii(HPoint::origin(3), t, 4000, config(1e-3, 1, s), rng);
    EXPECT_LE(stats::ks_one_sample(r, [&](double x) { return radial_cdf_d3(t, x); }), 0.03) << to_string(s);
  }
}

TEST(Sampler, MeanRadiusAgainstExactValue) {
  // E rho_t = 2t + 1 up to exponentially small terms (d = 3)
  Rng rng(5);
  const double t = 5.0;
  auto r = endpoint_radii(HPoint::origin(3), t, 2000, config(1e-2), rng);
  const auto s = stats::summarize(r);
  EXPECT_NEAR(s.mean, 2 * t + 1, 4 * s.stderr_of_mean());
}

TEST(Sampler, SchemesAgree) {
  Rng a(6), b(7);
  const double t = 5.0;
  auto ra = endpoint_radii(HPoint::origin(3), t, 6000, config(2e-3, 1, Scheme::embedded_sde), a);
  auto rb = endpoint_radii(HPoint::origin(3), t, 6000, config(2e-3, 1, Scheme::geodesic_walk), b);
  EXPECT_LE(stats::ks_two_sample(ra, rb), 0.03);
}

TEST(Sampler, MarkovConcatenation) {
  Rng a(8), b(9);
  const auto o = HPoint::origin(3);
  std::vector<double> direct, chained;
  for (int k = 0; k < 6000; ++k) {
    direct.push_back(distance(o, sample_path(o, 2.0, config(1e-2), a).end()));
    const auto mid = sample_path(o, 1.0, config(1e-2), b).end();
    chained.push_back(distance(o, sample_path(mid, 1.0, config(1e-2), b).end()));
  }
  EXPECT_LE(stats::ks_two_sample(direct, chained), 0.03);
}

TEST(Sampler, AngularPartIsUniform) {
  // d = 3: the first coordinate of the polar direction is uniform on [-1, 1]
  Rng rng(1);
  const int bins = 20;
  std::vector<std::size_t> counts(bins, 0);
  std::vector<double> probs(bins, 1.0 / bins);
  for (int k = 0; k < 100000; ++k) {
    const auto dir = polar_direction(sample_path(HPoint::origin(3), 1.0, config(1e-2), rng).end());
    ++counts[std::min<std::size_t>(bins - 1, static_cast<std::size_t>((dir[0] + 1) / 2 * bins))];
  }
  EXPECT_GT(stats::chi_square_test(counts, probs).p_value, 0.01);
}

TEST(Pair, IndependentAndReproducible) {
  Rng rng(11);
  const auto o = HPoint::origin(3);
  std::vector<double> ra, rb;
  for (int k = 0; k < 10000; ++k) {
    auto [p, q] = sample_pair(o, 1.0, config(1e-2), rng);
    ra.push_back(distance(o, p.end()));
    rb.push_back(distance(o, q.end()));
  }
  const auto sa = stats::summarize(ra), sb = stats::summarize(rb);
  double cov = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) cov += (ra[i] - sa.mean) * (rb[i] - sb.mean);
  cov /= static_cast<double>(ra.size() - 1);
  EXPECT_LE(std::abs(cov / std::sqrt(sa.variance * sb.variance)), 0.03);

  Rng r1(99), r2(99);
  auto p1 = sample_pair(o, 1.0, config(1e-2), r1);
  auto p2 = sample_pair(o, 1.0, config(1e-2), r2);
  EXPECT_EQ(p1.first.points, p2.first.points);
  EXPECT_EQ(p1.second.points, p2.second.points);
  EXPECT_NE(p1.first.points, p1.second.points);
}

TEST(Pair, SeparationGrowsLikeFourT) {
  // rho(B_t, B~_t) has the law of rho_{2t}: mean (4t + 1)
  Rng rng(12);
  const auto o = HPoint::origin(3);
  const double t = 25.0;
  std::vector<double> sep;
  for (int k = 0; k < 1000; ++k) {
    auto [p, q] = sample_pair(o, t, config(1e-2), rng);
    sep.push_back(distance(p.end(), q.end()) / t);
  }
  const auto s = stats::summarize(sep);
  EXPECT_NEAR(s.mean, 4.0, 0.1);
  EXPECT_NEAR(s.mean, (4 * t + 1) / t, 4 * s.stderr_of_mean());
}

TEST(Radial, XiStatistic) {
  EXPECT_EQ(xi_statistic(20.0, 10.0, 3), 0.0);
  EXPECT_NEAR(xi_statistic(15.0, 25.0, 3), -7.0, 1e-15);
  BrownianPath path;
  path.times = {0.0, 4.0};
  path.points = {HPoint::origin(3), from_polar(3, 8.0, std::vector<double>{0, 1, 0})};
  EXPECT_NEAR(radial_statistics(path, HPoint::origin(3)).xi_t, 0.0, 1e-12);
  path.times = {0.0, 0.5};
  EXPECT_THROW(radial_statistics(path, HPoint::origin(3)), std::invalid_argument);
}

TEST(Radial, TailProbabilitiesAtTimeTen) {
  const double t = 10.0;
  Rng rng(13);
  const auto o = HPoint::origin(3);
  int low = 0, far = 0;
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    const double xi = radial_statistics(sample_path(o, t, config(1e-3), rng), o).xi_t;
    low += xi <= -0.5 * std::sqrt(t);
    far += std::abs(xi) > 4;
  }
  // exact values from the closed-form radial law
  const double p_low = radial_cdf_d3(t, 2 * t - 0.5 * t);
  const double p_far = radial_cdf_d3(t, 2 * t - 4 * std::sqrt(t)) + 1 - radial_cdf_d3(t, 2 * t + 4 * std::sqrt(t));
  EXPECT_NEAR(p_low, 0.0842, 5e-4);
  EXPECT_LT(p_far, 0.01);
  const double se_low = std::sqrt(p_low * (1 - p_low) / n);
  EXPECT_NEAR(static_cast<double>(low) / n, p_low, 4 * se_low);
  EXPECT_LE(static_cast<double>(far) / n, 0.01);
}

TEST(Events, AngleLogTerm) {
  EXPECT_NEAR(angle_log_term(std::numbers::pi), 0.0, 1e-15);
  EXPECT_NEAR(angle_log_term(std::numbers::pi / 2), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isinf(angle_log_term(0.0)));
}

TEST(Events, LargeDeltaHoldsAndSmallAngleFailureIsRare) {
  Rng rng(14);
  const auto o = HPoint::origin(3);
  int a_fail = 0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    auto pair = sample_pair(o, 10.0, config(1e-2), rng);
    if (k < 50) {
      const auto big = event_indicators(pair, o, 1e6, 1.0);
      EXPECT_TRUE(big.A_s);
      EXPECT_EQ(big.A_s, big.M_s);
    }
    a_fail += !event_indicators(pair, o, 1.0, 10.0).A_s;
  }
  EXPECT_LT(static_cast<double>(a_fail) / n, 0.02);
}

TEST(Events, DistinctStartsUseBothAngles) {
  Rng rng(15);
  const auto x = HPoint::origin(3);
  const auto y = from_polar(3, 1.0, std::vector<double>{1, 0, 0});
  int m_fail = 0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    auto pair = sample_pair(x, y, 10.0, config(1e-2), rng);
    const auto ev = event_indicators(pair, x, y, 1.0, 10.0);
    m_fail += !ev.M_s;
  }
  EXPECT_LE(static_cast<double>(m_fail) / n, 0.05);
  auto pair = sample_pair(x, y, 1.0, config(1e-2), rng);
  EXPECT_THROW(event_indicators(pair, x, y, 0.0, 0.5), std::invalid_argument);
  EXPECT_THROW(event_indicators(pair, x, y, 1.0, 2.0), std::invalid_argument);
}
