#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hypam/geometry.hpp"
#include "hypam/stats.hpp"

using namespace hypam;

namespace {

// Poincare ball: p = z_{1..d} / (1 + z_{d+1}),
// rho = arccosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2))).
double poincare_distance(const HPoint& a, const HPoint& b) {
  const auto za = a.coords();
  const auto zb = b.coords();
  const std::size_t d = za.size() - 1;
  double pp = 0, qq = 0, pq = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const double p = za[i] / (1 + za[d]);
    const double q = zb[i] / (1 + zb[d]);
    pp += p * p;
    qq += q * q;
    pq += (p - q) * (p - q);
  }
  // 1 - |p|^2 = 2 / (1 + z_{d+1}) exactly on the sheet; avoids cancellation
  const double den = (2.0 / (1 + za[d])) * (2.0 / (1 + zb[d]));
  return std::acosh(1 + 2 * pq / den);
}

HPoint random_point(int d, double max_r, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, max_r);
  const auto dir = uniform_unit_vector(d, rng);
  return from_polar(d, u(rng), dir);
}

std::vector<double> e(int d, int i, double s = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(d), 0.0);
  v[static_cast<std::size_t>(i)] = s;
  return v;
}

}  // namespace

TEST(Minkowski, BasicValues) {
  const auto o = HPoint::origin(3);
  EXPECT_DOUBLE_EQ(minkowski_product(o.coords(), o.coords()), -1.0);
  std::vector<double> a{1, 0, 0, std::sqrt(2.0)}, b{0, 1, 0, std::sqrt(2.0)};
  EXPECT_NEAR(minkowski_product(a, b), -2.0, 1e-15);
  EXPECT_EQ(minkowski_product(a, b), minkowski_product(b, a));
  std::vector<double> short_vec{1, 0, 1};
  EXPECT_THROW(minkowski_product(a, short_vec), std::invalid_argument);
}

TEST(HPointTest, ConstructionChecks) {
  EXPECT_NO_THROW(HPoint::from_coords({1, 0, 0, std::sqrt(2.0)}));
  EXPECT_THROW(HPoint::from_coords({1, 0, 0, 1.0}), std::invalid_argument);
  EXPECT_THROW(HPoint::from_coords({0, 0, 0, -1.0}), std::invalid_argument);
  EXPECT_THROW(HPoint::origin(1), std::invalid_argument);
  const auto p = HPoint::renormalized({3, 4, 0, 0});
  EXPECT_NEAR(p.time_coord(), std::sqrt(26.0), 1e-14);
  EXPECT_LE(p.constraint_residual(), 1e-15);
}

TEST(Distance, KnownValues) {
  const auto o = HPoint::origin(3);
  EXPECT_EQ(distance(o, o), 0.0);
  const auto y = HPoint::from_coords({std::sinh(1.0), 0, 0, std::cosh(1.0)});
  EXPECT_NEAR(distance(o, y), 1.0, 1e-14);
  EXPECT_THROW(distance(o, HPoint::origin(2)), std::invalid_argument);
}

TEST(Distance, OffSheetInputIsDomainError) {
  std::vector<double> a{0, 0, 0, 1}, b{0, 0, 0, 0.5};
  EXPECT_THROW(distance(a, b), numeric_domain_error);
}

TEST(Distance, AgreesWithPoincareModel) {
  Rng rng(11);
  for (int d : {2, 3, 5}) {
    for (int k = 0; k < 2000; ++k) {
      const auto a = random_point(d, 5.0, rng);
      const auto b = random_point(d, 5.0, rng);
      const double ref = poincare_distance(a, b);
      EXPECT_NEAR(distance(a, b), ref, 1e-8 * std::max(1.0, ref));
    }
  }
}

TEST(Distance, NearbyPointsKeepPrecision) {
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const auto a = random_point(3, 5.0, rng);
    const auto sigma = uniform_sphere_direction(a, rng);
    const double r = 1e-6 * (1 + k);
    EXPECT_NEAR(distance(a, exp_map(sigma, r)), r, 1e-10);
  }
}

TEST(Distance, MetricAxioms) {
  Rng rng(3);
  for (int k = 0; k < 3000; ++k) {
    const auto a = random_point(3, 4.0, rng);
    const auto b = random_point(3, 4.0, rng);
    const auto c = random_point(3, 4.0, rng);
    EXPECT_GE(distance(a, b), 0.0);
    EXPECT_NEAR(distance(a, b), distance(b, a), 1e-12);
    EXPECT_LE(distance(a, c), distance(a, b) + distance(b, c) + 1e-10);
  }
}

TEST(ExpMap, KnownValues) {
  const auto o = HPoint::origin(3);
  auto sigma = TangentVec::make(o, {1, 0, 0, 0});
  EXPECT_EQ(exp_map(sigma, 0.0), o);
  const auto y = exp_map(sigma, 1.0);
  EXPECT_NEAR(y[0], std::sinh(1.0), 1e-15);
  EXPECT_NEAR(y[3], std::cosh(1.0), 1e-15);
  EXPECT_THROW(exp_map(TangentVec{o, {2, 0, 0, 0}}, 1.0), std::invalid_argument);
  EXPECT_THROW(exp_map(sigma, -1.0), std::invalid_argument);
  EXPECT_THROW(exp_map(sigma, 701.0), std::invalid_argument);
}

TEST(ExpMap, DistanceEqualsRho) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int k = 0; k < 1000; ++k) {
    const auto x = random_point(3, 2.0, rng);
    const auto sigma = uniform_sphere_direction(x, rng);
    const double rho = u(rng);
    const auto y = exp_map(sigma, rho);
    EXPECT_LE(y.constraint_residual(), 1e-10);
    EXPECT_NEAR(distance(x, y), rho, 1e-9 * std::max(1.0, rho));
  }
}

TEST(ExpMap, LogIsInverseAtTangentLevel) {
  Rng rng(19);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int k = 0; k < 500; ++k) {
    const auto x = random_point(4, 3.0, rng);
    const auto sigma = uniform_sphere_direction(x, rng);
    const double rho = u(rng);
    const auto v = log_map(x, exp_map(sigma, rho));
    EXPECT_NEAR(v.norm(), rho, 1e-8 * std::max(1.0, rho));
    double err = 0;
    for (std::size_t i = 0; i < v.vec.size(); ++i) err = std::max(err, std::abs(v.vec[i] / std::max(rho, 1e-300) - sigma.vec[i]));
    if (rho > 1e-3) {
      EXPECT_LE(err, 1e-7 * x.time_coord());
    }
  }
}

TEST(Angle, DegenerateAndStraight) {
  const auto o = HPoint::origin(3);
  const auto p = from_polar(3, 2.0, e(3, 0));
  const auto q = from_polar(3, 1.0, e(3, 0, -1.0));
  const auto p2 = from_polar(3, 0.5, e(3, 0));
  EXPECT_NEAR(angle_at(o, p, p2), 0.0, 1e-12);
  EXPECT_NEAR(angle_at(o, p, q), std::numbers::pi, 1e-12);
  EXPECT_THROW(angle_at(o, o, p), std::invalid_argument);
}

TEST(Angle, HyperbolicLawOfCosines) {
  // cosh a = cosh b cosh c - sinh b sinh c cos A
  Rng rng(23);
  for (int k = 0; k < 2000; ++k) {
    const auto A = random_point(3, 3.0, rng);
    const auto B = random_point(3, 3.0, rng);
    const auto C = random_point(3, 3.0, rng);
    const double a = distance(B, C), b = distance(A, C), c = distance(A, B);
    if (b < 1e-3 || c < 1e-3) continue;
    const double cosA = (std::cosh(b) * std::cosh(c) - std::cosh(a)) / (std::sinh(b) * std::sinh(c));
    const double ref = std::acos(std::clamp(cosA, -1.0, 1.0));
    EXPECT_NEAR(angle_at(A, B, C), ref, 1e-6);
  }
}

TEST(TriangleDeficit, Examples) {
  const auto o = HPoint::origin(3);
  const auto b = from_polar(3, 3.0, e(3, 0));
  const auto c = from_polar(3, 2.0, e(3, 0, -1.0));
  auto straight = triangle_deficit(o, b, c);
  EXPECT_NEAR(straight.deficit, 0.0, 1e-10);
  EXPECT_NEAR(straight.bound, 0.0, 1e-12);

  const auto c90 = from_polar(3, 2.0, e(3, 1));
  auto right = triangle_deficit(o, b, c90);
  EXPECT_NEAR(right.bound, std::log(2.0), 1e-12);
  EXPECT_GE(right.deficit, 0.0);
  EXPECT_LE(right.deficit, right.bound);
}

TEST(TriangleDeficit, BoundHoldsOnRandomTriangles) {
  Rng rng(29);
  int checked = 0;
  while (checked < 100000) {
    const auto A = random_point(3, 10.0, rng);
    const auto B = random_point(3, 10.0, rng);
    const auto C = random_point(3, 10.0, rng);
    if (distance(A, B) < 1e-6 || distance(A, C) < 1e-6) continue;
    const auto t = triangle_deficit(A, B, C);
    if (t.angle < 1e-3) continue;
    ASSERT_GE(t.deficit, -1e-9);
    ASSERT_LE(t.deficit, t.bound + 1e-9 * (1 + t.deficit)) << "angle " << t.angle;
    ++checked;
  }
}

TEST(Cones, SeparationAndMembership) {
  const auto cones = cone_sets(3);
  EXPECT_NEAR(cones.min_separation(), 0.75 * std::numbers::pi, 1e-15);
  EXPECT_TRUE(cones.A.contains(std::vector<double>{std::cos(0.3), std::sin(0.3), 0}));
  EXPECT_FALSE(cones.A.contains(std::vector<double>{std::cos(0.4), std::sin(0.4), 0}));
  EXPECT_TRUE(cones.B.contains(std::vector<double>{-1, 0, 0}));
  EXPECT_THROW(cone_sets(1), std::invalid_argument);
}

TEST(Cones, PairwiseAnglesAtLeastThreeQuarterPi) {
  Rng rng(31);
  const auto cones = cone_sets(3);
  for (int k = 0; k < 10000; ++k) {
    const auto a = sample_in_cap(cones.A, rng);
    const auto b = sample_in_cap(cones.B, rng);
    ASSERT_TRUE(cones.A.contains(a));
    ASSERT_TRUE(cones.B.contains(b));
    const auto pa = from_polar(3, 1.0, a);
    const auto pb = from_polar(3, 1.0, b);
    EXPECT_GE(angle_at(HPoint::origin(3), pa, pb), 0.75 * std::numbers::pi - 1e-9);
  }
}

TEST(SphereDirection, UnitTangentAtArbitraryBase) {
  Rng rng(37);
  for (int k = 0; k < 1000; ++k) {
    const auto x = random_point(3, 3.0, rng);
    const auto s = uniform_sphere_direction(x, rng);
    EXPECT_NEAR(minkowski_product(s.vec, s.vec), 1.0, 1e-12 * x.time_coord() * x.time_coord());
    EXPECT_NEAR(minkowski_product(s.vec, x.coords()), 0.0, 1e-12 * x.time_coord() * x.time_coord());
  }
}

TEST(SphereDirection, PolarAngleHasSineDensity) {
  // d = 3: P(theta in [a, b]) = (cos a - cos b) / 2
  Rng rng(41);
  const int bins = 20;
  std::vector<std::size_t> counts(bins, 0);
  std::vector<double> probs(bins);
  for (int b = 0; b < bins; ++b) {
    const double lo = std::numbers::pi * b / bins, hi = std::numbers::pi * (b + 1) / bins;
    probs[static_cast<std::size_t>(b)] = (std::cos(lo) - std::cos(hi)) / 2;
  }
  const auto x = from_polar(3, 1.5, std::vector<double>{0, 0.6, 0.8});
  const auto ref = log_map(x, from_polar(3, 0.7, e(3, 0)));
  for (int k = 0; k < 100000; ++k) {
    const auto s = uniform_sphere_direction(x, rng);
    const double c = minkowski_product(s.vec, ref.vec) / ref.norm();
    const double theta = std::acos(std::clamp(c, -1.0, 1.0));
    ++counts[std::min<std::size_t>(bins - 1, static_cast<std::size_t>(theta / std::numbers::pi * bins))];
  }
  EXPECT_GT(stats::chi_square_test(counts, probs).p_value, 0.01);
}

TEST(Polar, RoundTrip) {
  const std::vector<double> dir{0.6, 0, 0.8};
  const auto y = from_polar(3, 2.5, dir);
  EXPECT_NEAR(y.radius(), 2.5, 1e-14);
  const auto back = polar_direction(y);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], dir[i], 1e-14);
  EXPECT_THROW(polar_direction(HPoint::origin(3)), std::invalid_argument);
}

TEST(LogCosh, StableAcrossRange) {
  EXPECT_EQ(log_cosh(0.0), 0.0);
  EXPECT_NEAR(log_cosh(1e-6), 0.5e-12, 1e-24);
  EXPECT_NEAR(log_cosh(1.0), std::log(std::cosh(1.0)), 1e-15);
  EXPECT_NEAR(log_cosh(700.0), 700.0 - std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(log_cosh(1e4)));
}
