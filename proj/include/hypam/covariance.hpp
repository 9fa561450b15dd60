#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hypam/errors.hpp"
#include "hypam/geometry.hpp"

namespace hypam {

/// Psi(rho) = log cosh(rho).
inline double psi(double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("psi: rho must be >= 0");
  return log_cosh(rho);
}

namespace detail {

constexpr int kGammaMaxIter = 10000;
constexpr double kGammaEps = 1e-16;

/// sum_{n>=0} x^n / (a (a+1) ... (a+n)); converges fast for x < a + 1.
inline double gamma_series_sum(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kGammaMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) return sum;
  }
  throw solver_error("lower_incomplete_gamma: series did not converge");
}

/// Gamma(a, x) e^{x} x^{-a} by the modified Lentz continued fraction (x >= a + 1).
inline double upper_gamma_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) return h;
  }
  throw solver_error("lower_incomplete_gamma: continued fraction did not converge");
}

}  // namespace detail

/// gamma(a, x) = int_0^x e^{-v} v^{a-1} dv.
inline double lower_incomplete_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("lower_incomplete_gamma: a must be > 0");
  if (!(x >= 0.0)) throw std::invalid_argument("lower_incomplete_gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return std::tgamma(a);
  const double log_prefactor = a * std::log(x) - x;
  if (x < a + 1.0) return std::exp(log_prefactor) * detail::gamma_series_sum(a, x);
  const double upper = std::exp(log_prefactor) * detail::upper_gamma_cf(a, x);
  return std::tgamma(a) - upper;
}

/// Phi_alpha(rho) = int_0^1 exp(-u^{1/alpha} Psi) du = alpha Psi^{-alpha} gamma(alpha, Psi).
inline double phi_alpha(double rho, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("phi_alpha: alpha must be > 0");
  if (std::isinf(rho)) return 0.0;
  const double p = psi(rho);
  if (p == 0.0) return 1.0;
  if (p < alpha + 1.0) {
    // alpha Psi^{-alpha} gamma = alpha e^{-Psi} sum_n Psi^n / (alpha ... (alpha+n))
    return alpha * std::exp(-p) * detail::gamma_series_sum(alpha, p);
  }
  return alpha * std::exp(std::log(lower_incomplete_gamma(alpha, p)) - alpha * std::log(p));
}

enum class CovarianceKind { phi_alpha, truncated_power, constant };

inline std::string to_string(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::phi_alpha: return "phi-alpha";
    case CovarianceKind::truncated_power: return "truncated-power";
    case CovarianceKind::constant: return "constant";
  }
  return "?";
}

inline CovarianceKind parse_covariance_kind(const std::string& s) {
  if (s == "phi-alpha") return CovarianceKind::phi_alpha;
  if (s == "truncated-power") return CovarianceKind::truncated_power;
  if (s == "constant") return CovarianceKind::constant;
  throw std::invalid_argument("unknown covariance kind '" + s + "'");
}

/// Radial covariance f(x, y) = F(rho(x, y)).
///   phi-alpha:       F = Phi_alpha                (positive type, F(0) = 1)
///   truncated-power: F = C / (1 + rho)^alpha      (decay envelope; no PSD claim)
///   constant:        F = c                        (analytic oracle only: does not decay)
struct CovarianceModel {
  CovarianceKind kind = CovarianceKind::phi_alpha;
  double alpha = 1.0;
  double C = 1.0;
  double c = 1.0;

  static CovarianceModel phi(double alpha) { return checked({CovarianceKind::phi_alpha, alpha, 1.0, 1.0}); }
  static CovarianceModel truncated_power(double alpha, double amplitude = 1.0) {
    return checked({CovarianceKind::truncated_power, alpha, amplitude, 1.0});
  }
  static CovarianceModel constant(double value) { return checked({CovarianceKind::constant, 0.0, 1.0, value}); }

  void validate() const {
    if (kind != CovarianceKind::constant && !(alpha > 0.0)) throw std::invalid_argument("covariance: alpha must be > 0");
    if (kind == CovarianceKind::truncated_power && !(C > 0.0)) throw std::invalid_argument("covariance: C must be > 0");
    if (kind == CovarianceKind::constant && !(c > 0.0)) throw std::invalid_argument("covariance: c must be > 0");
  }

  double profile(double rho) const {
    switch (kind) {
      case CovarianceKind::phi_alpha: return phi_alpha(rho, alpha);
      case CovarianceKind::truncated_power: return std::isinf(rho) ? 0.0 : C * std::pow(1.0 + rho, -alpha);
      case CovarianceKind::constant: return c;
    }
    return 0.0;
  }

  double sup() const {
    switch (kind) {
      case CovarianceKind::phi_alpha: return 1.0;
      case CovarianceKind::truncated_power: return C;
      case CovarianceKind::constant: return c;
    }
    return 0.0;
  }

  /// Power-law decay exponent; 0 for the constant kind.
  double decay_exponent() const { return kind == CovarianceKind::constant ? 0.0 : alpha; }

  std::string describe() const {
    std::ostringstream s;
    s << to_string(kind);
    if (kind != CovarianceKind::constant) s << " alpha=" << alpha;
    if (kind == CovarianceKind::truncated_power) s << " C=" << C;
    if (kind == CovarianceKind::constant) s << " c=" << c;
    return s.str();
  }

 private:
  static CovarianceModel checked(CovarianceModel m) {
    m.validate();
    return m;
  }
};

inline double evaluate(const CovarianceModel& model, const HPoint& x, const HPoint& y) {
  if (model.kind == CovarianceKind::constant) return model.c;
  return model.profile(distance(x, y));
}

struct PsdReport {
  double min_eigenvalue;
  double gram_trace;
};

/// Minimum eigenvalue and trace of the Gram matrix G_ij = f(x_i, x_j).
inline PsdReport psd_check(const CovarianceModel& model, std::span<const HPoint> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 1 || n > 500) throw std::invalid_argument("psd_check: need 1 <= n <= 500 points");
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gram(i, i) = evaluate(model, points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = evaluate(model, points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw solver_error("psd_check: eigensolver did not converge");
  return {solver.eigenvalues().minCoeff(), gram.trace()};
}

}  // namespace hypam
