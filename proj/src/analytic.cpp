#include "cumvol/analytic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cumvol/errors.hpp"

namespace cumvol::analytic {

namespace {

void require_positive_drift(double g, const char* what) {
  if (!(g > 0.0)) throw DomainError(std::string(what) + " requires g > 0");
}

void require_sigma(double sigma_a) {
  if (!(sigma_a >= 0.0) || !std::isfinite(sigma_a)) {
    throw std::invalid_argument("sigma_a must be finite and non-negative");
  }
}

}  // namespace

double ybar(double g, long t) {
  if (!std::isfinite(g)) throw std::invalid_argument("g must be finite");
  if (t == kInfinite) {
    require_positive_drift(g, "ybar at t = infinity");
    return -std::log1p(-std::exp(-g));
  }
  if (t < 0) throw std::invalid_argument("ybar needs t >= 0");
  return deterministic_log_cumulative(-g, t);
}

double deterministic_log_cumulative(double g, long t) {
  if (t < 0) throw std::invalid_argument("t must be non-negative");
  if (g == 0.0) return std::log(static_cast<double>(t) + 1.0);
  // log((e^{g (t+1)} - 1) / (e^g - 1)), arranged so no exponential overflows.
  const double n = static_cast<double>(t) + 1.0;
  if (g > 0.0) {
    return g * static_cast<double>(t) + std::log(-std::expm1(-g * n)) - std::log(-std::expm1(-g));
  }
  return std::log(-std::expm1(g * n)) - std::log(-std::expm1(g));
}

double var_logZ_saddle(double g, double sigma_a, long t) {
  require_sigma(sigma_a);
  if (g == 0.0 || !std::isfinite(g)) throw DomainError("the leading-order log Z variance is singular at g = 0");
  if (t < 0) throw std::invalid_argument("t must be non-negative");
  const double s2 = sigma_a * sigma_a;
  return s2 * ((2.0 * std::exp(g) + 1.0) / -std::expm1(2.0 * g) + static_cast<double>(t));
}

double var_dz_saddle(double g, double sigma_a) {
  require_sigma(sigma_a);
  require_positive_drift(g, "the saddle-point volatility");
  return sigma_a * sigma_a * std::tanh(g / 2.0);
}

double sigma_y_fixed_point(double g, double sigma_a) {
  require_sigma(sigma_a);
  require_positive_drift(g, "the y fixed point");
  return sigma_a / std::sqrt(std::expm1(2.0 * g));
}

double sigma_recursion_step(double sigma_t, double sigma_a, double g, long t) {
  require_sigma(sigma_a);
  if (!(sigma_t >= 0.0)) throw std::invalid_argument("sigma_t must be non-negative");
  require_positive_drift(g, "the width recursion");
  if (t < 0) throw std::invalid_argument("t must be non-negative");
  const double x = ybar(g, t + 1);
  // 1 / J = (e^x - 1) / e^x = -expm1(-x).
  return std::hypot(sigma_t, sigma_a) * -std::expm1(-x);
}

double iterate_sigma_recursion(double g, double sigma_a, double sigma_0, double tol, long max_steps) {
  double s = sigma_0;
  for (long t = 0; t < max_steps; ++t) {
    const double next = sigma_recursion_step(s, sigma_a, g, t);
    if (std::abs(next - s) <= tol * std::max(1.0, next)) return next;
    s = next;
  }
  throw ConvergenceError("width recursion did not settle within " + std::to_string(max_steps) + " steps");
}

double sigma_dz_narrow(double g, double sigma_a) { return std::sqrt(var_dz_saddle(g, sigma_a)); }

double sigma_dz_from_fixed_point(double g, double sigma_a) {
  return std::expm1(g) * sigma_y_fixed_point(g, sigma_a);
}

}  // namespace cumvol::analytic
