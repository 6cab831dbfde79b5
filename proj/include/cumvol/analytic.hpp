#pragma once

#include <optional>

namespace cumvol::analytic {

/// Marker for t = infinity in ybar.
inline constexpr long kInfinite = -1;

/// log of sum_{j=0}^{t} e^{-j g}; t == kInfinite gives -log(1 - e^{-g}) and needs g > 0.
double ybar(double g, long t);

/// Leading-order Var(log Z_t): sigma_a^2 ((2 e^g + 1) / (1 - e^{2g}) + t). Needs g != 0.
double var_logZ_saddle(double g, double sigma_a, long t);

/// Leading-order volatility variance sigma_a^2 tanh(g / 2). Needs g > 0.
double var_dz_saddle(double g, double sigma_a);

/// Fixed-point width of the y-density, sqrt(sigma_a^2 / (e^{2g} - 1)). Needs g > 0.
double sigma_y_fixed_point(double g, double sigma_a);

/// One step of the narrow-width recursion for the y-density width:
/// sigma_{t+1} = sqrt(sigma_t^2 + sigma_a^2) / J, J = e^x / (e^x - 1), x = ybar(g, t + 1).
double sigma_recursion_step(double sigma_t, double sigma_a, double g, long t);

/// Iterates sigma_recursion_step from sigma_0 until successive values differ by
/// less than tol. Returns the limit.
double iterate_sigma_recursion(double g, double sigma_a, double sigma_0 = 0.0, double tol = 1e-14,
                               long max_steps = 1'000'000);

/// sqrt(tanh(g / 2)) sigma_a. Needs g > 0.
double sigma_dz_narrow(double g, double sigma_a);

/// The same width reached through the fixed point: (e^g - 1) sigma_y_fixed_point.
double sigma_dz_from_fixed_point(double g, double sigma_a);

/// log of sum_{j=0}^{t} e^{j g}, the noiseless log cumulative production.
double deterministic_log_cumulative(double g, long t);

}  // namespace cumvol::analytic
