#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "cumvol/analytic.hpp"
#include "cumvol/evolution.hpp"
#include "cumvol/montecarlo.hpp"
#include "cumvol/parallel.hpp"

using namespace cumvol;

namespace {

// Tolerances.
constexpr double kRatioTol = 0.02;
constexpr double kFixedPointTol = 0.02;
constexpr double kIdentityTol = 1e-10;
constexpr double kLogCumulativeTarget = 0.0300;
constexpr double kLogCumulativeTol = 0.03;
constexpr double kKsTol = 0.01;
constexpr double kReversalTol = 1e-10;
constexpr double kMassTol = 1e-6;
constexpr double kMirrorTol = 1e-12;
// Runtime budgets in seconds.
constexpr double kBudget1 = 10.0;
constexpr double kBudget2 = 120.0;
constexpr double kBudget6 = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

EvolutionConfig y_config(double g, const NoiseModel& noise, long horizon) {
  EvolutionConfig c;
  c.g = g;
  c.noise = noise;
  c.horizon = horizon;
  c.grid = default_y_grid(g, noise, horizon);
  return c;
}

double steady_ratio(double g, double sigma) {
  return *steady_state_volatility(y_config(g, NoiseModel::gaussian(sigma), 20000)).ratio;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome criterion1() {
  const double r = steady_ratio(0.1, 0.05);
  return {std::abs(r - 1.0) <= kRatioTol, fmt("ratio=%.6f tol=%.2f", r, kRatioTol)};
}

Outcome criterion2() {
  const std::vector<double> sweep{0.01, 0.04, 0.16, 0.64, 1.0};
  std::vector<double> ratios(sweep.size());
  parallel_for(sweep.size(), [&](std::size_t i) { ratios[i] = steady_ratio(0.1, std::sqrt(sweep[i])); });
  const bool first = std::abs(ratios.front() - 1.0) <= kRatioTol;
  bool interior = false;
  for (std::size_t i = 1; i + 1 < ratios.size(); ++i) interior = interior || ratios[i] > 1.0;
  const bool last = ratios.back() < 1.0;
  std::string detail = "ratios=";
  for (double r : ratios) detail += fmt("%.6f ", r);
  detail += std::string("smallest~1:") + (first ? "yes" : "no") + " interior>1:" + (interior ? "yes" : "no") +
            " last<1:" + (last ? "yes" : "no");
  return {first && interior && last, detail};
}

Outcome criterion3() {
  auto c = y_config(0.2, NoiseModel::gaussian(0.05), 20000);
  c.stop_at_convergence = true;
  const auto trace = evolve_y(c);
  const double v = variance(*trace.last);
  const double target = 0.05 * 0.05 / std::expm1(0.4);
  const double rel = v / target;
  return {trace.converged && std::abs(rel - 1.0) <= kFixedPointTol,
          fmt("var=%.6e target=%.6e ratio=%.5f tol=%.2f", v, target, rel, kFixedPointTol)};
}

Outcome criterion4() {
  double worst = 0.0;
  for (double g : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    const double sigma_inf = analytic::iterate_sigma_recursion(g, 1.0);
    worst = std::max(worst, std::abs(std::expm1(g) * sigma_inf - std::sqrt(std::tanh(g / 2.0))));
  }
  return {worst <= kIdentityTol, fmt("max_abs_diff=%.3e tol=%.0e", worst, kIdentityTol)};
}

Outcome criterion5() {
  EvolutionConfig c;
  c.g = 0.2;
  c.noise = NoiseModel::gaussian(0.1);
  c.horizon = 10;
  c.grid = default_z_grid(c.g, c.noise, c.horizon);
  const double v = evolve_z(c).steps.back().summary.variance;
  const double rel = v / kLogCumulativeTarget - 1.0;
  return {std::abs(rel) <= kLogCumulativeTol,
          fmt("var=%.6f target=%.4f rel_err=%.4f tol=%.2f", v, kLogCumulativeTarget, rel, kLogCumulativeTol)};
}

Outcome ks_case(const NoiseModel& noise, const GridSpec& grid) {
  const auto start = std::chrono::steady_clock::now();
  EvolutionConfig c;
  c.g = 0.2;
  c.noise = noise;
  c.horizon = 20;
  c.grid = grid;
  c.keep_densities = true;
  const auto trace = evolve_z(c);
  const auto e = simulate(0.2, noise, 20, 100000, 20240601, {1, 5, 20});
  double worst = 0.0;
  std::string detail = noise.describe() + " ks=";
  for (long t : {1L, 5L, 20L}) {
    const double d = empirical_cdf_distance(e, t, trace.densities[static_cast<std::size_t>(t - 1)]);
    worst = std::max(worst, d);
    detail += fmt("%.4f ", d);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  detail += fmt("time=%.1fs", secs);
  return {worst < kKsTol && secs < kBudget6, detail};
}

Outcome criterion6() {
  const auto gauss = NoiseModel::gaussian(1.0);
  const Outcome a = ks_case(gauss, default_z_grid(0.2, gauss, 20));
  const Outcome b = ks_case(NoiseModel::lorentzian(1.0), GridSpec::make(0.0, 1000.0, 32768));
  return {a.pass && b.pass, a.detail + "; " + b.detail + fmt("; tol=%.2f", kKsTol)};
}

Outcome criterion7() {
  double worst = 0.0;
  std::size_t paths = 0;
  for (const auto& noise : {NoiseModel::gaussian(1.0), NoiseModel::lorentzian(1.0)}) {
    const auto r = verify_reversal_identity(0.2, noise, 30, 1000, 99);
    worst = std::max(worst, r.max_relative_error);
    paths += r.paths;
  }
  return {worst <= kReversalTol, fmt("paths=%.0f max_rel_err=%.3e tol=%.0e", static_cast<double>(paths), worst,
                                     kReversalTol)};
}

Outcome criterion8() {
  std::vector<std::string> failures;
  // Normalisation, non-negativity and support of z.
  for (const auto& noise : {NoiseModel::gaussian(1.0), NoiseModel::lorentzian(1.0)}) {
    EvolutionConfig c;
    c.g = 0.2;
    c.noise = noise;
    c.horizon = 20;
    c.grid = noise.heavy_tailed() ? GridSpec::make(0.0, 1000.0, 32768) : default_z_grid(0.2, noise, 20);
    c.keep_densities = true;
    for (const auto& p : evolve_z(c).densities) {
      if (std::abs(p.mass() - 1.0) > kMassTol) failures.push_back("mass " + noise.describe());
      for (double v : p.values()) {
        if (!(v >= 0.0)) {
          failures.push_back("negative " + noise.describe());
          break;
        }
      }
      if (p.grid().lower < 0.0 || interp_at(p, -1e-12) != 0.0) failures.push_back("z support");
    }
  }
  // Support of dz and contraction.
  for (double g : {0.1, 0.2, 0.5}) {
    for (double s : {0.05, 0.3, 1.0}) {
      const auto r = steady_state_volatility(y_config(g, NoiseModel::gaussian(s), 20000));
      const auto& dz = *r.dz_pdf;
      if (dz.grid().lower < 0.0 || interp_at(dz, 0.0 - 1e-15) != 0.0 || dz.grid().node(0) <= 0.0) {
        failures.push_back("dz support");
      }
      if (std::abs(dz.mass() - 1.0) > kMassTol) failures.push_back("dz mass");
      if (!(r.var_dz < s * s)) failures.push_back(fmt("contraction g=%.2f s=%.2f", g, s));
    }
  }
  // Mirror identity.
  const auto skewed = NoiseModel::tabulated({-0.5, 0.0, 1.5}, {0.0, 1.0, 0.0});
  double worst = 0.0;
  for (const auto& noise : {NoiseModel::gaussian(0.5), skewed}) {
    auto c = y_config(0.3, noise, 25);
    const auto y = evolve_y(c);
    c.g = -0.3;
    c.noise = noise.mirror();
    const auto z = evolve_z(c);
    for (std::size_t i = 0; i < y.last->size(); ++i) {
      worst = std::max(worst, std::abs(y.last->value(i) - z.last->value(i)));
    }
  }
  if (worst > kMirrorTol) failures.push_back("mirror");
  std::string detail = fmt("mirror_max_diff=%.2e", worst);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 saddle limit at small noise", criterion1}, {"2 ratio sweep shape", criterion2},
      {"3 fixed-point width", criterion3},           {"4 width identity", criterion4},
      {"5 log-cumulative variance", criterion5},     {"6 grid vs Monte Carlo", criterion6},
      {"7 path reversal", criterion7},               {"8 invariants", criterion8},
  };
  const double budgets[] = {kBudget1, kBudget2, 0, 0, 0, 0, 0, 0};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budgets[i] > 0.0 && secs >= budgets[i]) {
      o.pass = false;
      o.detail += fmt(" over budget %.0fs", budgets[i]);
    }
    std::printf("%s criterion %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
