#include "cumvol/evolution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cumvol/analytic.hpp"
#include "cumvol/errors.hpp"

namespace cumvol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(e^x - 1) for x > 0.
double phi(double x) {
  return x + (x > std::numbers::ln2 ? std::log1p(-std::exp(-x)) : std::log(-std::expm1(-x)));
}

// Below this probability the lower tail of a + z is ignored for light-tailed noise.
constexpr double kNegligible = 1e-17;

void check_step_loss(const NoiseModel& noise, const GridSpec& grid, double below, double above) {
  if (noise.heavy_tailed()) return;
  const double loss = below + above;
  if (loss > kMaxStepLoss) {
    std::ostringstream msg;
    msg << "mass defect " << loss << " exceeds " << kMaxStepLoss << " on grid [" << grid.lower << ", "
        << grid.upper << "] (" << below << " below, " << above << " above); widen or refine the grid";
    throw NumericalError(msg.str());
  }
}

// Builds the output density from the normalised CDF of the pre-image at each edge.
GriddedPdf masses_to_pdf(const NoiseModel& noise, const GridSpec& grid, const std::vector<double>& edge_cdf,
                         const GriddedPdf* previous) {
  const std::size_t n = grid.cells;
  const double h = grid.step();
  std::vector<double> values(n);
  double kept = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    values[k] = std::max(edge_cdf[k + 1] - edge_cdf[k], 0.0);
    kept += values[k];
  }
  const double below = std::max(edge_cdf.front(), 0.0);
  const double above = std::max(1.0 - edge_cdf.back(), 0.0);
  check_step_loss(noise, grid, below, above);
  if (!(kept > 0.0)) throw NumericalError("no probability mass left on the grid");
  for (double& v : values) v /= kept * h;

  const double tb = previous ? previous->truncated_below() : 0.0;
  const double ta = previous ? previous->truncated_above() : 0.0;
  const double inside = 1.0 - tb - ta;
  return GriddedPdf(grid, std::move(values), tb + inside * below, ta + inside * above);
}

}  // namespace

void EvolutionConfig::validate() const {
  if (!std::isfinite(g)) throw std::invalid_argument("g must be finite");
  grid.validate();
  if (grid.lower < 0.0) throw std::invalid_argument("the grid must start at or above 0");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("convergence tolerance must be positive");
}

std::vector<double> warp_preimages(const GridSpec& grid, double g) {
  grid.validate();
  if (grid.lower < 0.0) throw std::invalid_argument("the grid must start at or above 0");
  std::vector<double> u(grid.cells + 1);
  for (std::size_t k = 0; k <= grid.cells; ++k) {
    const double e = grid.edge(k);
    u[k] = e > 0.0 ? phi(e) - g : -kInf;
  }
  return u;
}

WarpOperator::WarpOperator(const NoiseModel& noise, double g, const GridSpec& grid, ConvolutionMethod method)
    : noise_(noise), g_(g), grid_(grid), preimages_(warp_preimages(grid, g)), convolver_([&] {
        const double h = grid.step();
        double start = std::isfinite(preimages_.front()) ? preimages_.front() : preimages_[1];
        if (!noise.heavy_tailed()) start = std::max(start, grid.lower + noise.quantile(kNegligible) - h);
        const auto first = static_cast<long>(std::floor((start - grid.lower) / h));
        lattice_start_ = grid.lower + static_cast<double>(first) * h;
        const double span = (preimages_.back() - lattice_start_) / h;
        const auto cells = static_cast<std::size_t>(std::max(0.0, std::floor(span))) + 2;
        return MassConvolver(noise, h, grid.cells, first, cells, method);
      }()) {
  if (!std::isfinite(g)) throw std::invalid_argument("g must be finite");
}

GriddedPdf WarpOperator::first_step() const {
  std::vector<double> c(preimages_.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = std::isfinite(preimages_[k]) ? noise_.cdf(preimages_[k]) : 0.0;
  return finish(std::move(c), nullptr);
}

GriddedPdf WarpOperator::apply(const GriddedPdf& p) const {
  if (!(p.grid() == grid_)) throw std::invalid_argument("density is not on the operator's grid");
  std::vector<double> masses(p.values().begin(), p.values().end());
  const double sum = std::accumulate(masses.begin(), masses.end(), 0.0);
  for (double& m : masses) m /= sum;

  const MassConvolver::Result r = convolver_.apply(masses);
  std::vector<double> lattice_cdf(r.masses.size() + 1);
  lattice_cdf[0] = r.below;
  for (std::size_t i = 0; i < r.masses.size(); ++i) lattice_cdf[i + 1] = lattice_cdf[i] + r.masses[i];
  const double total = lattice_cdf.back() + r.above;
  if (std::abs(total - 1.0) > kMaxStepLoss) {
    throw NumericalError("convolution lost " + std::to_string(1.0 - total) + " of its mass");
  }

  const double h = grid_.step();
  const double cells = static_cast<double>(r.masses.size());
  std::vector<double> c(preimages_.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double pos = (preimages_[k] - lattice_start_) / h;
    double value;
    if (!(pos >= 0.0)) {
      value = 0.0;
    } else if (pos >= cells) {
      value = lattice_cdf.back();
    } else {
      const auto i = static_cast<std::size_t>(pos);
      const double t = pos - static_cast<double>(i);
      value = lattice_cdf[i] + t * (lattice_cdf[i + 1] - lattice_cdf[i]);
    }
    c[k] = value / total;
  }
  return finish(std::move(c), &p);
}

GriddedPdf WarpOperator::finish(std::vector<double> edge_cdf, const GriddedPdf* previous) const {
  return masses_to_pdf(noise_, grid_, edge_cdf, previous);
}

GriddedPdf warp_step(const GriddedPdf& p, const NoiseModel& noise, double g) {
  return WarpOperator(noise, g, p.grid()).apply(p);
}

GriddedPdf init_first_step(const NoiseModel& noise, double g, const GridSpec& grid) {
  const std::vector<double> u = warp_preimages(grid, g);
  std::vector<double> c(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) c[k] = std::isfinite(u[k]) ? noise.cdf(u[k]) : 0.0;
  return masses_to_pdf(noise, grid, c, nullptr);
}

GriddedPdf pointwise_warp(const GriddedPdf& p, const NoiseModel& noise, double g) {
  const GridSpec& grid = p.grid();
  if (grid.lower < 0.0) throw std::invalid_argument("the grid must start at or above 0");
  const GriddedPdf c = convolve(p, noise);
  std::vector<double> values(grid.cells);
  for (std::size_t k = 0; k < grid.cells; ++k) {
    const double x = grid.node(k);
    values[k] = interp_at(c, phi(x) - g) / -std::expm1(-x);
  }
  GriddedPdf raw(grid, std::move(values), p.truncated_below(), p.truncated_above());
  if (!(raw.mass() > 0.0)) throw NumericalError("no probability mass left on the grid");
  return raw.normalized();
}

namespace {

EvolutionTrace run_recursion(const EvolutionConfig& config, bool centered, const StepObserver& observer) {
  config.validate();
  const WarpOperator op(config.noise, config.g, config.grid, config.method);
  EvolutionTrace trace;
  std::optional<GriddedPdf> prev;
  for (long t = 1; t <= config.horizon; ++t) {
    GriddedPdf cur = prev ? op.apply(*prev) : op.first_step();
    StepRecord rec;
    rec.t = t;
    rec.summary = summarize(cur);
    rec.truncated_below = cur.truncated_below();
    rec.truncated_above = cur.truncated_above();
    if (prev) {
      rec.step_loss = 1.0 - (1.0 - cur.truncated_mass()) / (1.0 - prev->truncated_mass());
      rec.distance = centered ? centered_l1_distance(*prev, cur) : distance(*prev, cur, Metric::L1);
    } else {
      rec.step_loss = cur.truncated_mass();
      rec.distance = std::numeric_limits<double>::quiet_NaN();
    }
    trace.steps.push_back(rec);
    if (observer) observer(t, cur);
    if (config.keep_densities) trace.densities.push_back(cur);
    const bool settled = prev && rec.distance < config.convergence_tol;
    prev = std::move(cur);
    if (settled && !trace.converged) {
      trace.converged = true;
      trace.converged_at = t;
      if (config.stop_at_convergence) break;
    }
  }
  trace.last = std::move(prev);
  return trace;
}

}  // namespace

EvolutionTrace evolve_z(const EvolutionConfig& config, const StepObserver& observer) {
  return run_recursion(config, true, observer);
}

EvolutionTrace evolve_y(const EvolutionConfig& config, const StepObserver& observer) {
  EvolutionConfig mirrored = config;
  mirrored.g = -config.g;
  mirrored.noise = config.noise.mirror();
  return run_recursion(mirrored, false, observer);
}

double psi(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("psi is defined for x >= 0");
  if (x == 0.0) return kInf;
  return x > std::numbers::ln2 ? -std::log1p(-std::exp(-x)) : -std::log(-std::expm1(-x));
}

GriddedPdf volatility_pdf(const GriddedPdf& p_y, std::optional<GridSpec> dz_grid) {
  const GridSpec& yg = p_y.grid();
  if (yg.lower < 0.0) throw std::invalid_argument("the y-grid must start at or above 0");
  const GridSpec grid = dz_grid ? *dz_grid : default_dz_grid(p_y);
  grid.validate();
  if (grid.lower < 0.0) throw std::invalid_argument("the volatility grid must start at or above 0");

  const std::vector<double> ycdf = p_y.cdf_at_edges();
  const double tb = p_y.truncated_below();
  const double inside = 1.0 - p_y.truncated_mass();
  const double hy = yg.step();
  // P(y <= v) including the mass recorded outside the y-grid.
  auto y_cdf = [&](double v) {
    if (v == kInf) return 1.0;
    if (v <= yg.lower) return tb;
    if (v >= yg.upper) return tb + inside;
    const double pos = (v - yg.lower) / hy;
    const auto i = std::min(static_cast<std::size_t>(pos), yg.cells - 1);
    const double t = pos - static_cast<double>(i);
    return tb + inside * (ycdf[i] + t * (ycdf[i + 1] - ycdf[i]));
  };

  // dz <= d  <=>  y >= psi(d), since psi is decreasing.
  std::vector<double> dz_cdf(grid.cells + 1);
  for (std::size_t k = 0; k <= grid.cells; ++k) dz_cdf[k] = 1.0 - y_cdf(psi(grid.edge(k)));

  const double h = grid.step();
  std::vector<double> values(grid.cells);
  double kept = 0.0;
  for (std::size_t k = 0; k < grid.cells; ++k) {
    values[k] = std::max(dz_cdf[k + 1] - dz_cdf[k], 0.0);
    kept += values[k];
  }
  const double below = std::max(dz_cdf.front(), 0.0);
  const double above = std::max(1.0 - dz_cdf.back(), 0.0);
  if (below + above > kMaxStepLoss) {
    std::ostringstream msg;
    msg << "volatility transform lost " << below + above << " of its mass on [" << grid.lower << ", "
        << grid.upper << "]";
    throw NumericalError(msg.str());
  }
  if (!(kept > 0.0)) throw NumericalError("no volatility mass on the grid");
  for (double& v : values) v /= kept * h;
  return GriddedPdf(grid, std::move(values), below, above);
}

GridSpec default_z_grid(double g, const NoiseModel& noise, long horizon, std::size_t cells) {
  if (!std::isfinite(g)) throw std::invalid_argument("g must be finite");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  const double s = noise.width();
  const double steps = static_cast<double>(horizon) + 1.0;
  const double g_eff = g + noise.mean().value_or(0.0);
  const double center = analytic::deterministic_log_cumulative(g_eff, horizon);
  double spread;
  if (noise.heavy_tailed()) {
    spread = 12.0 * s * steps;
  } else if (g_eff >= 0.0) {
    spread = 12.0 * s * std::sqrt(steps);
  } else {
    // The stationary upper tail decays like exp(-2 |g| x / s^2).
    const double a = std::abs(g_eff);
    const double stationary = std::max(12.0 * s / std::sqrt(std::expm1(2.0 * a)), 23.0 * s * s / (2.0 * a));
    spread = std::min(12.0 * s * std::sqrt(steps), stationary);
  }
  double upper = center + spread;
  upper += 10.0 * upper / static_cast<double>(cells);
  return GridSpec::make(0.0, upper, cells);
}

GridSpec default_y_grid(double g, const NoiseModel& noise, long horizon, std::size_t cells) {
  return default_z_grid(-g, noise.mirror(), horizon, cells);
}

GridSpec default_dz_grid(const GriddedPdf& p_y, std::size_t cells) {
  constexpr double kCap = 60.0;
  const double q = quantile(p_y, 1e-9);
  const double upper = q > 0.0 ? std::min(psi(q), kCap) : kCap;
  return GridSpec::make(0.0, upper, cells);
}

VolatilityReport steady_state_volatility(const EvolutionConfig& config, std::optional<GridSpec> dz_grid) {
  if (!(config.g > 0.0)) throw DomainError("steady-state volatility requires g > 0");
  EvolutionConfig c = config;
  c.stop_at_convergence = true;
  c.keep_densities = false;
  EvolutionTrace trace = evolve_y(c);
  if (!trace.converged) {
    std::ostringstream msg;
    msg << "y-density did not converge to " << c.convergence_tol << " within " << c.horizon
        << " steps (last distance " << trace.steps.back().distance << ")";
    throw ConvergenceError(msg.str());
  }
  return make_volatility_report(config, trace, dz_grid);
}

VolatilityReport make_volatility_report(const EvolutionConfig& config, const EvolutionTrace& trace,
                                        std::optional<GridSpec> dz_grid) {
  if (!trace.last) throw std::invalid_argument("trace holds no density");
  const GriddedPdf& y = *trace.last;
  GriddedPdf dz = volatility_pdf(y, dz_grid);

  VolatilityReport r;
  r.g = config.g;
  r.noise = config.noise.describe();
  r.steps = static_cast<long>(trace.steps.size());
  r.converged_at = trace.converged_at;
  r.final_distance = trace.steps.back().distance;
  r.y = summarize(y);
  r.dz = summarize(dz);
  r.var_dz = r.dz.variance;
  const std::array<double, 4> probs{0.05, 0.25, 0.75, 0.95};
  const auto q = quantiles(dz, probs);
  r.iqr = q[2] - q[1];
  r.central90 = q[3] - q[0];
  if (const auto var_a = config.noise.variance(); var_a && config.g > 0.0) {
    r.saddle_var = analytic::var_dz_saddle(config.g, std::sqrt(*var_a));
    r.ratio = r.var_dz / *r.saddle_var;
  }
  r.truncated_mass = y.truncated_mass() + dz.truncated_mass();
  r.second_moment_reliable = !config.noise.heavy_tailed();
  r.y_pdf = y;
  r.dz_pdf = std::move(dz);
  return r;
}

}  // namespace cumvol
