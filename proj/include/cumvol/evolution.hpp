#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cumvol/convolution.hpp"
#include "cumvol/noise.hpp"
#include "cumvol/pdfgrid.hpp"

namespace cumvol {

/// Largest per-step probability loss tolerated for finite-variance noise.
inline constexpr double kMaxStepLoss = 1e-3;

struct EvolutionConfig {
  double g = 0.0;
  NoiseModel noise = NoiseModel::gaussian(1.0);
  GridSpec grid;
  long horizon = 1;
  double convergence_tol = 1e-8;
  /// Stop as soon as the step distance drops below convergence_tol.
  bool stop_at_convergence = false;
  /// Keep every step's density in the trace.
  bool keep_densities = false;
  ConvolutionMethod method = ConvolutionMethod::automatic;

  void validate() const;
};

struct StepRecord {
  long t = 0;
  DensitySummary summary;
  double truncated_below = 0.0;
  double truncated_above = 0.0;
  /// Fraction of the previous in-domain mass lost at this step.
  double step_loss = 0.0;
  /// Distance to the previous step's density; NaN at t = 1.
  double distance = 0.0;
};

struct EvolutionTrace {
  std::vector<StepRecord> steps;
  /// Densities for t = 1, 2, ... when keep_densities is set.
  std::vector<GriddedPdf> densities;
  std::optional<GriddedPdf> last;
  bool converged = false;
  long converged_at = 0;
};

using StepObserver = std::function<void(long t, const GriddedPdf&)>;

/// Edges of the z-grid pulled back through the recursion: u_k = log(e^{e_k} - 1) - g.
/// u_0 is -infinity when the grid starts at 0.
std::vector<double> warp_preimages(const GridSpec& grid, double g);

/// One step of the z recursion on a fixed grid, with all noise-dependent work cached.
///
/// The output is built from cell masses: each output cell [e_k, e_{k+1}] receives
/// P(a + z in [u_k, u_{k+1}]), where z is spread uniformly inside its input cell.
/// This integrates the singular 1 / (1 - e^{-x}) factor exactly, so the
/// mass piled up near x = 0 by heavy-tailed noise is retained.
class WarpOperator {
 public:
  WarpOperator(const NoiseModel& noise, double g, const GridSpec& grid,
               ConvolutionMethod method = ConvolutionMethod::automatic);

  /// rho_{z_{t+1}} from rho_{z_t}; p must live on grid().
  GriddedPdf apply(const GriddedPdf& p) const;
  /// rho_{z_1} from the point mass at z_0 = 0.
  GriddedPdf first_step() const;

  const GridSpec& grid() const { return grid_; }
  double g() const { return g_; }

 private:
  GriddedPdf finish(std::vector<double> edge_cdf, const GriddedPdf* previous) const;

  NoiseModel noise_;
  double g_;
  GridSpec grid_;
  std::vector<double> preimages_;
  double lattice_start_ = 0.0;
  MassConvolver convolver_;
};

GriddedPdf warp_step(const GriddedPdf& p, const NoiseModel& noise, double g);
GriddedPdf init_first_step(const NoiseModel& noise, double g, const GridSpec& grid);

/// Node-wise evaluation: convolve, interpolate at the warped node and multiply by
/// 1 / (1 - e^{-x}). Loses the mass of the singular layer at x = 0; kept as a
/// reference discretisation.
GriddedPdf pointwise_warp(const GriddedPdf& p, const NoiseModel& noise, double g);

/// Runs the z recursion from z_0 = 0. Convergence is measured on mean-centred densities.
EvolutionTrace evolve_z(const EvolutionConfig& config, const StepObserver& observer = {});

/// Runs the y recursion: evolve_z with g -> -g and mirrored noise, converging on raw L1.
EvolutionTrace evolve_y(const EvolutionConfig& config, const StepObserver& observer = {});

/// -log(1 - e^{-x}); an involution on (0, inf).
double psi(double x);

/// Density of dz = psi(y) for y ~ p_y, on dz_grid or on default_dz_grid(p_y).
GriddedPdf volatility_pdf(const GriddedPdf& p_y, std::optional<GridSpec> dz_grid = std::nullopt);

inline constexpr std::size_t kDefaultCells = 8192;

/// [0, center + spread] sized from the noiseless path and the analytic spread.
GridSpec default_z_grid(double g, const NoiseModel& noise, long horizon, std::size_t cells = kDefaultCells);
GridSpec default_y_grid(double g, const NoiseModel& noise, long horizon, std::size_t cells = kDefaultCells);
/// [0, D] with D = psi of the 1e-9 quantile of p_y, capped at 60.
GridSpec default_dz_grid(const GriddedPdf& p_y, std::size_t cells = kDefaultCells);

struct VolatilityReport {
  double g = 0.0;
  std::string noise;
  long steps = 0;
  long converged_at = 0;
  double final_distance = 0.0;
  DensitySummary y;
  DensitySummary dz;
  double var_dz = 0.0;
  double iqr = 0.0;
  double central90 = 0.0;
  std::optional<double> saddle_var;
  std::optional<double> ratio;
  double truncated_mass = 0.0;
  /// False for heavy-tailed noise, where the second moment depends on the domain.
  bool second_moment_reliable = true;
  std::optional<GriddedPdf> y_pdf;
  std::optional<GriddedPdf> dz_pdf;
};

/// Summarises the volatility density of the last y-density in a finished trace.
VolatilityReport make_volatility_report(const EvolutionConfig& config, const EvolutionTrace& y_trace,
                                        std::optional<GridSpec> dz_grid = std::nullopt);

/// Runs the y recursion to its fixed point and summarises the volatility density.
VolatilityReport steady_state_volatility(const EvolutionConfig& config,
                                         std::optional<GridSpec> dz_grid = std::nullopt);

}  // namespace cumvol
