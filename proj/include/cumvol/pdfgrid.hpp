#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cumvol/noise.hpp"

namespace cumvol {

/// Uniform cell-centred grid on [lower, upper].
///
/// The domain is split into `cells` cells of width h = (upper - lower) / cells;
/// node i sits at the centre of cell i, so no node ever lies on a domain edge.
struct GridSpec {
  double lower = 0.0;
  double upper = 1.0;
  std::size_t cells = 16;

  static constexpr std::size_t kMinCells = 16;

  /// Validating constructor.
  static GridSpec make(double lower, double upper, std::size_t cells);

  double step() const { return (upper - lower) / static_cast<double>(cells); }
  double node(std::size_t i) const { return lower + (static_cast<double>(i) + 0.5) * step(); }
  double edge(std::size_t i) const { return lower + static_cast<double>(i) * step(); }

  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Probability density tabulated as cell averages on a GridSpec.
///
/// Integrals use the cell (midpoint) rule, which is the exact integral of the
/// piecewise-linear interpolant used by interp_at. `truncated_below` and
/// `truncated_above` record probability that lies outside the domain; the
/// tabulated values describe the density conditional on being inside.
class GriddedPdf {
 public:
  GriddedPdf(GridSpec grid, std::vector<double> values, double truncated_below = 0.0,
             double truncated_above = 0.0);

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double value(std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  double truncated_below() const { return truncated_below_; }
  double truncated_above() const { return truncated_above_; }
  double truncated_mass() const { return truncated_below_ + truncated_above_; }

  /// Integral of the tabulated values.
  double mass() const;
  /// Copy scaled to unit mass. Idempotent up to rounding.
  GriddedPdf normalized() const;
  /// Probability mass of each cell (value * h).
  std::vector<double> cell_masses() const;
  /// Cumulative masses at the cell edges, size cells + 1, normalised to end at 1.
  std::vector<double> cdf_at_edges() const;

 private:
  GridSpec grid_;
  std::vector<double> values_;
  double truncated_below_;
  double truncated_above_;
};

/// Samples `f` at the nodes and normalises. No tail mass is recorded.
GriddedPdf from_function(const GridSpec& grid, const std::function<double(double)>& f);

/// Samples the noise density at the nodes and records the closed-form tail
/// mass outside the domain.
GriddedPdf from_noise(const GridSpec& grid, const NoiseModel& noise);

/// Linear interpolation between nodes, constant across the two outer half
/// cells and zero outside [lower, upper].
double interp_at(const GriddedPdf& p, double x);

/// Raw moment E[x^order] for order in 1..4.
double moment(const GriddedPdf& p, int order);
/// Central moment E[(x - mean)^order] for order in 2..4, computed two-pass.
double central_moment(const GriddedPdf& p, int order);
double mean(const GriddedPdf& p);
double variance(const GriddedPdf& p);

/// Inverse of the piecewise-linear edge CDF; every prob must lie in (0, 1).
std::vector<double> quantiles(const GriddedPdf& p, std::span<const double> probs);
double quantile(const GriddedPdf& p, double prob);

enum class Metric { L1, KS };

/// L1 distance of the densities or maximum CDF difference; grids must match.
double distance(const GriddedPdf& p, const GriddedPdf& q, Metric metric);

/// L1 distance after shifting both densities to zero mean.
double centered_l1_distance(const GriddedPdf& p, const GriddedPdf& q);

struct DensitySummary {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::vector<double> probs;
  std::vector<double> quantiles;
  double truncated_mass = 0.0;
};

/// Default quantile levels used in summaries.
std::span<const double> summary_probs();

DensitySummary summarize(const GriddedPdf& p);

}  // namespace cumvol
