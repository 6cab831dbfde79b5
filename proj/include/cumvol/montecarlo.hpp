#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cumvol/noise.hpp"
#include "cumvol/pdfgrid.hpp"

namespace cumvol {

/// Paths are generated in blocks of this size, each block with its own engine,
/// so an ensemble does not depend on how blocks are spread over threads.
inline constexpr std::size_t kPathBlock = 4096;

/// Simulated paths of z_t = log Z_t with Z_t = sum_{j<=t} e^{g j + a_1 + ... + a_j}.
struct McEnsemble {
  double g = 0.0;
  std::string noise;
  long t_max = 0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  /// Recorded times, strictly increasing, within 1..t_max.
  std::vector<long> times;
  /// z[k][path] and dz[k][path] = z_t - z_{t-1} at t = times[k].
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> dz;

  bool records(long t) const;
  const std::vector<double>& z_at(long t) const;
  const std::vector<double>& dz_at(long t) const;
};

/// Simulates n_paths paths up to t_max, keeping z_t and dz_t at `record` (every step when empty).
McEnsemble simulate(double g, const NoiseModel& noise, long t_max, std::size_t n_paths, std::uint64_t seed,
                    std::vector<long> record = {});

/// log(e^a + e^b) without overflow.
double log_add_exp(double a, double b);

struct VarianceEstimate {
  double variance = 0.0;
  double std_error = 0.0;
};

/// Sample variance of dz_t with a bootstrap standard error from `resamples` resamples.
VarianceEstimate empirical_volatility(const McEnsemble& e, long t, std::size_t resamples = 200);

/// Sample variance of an arbitrary sample with bootstrap standard error.
VarianceEstimate bootstrap_variance(std::span<const double> xs, std::uint64_t seed, std::size_t resamples = 200);

enum class Quantity { z, dz };

enum class KsMode {
  /// Compare at the grid cell edges, where the gridded CDF is exact.
  edges,
  /// Compare at every sample against the piecewise-linear gridded CDF.
  continuous,
};

/// Kolmogorov-Smirnov distance between the empirical law of z_t (or dz_t) and p.
/// Probability recorded as truncated below or above p's grid is included in the model CDF.
double empirical_cdf_distance(const McEnsemble& e, long t, const GriddedPdf& p, Quantity which = Quantity::z,
                              KsMode mode = KsMode::edges);

/// Same statistic for an arbitrary sample.
double ks_distance(std::span<const double> sample, const GriddedPdf& p, KsMode mode = KsMode::edges);

struct ReversalCheck {
  std::size_t paths = 0;
  /// Largest |Y_path / Y_reversed - 1| over all paths.
  double max_relative_error = 0.0;
};

/// For each path compares Y_t = Z_t / (Z_t - Z_{t-1}) from the simulated path with the
/// sum over the reversed, negated noise at drift -g.
ReversalCheck verify_reversal_identity(double g, const NoiseModel& noise, long t, std::size_t n_paths,
                                       std::uint64_t seed);

struct McStepStats {
  long t = 0;
  double mean_z = 0.0;
  double var_z = 0.0;
  double mean_dz = 0.0;
  double var_dz = 0.0;
};

std::vector<McStepStats> ensemble_stats(const McEnsemble& e);

}  // namespace cumvol
