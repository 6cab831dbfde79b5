#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cumvol {

enum class NoiseKind { gaussian, lorentzian, tabulated };

/// One-dimensional i.i.d. production noise rho_a.
///
/// Gaussian models are mean zero with standard deviation `sigma`; Lorentzian
/// models are centred Cauchy laws with half-width at half-maximum `gamma`;
/// tabulated models are piecewise-linear densities with zero extension,
/// renormalised to unit trapezoidal mass at construction. A mirrored model
/// describes -a and evaluates the base law at -x.
///
/// Instances are immutable and may be shared across threads.
class NoiseModel {
 public:
  static NoiseModel gaussian(double sigma);
  static NoiseModel lorentzian(double gamma);
  static NoiseModel tabulated(std::vector<double> xs, std::vector<double> densities);

  NoiseKind kind() const { return kind_; }
  bool mirrored() const { return mirrored_; }
  /// sigma for gaussian, gamma for lorentzian, standard deviation for tables.
  double width() const;
  /// True when the law has no finite variance.
  bool heavy_tailed() const { return kind_ == NoiseKind::lorentzian; }

  double pdf(double x) const;
  double cdf(double x) const;
  /// Survival function P(a > x), accurate in the right tail.
  double sf(double x) const;
  /// Integral of the CDF over [lo, hi].
  double cdf_integral(double lo, double hi) const;
  /// Integral of the survival function over [lo, hi].
  double sf_integral(double lo, double hi) const;
  double quantile(double p) const;
  /// x with P(a > x) = q, accurate for small q.
  double upper_quantile(double q) const;
  double median() const { return quantile(0.5); }

  std::optional<double> mean() const;
  std::optional<double> variance() const;

  NoiseModel mirror() const;

  /// `count` i.i.d. draws; identical output for identical seeds.
  std::vector<double> sample(std::size_t count, std::uint64_t seed) const;

  /// Knots of a tabulated model (after mirroring, if any). Empty otherwise.
  std::vector<double> table_x() const;
  std::vector<double> table_density() const;

  /// Compact textual form, e.g. "gaussian:sigma=1".
  std::string describe() const;

 private:
  NoiseModel() = default;

  double base_pdf(double x) const;
  double base_cdf(double x) const;
  double base_sf(double x) const;
  double base_cdf_integral(double lo, double hi) const;
  double base_sf_integral(double lo, double hi) const;
  double base_quantile(double p) const;
  double base_upper_quantile(double q) const;

  // Tabulated helpers.
  std::size_t segment_of(double x) const;
  double table_cdf_antiderivative(double x) const;
  double table_sf_antiderivative(double x) const;

  NoiseKind kind_ = NoiseKind::gaussian;
  double scale_ = 1.0;
  bool mirrored_ = false;

  std::vector<double> xs_;
  std::vector<double> fs_;
  std::vector<double> cdf_at_;    // P(a <= x_i)
  std::vector<double> sf_at_;     // P(a > x_i), accumulated from the right
  std::vector<double> cdf_int_;   // integral of the CDF from x_0 to x_i
  std::vector<double> sf_int_;    // integral of the survival from x_i to x_K
};

/// Stateful sampler drawing from a NoiseModel with its own engine.
class NoiseSampler {
 public:
  NoiseSampler(const NoiseModel& model, std::seed_seq& seeds);
  NoiseSampler(const NoiseModel& model, std::uint64_t seed);

  double operator()();

 private:
  double uniform_open();

  const NoiseModel* model_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Parses "gaussian:sigma=S", "lorentzian:gamma=G" or "table:PATH".
NoiseModel make_noise(std::string_view spec);

/// Loads a two-column (x, density) CSV; a header line is optional.
NoiseModel load_noise_table(const std::filesystem::path& path);

}  // namespace cumvol
