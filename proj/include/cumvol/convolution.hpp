#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cumvol/noise.hpp"
#include "cumvol/pdfgrid.hpp"

namespace cumvol {

/// Linear convolution of real sequences against a fixed kernel.
///
/// The kernel spectrum is computed once; each call costs one forward and one
/// inverse real FFT of the padded length. Not safe for concurrent calls on the
/// same instance.
class RealConvolver {
 public:
  RealConvolver(std::vector<double> kernel, std::size_t signal_length);
  ~RealConvolver();
  RealConvolver(const RealConvolver&) = delete;
  RealConvolver& operator=(const RealConvolver&) = delete;

  std::size_t signal_length() const { return signal_length_; }
  std::size_t kernel_length() const { return kernel_length_; }
  std::size_t output_length() const { return signal_length_ + kernel_length_ - 1; }

  /// Full linear convolution, length signal_length + kernel_length - 1.
  std::vector<double> apply(std::span<const double> signal) const;

 private:
  struct Plans;
  std::size_t signal_length_;
  std::size_t kernel_length_;
  std::size_t padded_;
  std::unique_ptr<Plans> plans_;
};

/// Direct O(n m) linear convolution.
std::vector<double> convolve_direct(std::span<const double> signal, std::span<const double> kernel);

/// Smallest length >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t fft_friendly_size(std::size_t n);

enum class ConvolutionMethod { automatic, direct, fft };

/// Distribution of a + x on a lattice aligned with a source grid.
///
/// The source is a set of cell masses m_j on cells [lower + j h, lower + (j+1) h],
/// each spread uniformly over its cell. The result holds the masses of a + x on
/// the lattice cells [lower + (first + i) h, lower + (first + i + 1) h] for
/// i < lattice_cells, together with the exact mass below and above the lattice.
/// All noise-dependent quantities are cached, so repeated calls with different
/// sources are cheap.
class MassConvolver {
 public:
  MassConvolver(const NoiseModel& noise, double step, std::size_t source_cells,
                long first, std::size_t lattice_cells,
                ConvolutionMethod method = ConvolutionMethod::automatic);
  ~MassConvolver();
  MassConvolver(MassConvolver&&) noexcept;
  MassConvolver& operator=(MassConvolver&&) noexcept;

  struct Result {
    std::vector<double> masses;
    double below = 0.0;
    double above = 0.0;
  };

  Result apply(std::span<const double> source_masses) const;

  long first() const { return first_; }
  std::size_t lattice_cells() const { return lattice_cells_; }
  std::size_t source_cells() const { return source_cells_; }

 private:
  std::size_t source_cells_;
  long first_;
  std::size_t lattice_cells_;
  std::vector<double> kernel_;
  std::vector<double> below_weights_;
  std::vector<double> above_weights_;
  std::unique_ptr<RealConvolver> fft_;
};

/// P(a + U in [r h, (r+1) h]) for U uniform on [0, h], clamped at zero.
double uniform_smoothed_mass(const NoiseModel& noise, double step, long r);
/// P(a + U <= d) for U uniform on [0, h].
double uniform_smoothed_cdf(const NoiseModel& noise, double step, double d);
/// P(a + U > d) for U uniform on [0, h].
double uniform_smoothed_sf(const NoiseModel& noise, double step, double d);

struct ConvolveOptions {
  /// Noise mass allowed outside the widened output grid.
  double tail_tol = 1e-8;
  /// Cap on cells added on each side; binds only for heavy tails.
  std::size_t max_extra_cells = 1 << 16;
  ConvolutionMethod method = ConvolutionMethod::automatic;
};

/// Density of a + x for x ~ p, on a grid of the same step widened on both sides.
/// Mass that still falls outside is added to the truncation record.
GriddedPdf convolve(const GriddedPdf& p, const NoiseModel& noise, const ConvolveOptions& options = {});

}  // namespace cumvol
