#include "cumvol/convolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace cumvol {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

}  // namespace

struct RealConvolver::Plans {
  FftwBuffer<double> real;
  FftwBuffer<fftw_complex> spectrum;
  std::vector<std::complex<double>> kernel_spectrum;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

std::size_t fft_friendly_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2u, 3u, 5u, 7u}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

RealConvolver::RealConvolver(std::vector<double> kernel, std::size_t signal_length)
    : signal_length_(signal_length), kernel_length_(kernel.size()) {
  if (signal_length_ == 0 || kernel_length_ == 0) {
    throw std::invalid_argument("convolution needs non-empty signal and kernel");
  }
  padded_ = fft_friendly_size(output_length());
  const std::size_t bins = padded_ / 2 + 1;
  plans_ = std::make_unique<Plans>();
  plans_->real.reset(static_cast<double*>(fftw_malloc(sizeof(double) * padded_)));
  plans_->spectrum.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  if (!plans_->real || !plans_->spectrum) throw std::bad_alloc();
  {
    std::lock_guard lock(planner_mutex());
    const int n = static_cast<int>(padded_);
    plans_->forward = fftw_plan_dft_r2c_1d(n, plans_->real.get(), plans_->spectrum.get(), FFTW_ESTIMATE);
    plans_->inverse = fftw_plan_dft_c2r_1d(n, plans_->spectrum.get(), plans_->real.get(), FFTW_ESTIMATE);
  }
  if (!plans_->forward || !plans_->inverse) throw std::runtime_error("FFTW planning failed");

  double* buf = plans_->real.get();
  std::fill(buf, buf + padded_, 0.0);
  std::copy(kernel.begin(), kernel.end(), buf);
  fftw_execute(plans_->forward);
  plans_->kernel_spectrum.resize(bins);
  const double scale = 1.0 / static_cast<double>(padded_);
  for (std::size_t k = 0; k < bins; ++k) {
    plans_->kernel_spectrum[k] = std::complex<double>(plans_->spectrum[k][0], plans_->spectrum[k][1]) * scale;
  }
}

RealConvolver::~RealConvolver() = default;

std::vector<double> RealConvolver::apply(std::span<const double> signal) const {
  if (signal.size() != signal_length_) throw std::invalid_argument("signal length mismatch");
  double* buf = plans_->real.get();
  std::copy(signal.begin(), signal.end(), buf);
  std::fill(buf + signal_length_, buf + padded_, 0.0);
  fftw_execute(plans_->forward);
  fftw_complex* spec = plans_->spectrum.get();
  for (std::size_t k = 0; k < plans_->kernel_spectrum.size(); ++k) {
    const std::complex<double> v = std::complex<double>(spec[k][0], spec[k][1]) * plans_->kernel_spectrum[k];
    spec[k][0] = v.real();
    spec[k][1] = v.imag();
  }
  fftw_execute(plans_->inverse);
  return std::vector<double>(buf, buf + output_length());
}

std::vector<double> convolve_direct(std::span<const double> signal, std::span<const double> kernel) {
  if (signal.empty() || kernel.empty()) throw std::invalid_argument("convolution needs non-empty inputs");
  std::vector<double> out(signal.size() + kernel.size() - 1, 0.0);
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const double s = signal[i];
    if (s == 0.0) continue;
    for (std::size_t k = 0; k < kernel.size(); ++k) out[i + k] += s * kernel[k];
  }
  return out;
}

double uniform_smoothed_cdf(const NoiseModel& noise, double step, double d) {
  return noise.cdf_integral(d - step, d) / step;
}

double uniform_smoothed_sf(const NoiseModel& noise, double step, double d) {
  return noise.sf_integral(d - step, d) / step;
}

double uniform_smoothed_mass(const NoiseModel& noise, double step, long r) {
  const double lo = static_cast<double>(r) * step;
  const double hi = lo + step;
  // Differences of whichever tail is small keep relative accuracy far out.
  const double m = lo >= noise.median()
                       ? uniform_smoothed_sf(noise, step, lo) - uniform_smoothed_sf(noise, step, hi)
                       : uniform_smoothed_cdf(noise, step, hi) - uniform_smoothed_cdf(noise, step, lo);
  return std::max(m, 0.0);
}

MassConvolver::MassConvolver(const NoiseModel& noise, double step, std::size_t source_cells,
                             long first, std::size_t lattice_cells, ConvolutionMethod method)
    : source_cells_(source_cells), first_(first), lattice_cells_(lattice_cells) {
  if (!(step > 0.0) || source_cells == 0 || lattice_cells == 0) {
    throw std::invalid_argument("mass convolver needs a positive step and non-empty grids");
  }
  const long n = static_cast<long>(source_cells);
  const long m = static_cast<long>(lattice_cells);
  // Lattice cell i receives source cell j through offset r = first + i - j.
  const long r_min = first - n + 1;
  kernel_.resize(static_cast<std::size_t>(n + m - 1));
  for (long k = 0; k < n + m - 1; ++k) {
    kernel_[static_cast<std::size_t>(k)] = uniform_smoothed_mass(noise, step, r_min + k);
  }
  below_weights_.resize(source_cells);
  above_weights_.resize(source_cells);
  for (long j = 0; j < n; ++j) {
    below_weights_[static_cast<std::size_t>(j)] =
        uniform_smoothed_cdf(noise, step, static_cast<double>(first - j) * step);
    above_weights_[static_cast<std::size_t>(j)] =
        uniform_smoothed_sf(noise, step, static_cast<double>(first + m - j) * step);
  }
  if (method == ConvolutionMethod::automatic) {
    method = source_cells * kernel_.size() > 65536 ? ConvolutionMethod::fft : ConvolutionMethod::direct;
  }
  if (method == ConvolutionMethod::fft) fft_ = std::make_unique<RealConvolver>(kernel_, source_cells);
}

MassConvolver::~MassConvolver() = default;
MassConvolver::MassConvolver(MassConvolver&&) noexcept = default;
MassConvolver& MassConvolver::operator=(MassConvolver&&) noexcept = default;

MassConvolver::Result MassConvolver::apply(std::span<const double> source_masses) const {
  if (source_masses.size() != source_cells_) throw std::invalid_argument("source length mismatch");
  const std::vector<double> full = fft_ ? fft_->apply(source_masses) : convolve_direct(source_masses, kernel_);
  Result r;
  const auto offset = static_cast<std::ptrdiff_t>(source_cells_ - 1);
  r.masses.assign(full.begin() + offset, full.begin() + offset + static_cast<std::ptrdiff_t>(lattice_cells_));
  for (double& v : r.masses) v = std::max(v, 0.0);
  r.below = std::inner_product(source_masses.begin(), source_masses.end(), below_weights_.begin(), 0.0);
  r.above = std::inner_product(source_masses.begin(), source_masses.end(), above_weights_.begin(), 0.0);
  return r;
}

GriddedPdf convolve(const GriddedPdf& p, const NoiseModel& noise, const ConvolveOptions& options) {
  if (!(options.tail_tol > 0.0 && options.tail_tol < 1.0)) {
    throw std::invalid_argument("tail_tol must lie in (0, 1)");
  }
  const GridSpec& g = p.grid();
  const double h = g.step();
  const auto extra_cells = [&](double reach) {
    const double cells = std::ceil(std::max(reach, 0.0) / h) + 1.0;
    return static_cast<long>(std::min(cells, static_cast<double>(options.max_extra_cells)));
  };
  const long left = extra_cells(-noise.quantile(options.tail_tol / 2));
  const long right = extra_cells(noise.upper_quantile(options.tail_tol / 2));
  const long cells = static_cast<long>(g.cells) + left + right;

  MassConvolver conv(noise, h, g.cells, -left, static_cast<std::size_t>(cells), options.method);
  std::vector<double> masses = p.cell_masses();
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  for (double& m : masses) m /= total;
  MassConvolver::Result r = conv.apply(masses);

  const double inside = std::accumulate(r.masses.begin(), r.masses.end(), 0.0);
  const double norm = inside + r.below + r.above;
  const double keep = 1.0 - p.truncated_mass();
  const GridSpec out{g.lower - static_cast<double>(left) * h, g.upper + static_cast<double>(right) * h,
                     static_cast<std::size_t>(cells)};
  std::vector<double> values(r.masses.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = r.masses[i] / (inside * h);
  return GriddedPdf(out, std::move(values), p.truncated_below() + keep * r.below / norm,
                    p.truncated_above() + keep * r.above / norm);
}

}  // namespace cumvol
