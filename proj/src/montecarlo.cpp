#include "cumvol/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <random>
#include <stdexcept>

#include "cumvol/errors.hpp"
#include "cumvol/parallel.hpp"

namespace cumvol {

namespace {

std::seed_seq block_seeds(std::uint64_t seed, std::uint64_t block, std::uint32_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), stream};
}

constexpr std::uint32_t kPathStream = 0;
constexpr std::uint32_t kBootstrapStream = 1;
constexpr std::uint32_t kReversalStream = 2;

void require_paths(long t_max, std::size_t n_paths) {
  if (t_max < 1) throw std::invalid_argument("t_max must be at least 1");
  if (n_paths < 1) throw std::invalid_argument("n_paths must be at least 1");
}

// Increment of log Z when the term e^{log_q} is added: log(1 + e^{log_q - z}).
double log_increment(double z, double log_q) {
  const double d = log_q - z;
  return d > 0.0 ? d + std::log1p(std::exp(-d)) : std::log1p(std::exp(d));
}

double sample_mean(std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

bool McEnsemble::records(long t) const { return std::binary_search(times.begin(), times.end(), t); }

namespace {
std::size_t record_index(const McEnsemble& e, long t) {
  const auto it = std::lower_bound(e.times.begin(), e.times.end(), t);
  if (it == e.times.end() || *it != t) {
    throw std::invalid_argument("t = " + std::to_string(t) + " was not recorded by the ensemble");
  }
  return static_cast<std::size_t>(it - e.times.begin());
}
}  // namespace

const std::vector<double>& McEnsemble::z_at(long t) const { return z[record_index(*this, t)]; }
const std::vector<double>& McEnsemble::dz_at(long t) const { return dz[record_index(*this, t)]; }

McEnsemble simulate(double g, const NoiseModel& noise, long t_max, std::size_t n_paths, std::uint64_t seed,
                    std::vector<long> record) {
  require_paths(t_max, n_paths);
  if (!std::isfinite(g)) throw std::invalid_argument("g must be finite");
  if (record.empty()) {
    record.resize(static_cast<std::size_t>(t_max));
    std::iota(record.begin(), record.end(), 1L);
  }
  std::sort(record.begin(), record.end());
  record.erase(std::unique(record.begin(), record.end()), record.end());
  if (record.front() < 1 || record.back() > t_max) throw std::invalid_argument("recorded times must lie in 1..t_max");

  McEnsemble e;
  e.g = g;
  e.noise = noise.describe();
  e.t_max = t_max;
  e.n_paths = n_paths;
  e.seed = seed;
  e.times = record;
  e.z.assign(record.size(), std::vector<double>(n_paths, 0.0));
  e.dz.assign(record.size(), std::vector<double>(n_paths, 0.0));

  const std::size_t blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  parallel_for(blocks, [&](std::size_t b) {
    std::seed_seq seq = block_seeds(seed, b, kPathStream);
    NoiseSampler draw(noise, seq);
    const std::size_t end = std::min(n_paths, (b + 1) * kPathBlock);
    for (std::size_t p = b * kPathBlock; p < end; ++p) {
      double log_q = 0.0;
      double z = 0.0;
      std::size_t k = 0;
      for (long t = 1; t <= t_max; ++t) {
        log_q += g + draw();
        const double inc = log_increment(z, log_q);
        z += inc;
        if (!std::isfinite(z)) throw NumericalError("log cumulative production overflowed");
        if (k < record.size() && record[k] == t) {
          e.z[k][p] = z;
          e.dz[k][p] = inc;
          ++k;
        }
      }
    }
  });
  return e;
}

VarianceEstimate bootstrap_variance(std::span<const double> xs, std::uint64_t seed, std::size_t resamples) {
  if (xs.empty()) throw std::invalid_argument("bootstrap needs a non-empty sample");
  VarianceEstimate est;
  est.variance = sample_variance(xs);
  if (resamples < 2 || xs.size() < 2) return est;
  std::seed_seq seq = block_seeds(seed, 0, kBootstrapStream);
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> stats(resamples);
  std::vector<double> buf(xs.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    for (double& v : buf) v = xs[pick(rng)];
    stats[r] = sample_variance(buf);
  }
  est.std_error = std::sqrt(sample_variance(stats));
  return est;
}

VarianceEstimate empirical_volatility(const McEnsemble& e, long t, std::size_t resamples) {
  return bootstrap_variance(e.dz_at(t), e.seed + static_cast<std::uint64_t>(t), resamples);
}

double ks_distance(std::span<const double> sample, const GriddedPdf& p, KsMode mode) {
  if (sample.empty()) throw std::invalid_argument("KS distance needs a non-empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  const GridSpec& g = p.grid();
  const std::vector<double> cdf = p.cdf_at_edges();
  const double tb = p.truncated_below();
  const double inside = 1.0 - p.truncated_mass();
  const double h = g.step();
  auto model = [&](double x) {
    if (x < g.lower) return 0.0;
    if (x >= g.upper) return tb + inside;
    const double pos = (x - g.lower) / h;
    const auto i = std::min(static_cast<std::size_t>(pos), g.cells - 1);
    const double t = pos - static_cast<double>(i);
    return tb + inside * (cdf[i] + t * (cdf[i + 1] - cdf[i]));
  };

  double worst = 0.0;
  if (mode == KsMode::edges) {
    // Empirical CDF just right of each edge against the exact gridded mass.
    std::size_t count = 0;
    for (std::size_t k = 0; k <= g.cells; ++k) {
      const double edge = g.edge(k);
      while (count < xs.size() && xs[count] <= edge) ++count;
      const double model_cdf = tb + inside * cdf[k];
      worst = std::max(worst, std::abs(static_cast<double>(count) / n - model_cdf));
    }
    return worst;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = model(xs[i]);
    worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return worst;
}

double empirical_cdf_distance(const McEnsemble& e, long t, const GriddedPdf& p, Quantity which, KsMode mode) {
  const auto& xs = which == Quantity::z ? e.z_at(t) : e.dz_at(t);
  return ks_distance(xs, p, mode);
}

ReversalCheck verify_reversal_identity(double g, const NoiseModel& noise, long t, std::size_t n_paths,
                                       std::uint64_t seed) {
  require_paths(t, n_paths);
  const auto steps = static_cast<std::size_t>(t);
  std::seed_seq seq = block_seeds(seed, 0, kReversalStream);
  NoiseSampler draw(noise, seq);
  std::vector<double> a(steps + 1);
  ReversalCheck check;
  check.paths = n_paths;
  for (std::size_t p = 0; p < n_paths; ++p) {
    for (std::size_t i = 1; i <= steps; ++i) a[i] = draw();

    // Forward path: z_t and log of its last term, log(Z_t - Z_{t-1}).
    double log_q = 0.0, z = 0.0;
    for (std::size_t j = 1; j <= steps; ++j) {
      log_q += g + a[j];
      z += log_increment(z, log_q);
    }
    // Not -log(1 - e^{-dz_t}): dz_t underflows to 0 after large negative draws.
    const double log_y_path = z - log_q;

    // Reversed sum: sum_{j=0}^{t} e^{-g j} e^{-a_t - ... - a_{t+1-j}}.
    double log_term = 0.0, log_y_rev = 0.0;
    for (std::size_t j = 1; j <= steps; ++j) {
      log_term += -g - a[steps + 1 - j];
      log_y_rev = log_add_exp(log_y_rev, log_term);
    }
    check.max_relative_error = std::max(check.max_relative_error, std::abs(std::expm1(log_y_path - log_y_rev)));
  }
  return check;
}

std::vector<McStepStats> ensemble_stats(const McEnsemble& e) {
  std::vector<McStepStats> out;
  out.reserve(e.times.size());
  for (std::size_t k = 0; k < e.times.size(); ++k) {
    const long t = e.times[k];
    const auto& z = e.z[k];
    const auto& dz = e.dz[k];
    out.push_back({t, sample_mean(z), sample_variance(z), sample_mean(dz), sample_variance(dz)});
  }
  return out;
}

}  // namespace cumvol
