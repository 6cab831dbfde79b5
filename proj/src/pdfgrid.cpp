#include "cumvol/pdfgrid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cumvol {

GridSpec GridSpec::make(double lower, double upper, std::size_t cells) {
  GridSpec g{lower, upper, cells};
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw std::invalid_argument("grid requires finite lower < upper");
  }
  if (cells < kMinCells) {
    throw std::invalid_argument("grid requires at least " + std::to_string(kMinCells) + " cells");
  }
}

GriddedPdf::GriddedPdf(GridSpec grid, std::vector<double> values, double truncated_below,
                       double truncated_above)
    : grid_(grid),
      values_(std::move(values)),
      truncated_below_(truncated_below),
      truncated_above_(truncated_above) {
  grid_.validate();
  if (values_.size() != grid_.cells) {
    throw std::invalid_argument("density has " + std::to_string(values_.size()) +
                                " values for a grid of " + std::to_string(grid_.cells) + " cells");
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("density values must be finite and non-negative");
    }
  }
  if (!(truncated_below_ >= 0.0) || !(truncated_above_ >= 0.0) ||
      !(truncated_below_ + truncated_above_ < 1.0)) {
    throw std::invalid_argument("truncated mass must lie in [0, 1)");
  }
}

double GriddedPdf::mass() const {
  return grid_.step() * std::accumulate(values_.begin(), values_.end(), 0.0);
}

GriddedPdf GriddedPdf::normalized() const {
  const double m = mass();
  if (!(m > 0.0)) throw std::invalid_argument("cannot normalise a density with zero mass");
  std::vector<double> v(values_);
  for (double& x : v) x /= m;
  return GriddedPdf(grid_, std::move(v), truncated_below_, truncated_above_);
}

std::vector<double> GriddedPdf::cell_masses() const {
  std::vector<double> out(values_);
  const double h = grid_.step();
  for (double& x : out) x *= h;
  return out;
}

std::vector<double> GriddedPdf::cdf_at_edges() const {
  std::vector<double> cdf(values_.size() + 1, 0.0);
  std::partial_sum(values_.begin(), values_.end(), cdf.begin() + 1);
  const double total = cdf.back();
  if (total > 0.0) {
    for (double& c : cdf) c /= total;
  }
  cdf.back() = 1.0;
  return cdf;
}

GriddedPdf from_function(const GridSpec& grid, const std::function<double(double)>& f) {
  grid.validate();
  std::vector<double> v(grid.cells);
  for (std::size_t i = 0; i < grid.cells; ++i) {
    const double y = f(grid.node(i));
    if (!(y >= 0.0) || !std::isfinite(y)) {
      throw std::invalid_argument("density function must be finite and non-negative on the grid");
    }
    v[i] = y;
  }
  if (std::all_of(v.begin(), v.end(), [](double y) { return y == 0.0; })) {
    throw std::invalid_argument("density function vanishes on every grid node");
  }
  return GriddedPdf(grid, std::move(v)).normalized();
}

GriddedPdf from_noise(const GridSpec& grid, const NoiseModel& noise) {
  GriddedPdf p = from_function(grid, [&](double x) { return noise.pdf(x); });
  return GriddedPdf(grid, std::vector<double>(p.values().begin(), p.values().end()),
                    noise.cdf(grid.lower), noise.sf(grid.upper));
}

double interp_at(const GriddedPdf& p, double x) {
  const GridSpec& g = p.grid();
  if (!(x >= g.lower && x <= g.upper)) return 0.0;
  const double h = g.step();
  const double pos = (x - g.lower) / h - 0.5;
  if (pos <= 0.0) return p.value(0);
  const std::size_t last = g.cells - 1;
  if (pos >= static_cast<double>(last)) return p.value(last);
  const auto i = static_cast<std::size_t>(pos);
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * p.value(i) + t * p.value(i + 1);
}

double moment(const GriddedPdf& p, int order) {
  if (order < 1 || order > 4) throw std::invalid_argument("moment order must be 1..4");
  const GridSpec& g = p.grid();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.cells; ++i) {
    const double x = g.node(i);
    num += std::pow(x, order) * p.value(i);
    den += p.value(i);
  }
  return num / den;
}

double mean(const GriddedPdf& p) { return moment(p, 1); }

double central_moment(const GriddedPdf& p, int order) {
  if (order < 2 || order > 4) throw std::invalid_argument("central moment order must be 2..4");
  const double mu = mean(p);
  const GridSpec& g = p.grid();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.cells; ++i) {
    const double d = g.node(i) - mu;
    num += std::pow(d, order) * p.value(i);
    den += p.value(i);
  }
  return num / den;
}

double variance(const GriddedPdf& p) { return central_moment(p, 2); }

std::vector<double> quantiles(const GriddedPdf& p, std::span<const double> probs) {
  const std::vector<double> cdf = p.cdf_at_edges();
  const GridSpec& g = p.grid();
  const double h = g.step();
  std::vector<double> out;
  out.reserve(probs.size());
  for (double q : probs) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile levels must lie in (0, 1)");
    // First edge whose cumulative mass reaches q; the cell before it holds the crossing.
    auto it = std::lower_bound(cdf.begin(), cdf.end(), q);
    const auto k = static_cast<std::size_t>(std::distance(cdf.begin(), it));
    if (k == 0) {
      out.push_back(g.lower);
      continue;
    }
    const double lo = cdf[k - 1], hi = cdf[k];
    const double t = hi > lo ? (q - lo) / (hi - lo) : 1.0;
    out.push_back(g.edge(k - 1) + t * h);
  }
  return out;
}

double quantile(const GriddedPdf& p, double prob) {
  const std::array<double, 1> probs{prob};
  return quantiles(p, probs).front();
}

namespace {
void require_same_grid(const GriddedPdf& p, const GriddedPdf& q) {
  if (!(p.grid() == q.grid())) throw std::invalid_argument("densities live on different grids");
}
}  // namespace

double distance(const GriddedPdf& p, const GriddedPdf& q, Metric metric) {
  require_same_grid(p, q);
  if (metric == Metric::L1) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p.value(i) - q.value(i));
    return sum * p.grid().step();
  }
  const auto cp = p.cdf_at_edges();
  const auto cq = q.cdf_at_edges();
  double worst = 0.0;
  for (std::size_t i = 0; i < cp.size(); ++i) worst = std::max(worst, std::abs(cp[i] - cq[i]));
  return worst;
}

double centered_l1_distance(const GriddedPdf& p, const GriddedPdf& q) {
  require_same_grid(p, q);
  const double shift = mean(q) - mean(p);
  const GridSpec& g = p.grid();
  double sum = 0.0;
  for (std::size_t i = 0; i < g.cells; ++i) {
    sum += std::abs(q.value(i) - interp_at(p, g.node(i) - shift));
  }
  return sum * g.step();
}

std::span<const double> summary_probs() {
  static constexpr std::array<double, 7> kProbs{0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};
  return kProbs;
}

DensitySummary summarize(const GriddedPdf& p) {
  DensitySummary s;
  s.mass = p.mass();
  s.mean = mean(p);
  s.variance = variance(p);
  if (s.variance > 0.0) {
    s.skewness = central_moment(p, 3) / std::pow(s.variance, 1.5);
    s.excess_kurtosis = central_moment(p, 4) / (s.variance * s.variance) - 3.0;
  }
  const auto probs = summary_probs();
  s.probs.assign(probs.begin(), probs.end());
  s.quantiles = quantiles(p, probs);
  s.truncated_mass = p.truncated_mass();
  return s;
}

}  // namespace cumvol
