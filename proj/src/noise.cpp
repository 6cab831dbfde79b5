#include "cumvol/noise.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace cumvol {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }
double std_normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

// Antiderivative of the standard normal CDF: t*Phi(t) + phi(t).
double normal_cdf_antiderivative(double t) {
  return t * std_normal_cdf(t) + std_normal_pdf(t);
}

// Integral of atan(gamma/u)/pi over [u_lo, u_hi] with 0 <= u_lo <= u_hi,
// i.e. the Cauchy survival integrated over a stretch of the right tail.
double cauchy_tail_integral(double gamma, double u_lo, double u_hi) {
  const double first = u_hi * std::atan2(gamma, u_hi) - u_lo * std::atan2(gamma, u_lo);
  const double ratio = (u_hi - u_lo) * (u_hi + u_lo) / (u_lo * u_lo + gamma * gamma);
  return (first + 0.5 * gamma * std::log1p(ratio)) / std::numbers::pi;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

NoiseModel NoiseModel::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian noise requires sigma > 0");
  }
  NoiseModel m;
  m.kind_ = NoiseKind::gaussian;
  m.scale_ = sigma;
  return m;
}

NoiseModel NoiseModel::lorentzian(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("lorentzian noise requires gamma > 0");
  }
  NoiseModel m;
  m.kind_ = NoiseKind::lorentzian;
  m.scale_ = gamma;
  return m;
}

NoiseModel NoiseModel::tabulated(std::vector<double> xs, std::vector<double> densities) {
  if (xs.size() != densities.size()) {
    throw std::invalid_argument("tabulated noise: x and density columns differ in length");
  }
  if (xs.size() < 2) throw std::invalid_argument("tabulated noise needs at least 2 points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(densities[i])) {
      throw std::invalid_argument("tabulated noise: non-finite entry");
    }
    if (densities[i] < 0.0) throw std::invalid_argument("tabulated noise: negative density");
    if (i > 0 && !(xs[i] > xs[i - 1])) {
      throw std::invalid_argument("tabulated noise: x must be strictly increasing");
    }
  }
  double mass = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    mass += 0.5 * (xs[i + 1] - xs[i]) * (densities[i] + densities[i + 1]);
  }
  if (!(mass > 0.0)) throw std::invalid_argument("tabulated noise: zero total mass");
  for (double& f : densities) f /= mass;

  NoiseModel m;
  m.kind_ = NoiseKind::tabulated;
  m.xs_ = std::move(xs);
  m.fs_ = std::move(densities);

  const std::size_t n = m.xs_.size();
  m.cdf_at_.assign(n, 0.0);
  m.sf_at_.assign(n, 0.0);
  m.cdf_int_.assign(n, 0.0);
  m.sf_int_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dx = m.xs_[i + 1] - m.xs_[i];
    const double slope = (m.fs_[i + 1] - m.fs_[i]) / dx;
    m.cdf_at_[i + 1] = m.cdf_at_[i] + 0.5 * dx * (m.fs_[i] + m.fs_[i + 1]);
    m.cdf_int_[i + 1] = m.cdf_int_[i] + m.cdf_at_[i] * dx + 0.5 * m.fs_[i] * dx * dx +
                        slope * dx * dx * dx / 6.0;
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    const double dx = m.xs_[i + 1] - m.xs_[i];
    const double slope = (m.fs_[i + 1] - m.fs_[i]) / dx;
    m.sf_at_[i] = m.sf_at_[i + 1] + 0.5 * dx * (m.fs_[i] + m.fs_[i + 1]);
    m.sf_int_[i] = m.sf_int_[i + 1] + m.sf_at_[i + 1] * dx + 0.5 * m.fs_[i + 1] * dx * dx -
                   slope * dx * dx * dx / 6.0;
  }
  m.scale_ = std::sqrt(*m.variance());
  return m;
}

double NoiseModel::width() const { return scale_; }

std::size_t NoiseModel::segment_of(double x) const {
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t i = static_cast<std::size_t>(std::distance(xs_.begin(), it));
  i = i == 0 ? 0 : i - 1;
  return std::min(i, xs_.size() - 2);
}

double NoiseModel::base_pdf(double x) const {
  switch (kind_) {
    case NoiseKind::gaussian:
      return std_normal_pdf(x / scale_) / scale_;
    case NoiseKind::lorentzian:
      return scale_ / (std::numbers::pi * (x * x + scale_ * scale_));
    case NoiseKind::tabulated: {
      if (x < xs_.front() || x > xs_.back()) return 0.0;
      const std::size_t i = segment_of(x);
      const double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
      return std::max(0.0, fs_[i] + t * (fs_[i + 1] - fs_[i]));
    }
  }
  return 0.0;
}

double NoiseModel::base_cdf(double x) const {
  switch (kind_) {
    case NoiseKind::gaussian:
      return std_normal_cdf(x / scale_);
    case NoiseKind::lorentzian:
      return x < 0.0 ? std::atan2(scale_, -x) / std::numbers::pi
                     : 1.0 - std::atan2(scale_, x) / std::numbers::pi;
    case NoiseKind::tabulated: {
      if (x <= xs_.front()) return 0.0;
      if (x >= xs_.back()) return 1.0;
      const std::size_t i = segment_of(x);
      const double d = x - xs_[i];
      const double slope = (fs_[i + 1] - fs_[i]) / (xs_[i + 1] - xs_[i]);
      return std::clamp(cdf_at_[i] + fs_[i] * d + 0.5 * slope * d * d, 0.0, 1.0);
    }
  }
  return 0.0;
}

double NoiseModel::base_sf(double x) const {
  switch (kind_) {
    case NoiseKind::gaussian:
      return std_normal_cdf(-x / scale_);
    case NoiseKind::lorentzian:
      return x > 0.0 ? std::atan2(scale_, x) / std::numbers::pi
                     : 1.0 - std::atan2(scale_, -x) / std::numbers::pi;
    case NoiseKind::tabulated: {
      if (x <= xs_.front()) return 1.0;
      if (x >= xs_.back()) return 0.0;
      const std::size_t i = segment_of(x);
      const double e = xs_[i + 1] - x;
      const double slope = (fs_[i + 1] - fs_[i]) / (xs_[i + 1] - xs_[i]);
      return std::clamp(sf_at_[i + 1] + fs_[i + 1] * e - 0.5 * slope * e * e, 0.0, 1.0);
    }
  }
  return 0.0;
}

double NoiseModel::table_cdf_antiderivative(double x) const {
  if (x <= xs_.front()) return 0.0;
  if (x >= xs_.back()) return cdf_int_.back() + (x - xs_.back());
  const std::size_t i = segment_of(x);
  const double d = x - xs_[i];
  const double slope = (fs_[i + 1] - fs_[i]) / (xs_[i + 1] - xs_[i]);
  return cdf_int_[i] + cdf_at_[i] * d + 0.5 * fs_[i] * d * d + slope * d * d * d / 6.0;
}

double NoiseModel::table_sf_antiderivative(double x) const {
  if (x >= xs_.back()) return 0.0;
  if (x <= xs_.front()) return sf_int_.front() + (xs_.front() - x);
  const std::size_t i = segment_of(x);
  const double e = xs_[i + 1] - x;
  const double slope = (fs_[i + 1] - fs_[i]) / (xs_[i + 1] - xs_[i]);
  return sf_int_[i + 1] + sf_at_[i + 1] * e + 0.5 * fs_[i + 1] * e * e - slope * e * e * e / 6.0;
}

double NoiseModel::base_cdf_integral(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  switch (kind_) {
    case NoiseKind::gaussian: {
      const double s = scale_;
      if (lo >= 0.0) {
        // Phi = 1 - Phi(-t): integrate the small complement instead.
        return (hi - lo) -
               s * (normal_cdf_antiderivative(-lo / s) - normal_cdf_antiderivative(-hi / s));
      }
      return s * (normal_cdf_antiderivative(hi / s) - normal_cdf_antiderivative(lo / s));
    }
    case NoiseKind::lorentzian: {
      double total = 0.0;
      if (lo < 0.0) {
        const double top = std::min(hi, 0.0);
        total += cauchy_tail_integral(scale_, -top, -lo);
      }
      if (hi > 0.0) {
        const double bottom = std::max(lo, 0.0);
        total += (hi - bottom) - cauchy_tail_integral(scale_, bottom, hi);
      }
      return total;
    }
    case NoiseKind::tabulated:
      return table_cdf_antiderivative(hi) - table_cdf_antiderivative(lo);
  }
  return 0.0;
}

double NoiseModel::base_sf_integral(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  switch (kind_) {
    case NoiseKind::gaussian:
    case NoiseKind::lorentzian:
      return base_cdf_integral(-hi, -lo);
    case NoiseKind::tabulated:
      return table_sf_antiderivative(lo) - table_sf_antiderivative(hi);
  }
  return 0.0;
}

double NoiseModel::base_quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("noise quantile requires 0 < p < 1");
  }
  switch (kind_) {
    case NoiseKind::gaussian: {
      // Bisection on the accurate tail functions.
      double lo = -40.0, hi = 40.0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const bool below = mid < 0.0 ? std_normal_cdf(mid) < p : std_normal_cdf(-mid) > 1.0 - p;
        (below ? lo : hi) = mid;
      }
      return scale_ * 0.5 * (lo + hi);
    }
    case NoiseKind::lorentzian:
      return scale_ * std::tan(std::numbers::pi * (p - 0.5));
    case NoiseKind::tabulated: {
      auto it = std::lower_bound(cdf_at_.begin(), cdf_at_.end(), p);
      if (it == cdf_at_.end()) return xs_.back();
      std::size_t i = static_cast<std::size_t>(std::distance(cdf_at_.begin(), it));
      i = i == 0 ? 0 : i - 1;
      i = std::min(i, xs_.size() - 2);
      const double dx = xs_[i + 1] - xs_[i];
      const double slope = (fs_[i + 1] - fs_[i]) / dx;
      const double r = p - cdf_at_[i];
      double d;
      if (slope == 0.0) {
        d = fs_[i] > 0.0 ? r / fs_[i] : 0.0;
      } else {
        const double disc = std::max(0.0, fs_[i] * fs_[i] + 2.0 * slope * r);
        const double denom = fs_[i] + std::sqrt(disc);
        d = denom > 0.0 ? 2.0 * r / denom : 0.0;
      }
      return std::clamp(xs_[i] + d, xs_[i], xs_[i + 1]);
    }
  }
  return 0.0;
}

double NoiseModel::pdf(double x) const { return base_pdf(mirrored_ ? -x : x); }
double NoiseModel::cdf(double x) const { return mirrored_ ? base_sf(-x) : base_cdf(x); }
double NoiseModel::sf(double x) const { return mirrored_ ? base_cdf(-x) : base_sf(x); }

double NoiseModel::cdf_integral(double lo, double hi) const {
  return mirrored_ ? base_sf_integral(-hi, -lo) : base_cdf_integral(lo, hi);
}

double NoiseModel::sf_integral(double lo, double hi) const {
  return mirrored_ ? base_cdf_integral(-hi, -lo) : base_sf_integral(lo, hi);
}

double NoiseModel::base_upper_quantile(double q) const {
  if (kind_ != NoiseKind::tabulated) return -base_quantile(q);
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("noise quantile requires 0 < q < 1");
  double lo = xs_.front(), hi = xs_.back();
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (base_sf(mid) > q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double NoiseModel::quantile(double p) const {
  return mirrored_ ? -base_upper_quantile(p) : base_quantile(p);
}

double NoiseModel::upper_quantile(double q) const {
  return mirrored_ ? -base_quantile(q) : base_upper_quantile(q);
}

std::optional<double> NoiseModel::mean() const {
  switch (kind_) {
    case NoiseKind::gaussian:
      return 0.0;
    case NoiseKind::lorentzian:
      return std::nullopt;
    case NoiseKind::tabulated: {
      double m = 0.0;
      for (std::size_t i = 0; i + 1 < xs_.size(); ++i) {
        const double dx = xs_[i + 1] - xs_[i];
        m += dx / 6.0 * (xs_[i] * (2.0 * fs_[i] + fs_[i + 1]) + xs_[i + 1] * (fs_[i] + 2.0 * fs_[i + 1]));
      }
      return mirrored_ ? -m : m;
    }
  }
  return std::nullopt;
}

std::optional<double> NoiseModel::variance() const {
  switch (kind_) {
    case NoiseKind::gaussian:
      return scale_ * scale_;
    case NoiseKind::lorentzian:
      return std::nullopt;
    case NoiseKind::tabulated: {
      const double mu = mirrored_ ? -*mean() : *mean();
      double v = 0.0;
      // Simpson is exact for (x - mu)^2 times a linear density.
      for (std::size_t i = 0; i + 1 < xs_.size(); ++i) {
        const double dx = xs_[i + 1] - xs_[i];
        const double xm = 0.5 * (xs_[i] + xs_[i + 1]);
        const double fm = 0.5 * (fs_[i] + fs_[i + 1]);
        const double a = xs_[i] - mu, b = xm - mu, c = xs_[i + 1] - mu;
        v += dx / 6.0 * (a * a * fs_[i] + 4.0 * b * b * fm + c * c * fs_[i + 1]);
      }
      return v;
    }
  }
  return std::nullopt;
}

NoiseModel NoiseModel::mirror() const {
  NoiseModel m = *this;
  m.mirrored_ = !mirrored_;
  return m;
}

std::vector<double> NoiseModel::sample(std::size_t count, std::uint64_t seed) const {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  NoiseSampler sampler(*this, seed);
  std::vector<double> out(count);
  for (double& v : out) v = sampler();
  return out;
}

std::vector<double> NoiseModel::table_x() const {
  if (!mirrored_) return xs_;
  std::vector<double> out(xs_.rbegin(), xs_.rend());
  for (double& v : out) v = -v;
  return out;
}

std::vector<double> NoiseModel::table_density() const {
  if (!mirrored_) return fs_;
  return std::vector<double>(fs_.rbegin(), fs_.rend());
}

std::string NoiseModel::describe() const {
  std::string base;
  switch (kind_) {
    case NoiseKind::gaussian:
      base = "gaussian:sigma=" + format_number(scale_);
      break;
    case NoiseKind::lorentzian:
      base = "lorentzian:gamma=" + format_number(scale_);
      break;
    case NoiseKind::tabulated:
      base = "table:points=" + std::to_string(xs_.size());
      break;
  }
  return mirrored_ ? base + ",mirrored" : base;
}

NoiseSampler::NoiseSampler(const NoiseModel& model, std::seed_seq& seeds)
    : model_(&model), engine_(seeds) {}

NoiseSampler::NoiseSampler(const NoiseModel& model, std::uint64_t seed) : model_(&model) {
  std::seed_seq seeds{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  engine_.seed(seeds);
}

double NoiseSampler::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseSampler::operator()() {
  double value = 0.0;
  switch (model_->kind()) {
    case NoiseKind::gaussian:
      value = model_->width() * normal_(engine_);
      return model_->mirrored() ? -value : value;
    case NoiseKind::lorentzian:
      value = model_->width() * std::tan(std::numbers::pi * (uniform_open() - 0.5));
      return model_->mirrored() ? -value : value;
    case NoiseKind::tabulated:
      // quantile() already accounts for mirroring.
      return model_->quantile(uniform_open());
  }
  return value;
}

NoiseModel make_noise(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("noise spec must look like kind:param, got '" + std::string(spec) + "'");
  }
  const std::string_view kind = trim(spec.substr(0, colon));
  const std::string_view rest = trim(spec.substr(colon + 1));

  if (kind == "table") {
    if (rest.empty()) throw std::invalid_argument("table noise needs a path");
    return load_noise_table(std::filesystem::path(std::string(rest)));
  }

  const auto eq = rest.find('=');
  if (eq == std::string_view::npos) {
    throw std::invalid_argument("noise parameter must look like name=value");
  }
  const std::string_view name = trim(rest.substr(0, eq));
  const auto value = parse_double(rest.substr(eq + 1));
  if (!value) throw std::invalid_argument("noise parameter is not a number: " + std::string(rest));

  if (kind == "gaussian" && name == "sigma") return NoiseModel::gaussian(*value);
  if (kind == "lorentzian" && name == "gamma") return NoiseModel::lorentzian(*value);
  throw std::invalid_argument("unknown noise spec '" + std::string(spec) +
                              "' (expected gaussian:sigma=S, lorentzian:gamma=G or table:PATH)");
}

NoiseModel load_noise_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open noise table " + path.string());
  std::vector<double> xs, fs;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (line_no == 1 && view.size() >= 3 && static_cast<unsigned char>(view[0]) == 0xEF) {
      view.remove_prefix(3);  // UTF-8 BOM
    }
    if (view.empty()) continue;
    const bool may_be_header = first_content;
    first_content = false;
    const auto comma = view.find(',');
    if (comma == std::string_view::npos) {
      if (may_be_header) continue;
      throw std::invalid_argument("noise table line " + std::to_string(line_no) + ": expected x,density");
    }
    const auto x = parse_double(view.substr(0, comma));
    const auto f = parse_double(view.substr(comma + 1));
    if (!x || !f) {
      if (may_be_header) continue;
      throw std::invalid_argument("noise table line " + std::to_string(line_no) + ": not numeric");
    }
    xs.push_back(*x);
    fs.push_back(*f);
  }
  return NoiseModel::tabulated(std::move(xs), std::move(fs));
}

}  // namespace cumvol
