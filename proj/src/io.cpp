#include "cumvol/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace cumvol {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string density_csv(const GriddedPdf& p) {
  std::string s = "x,density\n";
  s.reserve(s.size() + p.size() * 40);
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += format_double(p.grid().node(i));
    s += ',';
    s += format_double(p.value(i));
    s += '\n';
  }
  return s;
}

namespace {

double parse_number(std::string_view field, const fs::path& path, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::invalid_argument(path.string() + ":" + std::to_string(line) + ": not a number: '" +
                                std::string(field) + "'");
  }
  return v;
}

}  // namespace

DensityTable read_density_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  DensityTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.rfind("x,", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument(path.string() + ": expected two columns");
    std::string_view view(line);
    t.x.push_back(parse_number(view.substr(0, comma), path, line_no));
    t.density.push_back(parse_number(view.substr(comma + 1), path, line_no));
  }
  return t;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = nlohmann::json{{"lower", g.lower}, {"upper", g.upper}, {"cells", g.cells}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  g = GridSpec::make(j.at("lower").get<double>(), j.at("upper").get<double>(), j.at("cells").get<std::size_t>());
}

void to_json(nlohmann::json& j, const DensitySummary& s) {
  nlohmann::json q = nlohmann::json::object();
  for (std::size_t i = 0; i < s.probs.size(); ++i) q[format_double(s.probs[i])] = s.quantiles[i];
  j = nlohmann::json{{"mass", s.mass},         {"mean", s.mean},
                     {"variance", s.variance}, {"skewness", s.skewness},
                     {"excess_kurtosis", s.excess_kurtosis}, {"quantiles", q},
                     {"truncated_mass", s.truncated_mass}};
}

void to_json(nlohmann::json& j, const StepRecord& r) {
  j = nlohmann::json{{"t", r.t},
                     {"summary", r.summary},
                     {"truncated_below", r.truncated_below},
                     {"truncated_above", r.truncated_above},
                     {"step_loss", r.step_loss}};
  j["distance"] = std::isnan(r.distance) ? nlohmann::json(nullptr) : nlohmann::json(r.distance);
}

void to_json(nlohmann::json& j, const VolatilityReport& r) {
  j = nlohmann::json{{"g", r.g},
                     {"noise", r.noise},
                     {"steps", r.steps},
                     {"converged_at", r.converged_at},
                     {"final_distance", r.final_distance},
                     {"y", r.y},
                     {"dz", r.dz},
                     {"var_dz", r.var_dz},
                     {"iqr", r.iqr},
                     {"central90", r.central90},
                     {"truncated_mass", r.truncated_mass},
                     {"second_moment_reliable", r.second_moment_reliable}};
  j["saddle_var"] = r.saddle_var ? nlohmann::json(*r.saddle_var) : nlohmann::json(nullptr);
  j["ratio"] = r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json(nullptr);
  if (r.dz_pdf) j["dz_grid"] = r.dz_pdf->grid();
  if (r.y_pdf) j["y_grid"] = r.y_pdf->grid();
}

void to_json(nlohmann::json& j, const McStepStats& s) {
  j = nlohmann::json{{"t", s.t}, {"mean_z", s.mean_z}, {"var_z", s.var_z}, {"mean_dz", s.mean_dz}, {"var_dz", s.var_dz}};
}

}  // namespace cumvol
