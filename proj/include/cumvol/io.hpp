#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cumvol/evolution.hpp"
#include "cumvol/montecarlo.hpp"
#include "cumvol/pdfgrid.hpp"

namespace cumvol {

/// 17 significant digits, '.' decimal separator, independent of the locale.
std::string format_double(double v);

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// "x,density" header followed by one row per node.
std::string density_csv(const GriddedPdf& p);

struct DensityTable {
  std::vector<double> x;
  std::vector<double> density;
};

DensityTable read_density_csv(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);

/// Serialised JSON with a trailing newline.
std::string dump_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);
void to_json(nlohmann::json& j, const DensitySummary& s);
void to_json(nlohmann::json& j, const StepRecord& r);
void to_json(nlohmann::json& j, const VolatilityReport& r);
void to_json(nlohmann::json& j, const McStepStats& s);

}  // namespace cumvol
