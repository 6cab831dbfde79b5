#include "cumvol/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "cumvol/analytic.hpp"
#include "cumvol/errors.hpp"
#include "cumvol/evolution.hpp"
#include "cumvol/io.hpp"
#include "cumvol/montecarlo.hpp"
#include "cumvol/noise.hpp"
#include "cumvol/parallel.hpp"

namespace cumvol {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr long kDefaultMaxSteps = 20000;
constexpr std::size_t kMaxExportedPaths = 10000;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

double parse_double(const std::string& text, const char* what) {
  std::string_view v(text);
  while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
  while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
    throw std::invalid_argument(std::string(what) + ": '" + text + "' is not a finite number");
  }
  return x;
}

GridSpec parse_grid(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw std::invalid_argument("--grid expects min,max,n");
  const double lower = parse_double(parts[0], "--grid min");
  const double upper = parse_double(parts[1], "--grid max");
  const double n = parse_double(parts[2], "--grid n");
  if (n != std::floor(n) || n < 1) throw std::invalid_argument("--grid n must be a positive integer");
  return GridSpec::make(lower, upper, static_cast<std::size_t>(n));
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const auto& part : split(text, ',')) out.push_back(parse_double(part, what));
  return out;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string step_file(const char* prefix, long t) {
  std::ostringstream s;
  s << prefix << "_t" << std::setw(5) << std::setfill('0') << t << ".csv";
  return s.str();
}

json manifest_head(const char* command) {
  return json{{"command", command}, {"version", kVersion}, {"created", timestamp()}};
}

void write_manifest(const fs::path& dir, json manifest, const std::vector<std::string>& outputs) {
  manifest["outputs"] = outputs;
  write_file_atomic(dir / "manifest.json", dump_json(manifest));
}

struct EvolveOptions {
  double g = 0.0;
  std::string noise;
  long steps = 0;
  std::string grid;
  std::string out;
  double tol = 1e-8;
};

struct VolatilityOptions {
  double g = 0.0;
  std::string noise;
  long steps = 0;
  std::string grid;
  std::string dz_grid;
  std::string out;
  double tol = 1e-8;
  bool until_converged = false;
  long every = -1;
};

struct CompareOptions {
  double g = 0.0;
  std::string sweep;
  std::string out;
  long steps = kDefaultMaxSteps;
  std::size_t cells = kDefaultCells;
  double tol = 1e-8;
};

struct SimulateOptions {
  double g = 0.0;
  std::string noise;
  long long paths = 0;
  long steps = 0;
  std::uint64_t seed = 1;
  std::string against;
  std::string record;
  std::string out;
  bool export_paths = false;
};

// Recording every step costs 16 bytes per path and step.
constexpr double kRecordAllBudget = 2e7;

json config_json(double g, const NoiseModel& noise, const std::string& noise_spec, long steps, const GridSpec& grid,
                 double tol) {
  return json{{"g", g},         {"noise", noise.describe()}, {"noise_spec", noise_spec},
              {"steps", steps}, {"grid", grid},              {"convergence_tol", tol}};
}

int run_evolve(const EvolveOptions& o, std::ostream& out) {
  const NoiseModel noise = make_noise(o.noise);
  if (o.steps < 1) throw std::invalid_argument("--steps must be at least 1");
  EvolutionConfig c;
  c.g = o.g;
  c.noise = noise;
  c.horizon = o.steps;
  c.grid = o.grid.empty() ? default_z_grid(o.g, noise, o.steps) : parse_grid(o.grid);
  c.convergence_tol = o.tol;
  c.validate();

  const fs::path dir(o.out);
  std::vector<std::string> files;
  const EvolutionTrace trace = evolve_z(c, [&](long t, const GriddedPdf& p) {
    files.push_back(step_file("z", t));
    write_file_atomic(dir / files.back(), density_csv(p));
  });

  json m = manifest_head("evolve");
  m["config"] = config_json(o.g, noise, o.noise, o.steps, c.grid, o.tol);
  m["steps"] = trace.steps;
  m["converged"] = trace.converged;
  m["converged_at"] = trace.converged_at;
  write_manifest(dir, m, files);

  const StepRecord& last = trace.steps.back();
  out << "evolve: " << trace.steps.size() << " steps; t=" << last.t << " mean " << last.summary.mean
      << " variance " << last.summary.variance << " truncated " << last.truncated_below + last.truncated_above
      << "\n";
  return kExitOk;
}

int run_volatility(const VolatilityOptions& o, std::ostream& out) {
  const NoiseModel noise = make_noise(o.noise);
  if (o.until_converged && !(o.g > 0.0)) {
    throw DomainError("--until-converged needs g > 0: the y-density has no fixed point otherwise");
  }
  long horizon = o.steps;
  if (horizon == 0 && o.until_converged) horizon = kDefaultMaxSteps;
  if (horizon < 1) throw std::invalid_argument("--steps must be at least 1");
  const long every = o.every >= 0 ? o.every : (o.until_converged ? 0 : 1);

  EvolutionConfig c;
  c.g = o.g;
  c.noise = noise;
  c.horizon = horizon;
  c.grid = o.grid.empty() ? default_y_grid(o.g, noise, horizon) : parse_grid(o.grid);
  c.convergence_tol = o.tol;
  c.stop_at_convergence = o.until_converged;
  c.validate();
  const std::optional<GridSpec> dz_grid = o.dz_grid.empty() ? std::nullopt : std::optional(parse_grid(o.dz_grid));

  const fs::path dir(o.out);
  std::vector<std::string> files;
  json per_step = json::array();
  const EvolutionTrace trace = evolve_y(c, [&](long t, const GriddedPdf& y) {
    const GriddedPdf dz = volatility_pdf(y, dz_grid);
    per_step.push_back(json{{"t", t}, {"dz", summarize(dz)}, {"dz_truncated", dz.truncated_mass()}});
    if (every > 0 && t % every == 0) {
      files.push_back(step_file("dz", t));
      write_file_atomic(dir / files.back(), density_csv(dz));
    }
  });
  if (o.until_converged && !trace.converged) {
    throw ConvergenceError("y-density did not converge to " + format_double(o.tol) + " within " +
                           std::to_string(horizon) + " steps");
  }
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    per_step[i]["y"] = trace.steps[i].summary;
    per_step[i]["y_distance"] = trace.steps[i].distance;
    per_step[i]["y_truncated"] = trace.steps[i].truncated_below + trace.steps[i].truncated_above;
  }

  const VolatilityReport report = make_volatility_report(c, trace, dz_grid);
  files.push_back("dz_final.csv");
  write_file_atomic(dir / files.back(), density_csv(*report.dz_pdf));
  files.push_back("y_final.csv");
  write_file_atomic(dir / files.back(), density_csv(*report.y_pdf));

  json r{{"command", "volatility"}, {"version", kVersion}, {"report", report}, {"steps", per_step}};
  r["converged"] = trace.converged;
  files.push_back("volatility_report.json");
  write_file_atomic(dir / files.back(), dump_json(r));

  json m = manifest_head("volatility");
  m["config"] = config_json(o.g, noise, o.noise, horizon, c.grid, o.tol);
  m["config"]["until_converged"] = o.until_converged;
  m["config"]["every"] = every;
  if (dz_grid) m["config"]["dz_grid"] = *dz_grid;
  m["converged"] = trace.converged;
  m["converged_at"] = trace.converged_at;
  write_manifest(dir, m, files);

  out << "volatility: " << report.steps << " steps" << (trace.converged ? " (converged)" : "") << "; Var(dz) "
      << report.var_dz << " IQR " << report.iqr << " central 90% " << report.central90;
  if (report.ratio) out << " ratio to sigma_a^2 tanh(g/2) " << *report.ratio;
  if (!report.second_moment_reliable) out << " [second moment depends on the domain]";
  out << "\n";
  return kExitOk;
}

int run_compare(const CompareOptions& o, std::ostream& out) {
  const std::vector<double> sweep = parse_list(o.sweep, "--sigma-sweep");
  if (sweep.empty()) throw std::invalid_argument("--sigma-sweep needs at least one value");
  for (double v : sweep) {
    if (!(v > 0.0)) throw std::invalid_argument("--sigma-sweep values are variances and must be positive");
  }
  if (!(o.g > 0.0)) throw DomainError("the saddle-point comparison needs g > 0");
  if (o.steps < 1) throw std::invalid_argument("--steps must be at least 1");

  std::vector<std::optional<VolatilityReport>> reports(sweep.size());
  parallel_for(sweep.size(), [&](std::size_t i) {
    EvolutionConfig c;
    c.g = o.g;
    c.noise = NoiseModel::gaussian(std::sqrt(sweep[i]));
    c.horizon = o.steps;
    c.grid = default_y_grid(o.g, c.noise, o.steps, o.cells);
    c.convergence_tol = o.tol;
    reports[i] = steady_state_volatility(c);
  });

  std::string csv = "sigma2,ratio,var_dz,saddle_var,steps\n";
  json rows = json::array();
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const VolatilityReport& r = *reports[i];
    csv += format_double(sweep[i]) + "," + format_double(*r.ratio) + "," + format_double(r.var_dz) + "," +
           format_double(*r.saddle_var) + "," + std::to_string(r.steps) + "\n";
    json row = r;
    row["sigma2"] = sweep[i];
    rows.push_back(row);
    out << "sigma_a^2 " << sweep[i] << ": ratio " << *r.ratio << " after " << r.steps << " steps\n";
  }
  const fs::path dir(o.out);
  std::vector<std::string> files{"ratio.csv", "compare.json"};
  write_file_atomic(dir / files[0], csv);
  write_file_atomic(dir / files[1], dump_json(json{{"command", "compare"}, {"version", kVersion}, {"g", o.g}, {"points", rows}}));
  json m = manifest_head("compare");
  m["config"] = json{{"g", o.g}, {"sigma2", sweep}, {"max_steps", o.steps}, {"cells", o.cells}, {"convergence_tol", o.tol}};
  write_manifest(dir, m, files);
  return kExitOk;
}

int run_simulate(const SimulateOptions& o, std::ostream& out) {
  const NoiseModel noise = make_noise(o.noise);
  if (o.paths < 1) throw std::invalid_argument("--paths must be at least 1");
  if (o.steps < 1) throw std::invalid_argument("--steps must be at least 1");
  const auto paths = static_cast<std::size_t>(o.paths);
  std::vector<long> record;
  for (double t : parse_list(o.record, "--record")) {
    if (t != std::floor(t) || t < 1 || t > static_cast<double>(o.steps)) {
      throw std::invalid_argument("--record times must be integers in 1..steps");
    }
    record.push_back(static_cast<long>(t));
  }
  if (record.empty() && static_cast<double>(paths) * static_cast<double>(o.steps) > kRecordAllBudget) {
    record.push_back(o.steps);
  }
  if (std::find(record.begin(), record.end(), o.steps) == record.end() && !record.empty()) record.push_back(o.steps);
  const McEnsemble e = simulate(o.g, noise, o.steps, paths, o.seed, record);

  const fs::path dir(o.out);
  std::vector<std::string> files;
  json summary{{"command", "simulate"},
               {"version", kVersion},
               {"config", json{{"g", o.g}, {"noise", noise.describe()}, {"noise_spec", o.noise}, {"paths", o.paths},
                               {"steps", o.steps}, {"seed", o.seed}}},
               {"stats", ensemble_stats(e)}};
  const VarianceEstimate vol = empirical_volatility(e, o.steps);
  summary["final_volatility"] = json{{"t", o.steps}, {"variance", vol.variance}, {"bootstrap_se", vol.std_error}};

  if (!o.against.empty()) {
    const fs::path src(o.against);
    const json manifest = read_json(src / "manifest.json");
    if (manifest.at("command") != "evolve") throw std::invalid_argument("--against must point at an evolve run");
    const GridSpec grid = manifest.at("config").at("grid").get<GridSpec>();
    const auto& outputs = manifest.at("outputs");
    const auto& steps = manifest.at("steps");
    std::string csv = "t,ks\n";
    json ks = json::array();
    const long last = std::min<long>(o.steps, static_cast<long>(outputs.size()));
    for (long t = 1; t <= last; ++t) {
      if (!e.records(t)) continue;
      const auto idx = static_cast<std::size_t>(t - 1);
      const DensityTable table = read_density_csv(src / outputs.at(idx).get<std::string>());
      const GriddedPdf p(grid, table.density, steps.at(idx).at("truncated_below").get<double>(),
                         steps.at(idx).at("truncated_above").get<double>());
      const double d = empirical_cdf_distance(e, t, p);
      csv += std::to_string(t) + "," + format_double(d) + "\n";
      ks.push_back(json{{"t", t}, {"ks", d}});
    }
    files.push_back("ks.csv");
    write_file_atomic(dir / files.back(), csv);
    summary["ks"] = ks;
    if (!ks.empty()) out << "simulate: KS at t=" << last << " is " << ks.back()["ks"].get<double>() << "\n";
  }
  if (o.export_paths) {
    std::string csv = "path,t,z\n";
    const std::size_t n = std::min(paths, kMaxExportedPaths);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < e.times.size(); ++k) {
        csv += std::to_string(p) + "," + std::to_string(e.times[k]) + "," + format_double(e.z[k][p]) + "\n";
      }
    }
    files.push_back("paths.csv");
    write_file_atomic(dir / files.back(), csv);
  }
  files.push_back("summary.json");
  write_file_atomic(dir / files.back(), dump_json(summary));

  json m = manifest_head("simulate");
  m["config"] = summary["config"];
  write_manifest(dir, m, files);
  out << "simulate: " << paths << " paths, Var(dz_" << o.steps << ") " << vol.variance << " +- " << vol.std_error
      << "\n";
  return kExitOk;
}

constexpr const char* kGridHelp =
    "Grid as min,max,n (n cells of equal width, nodes at cell centres). Default: [0, U] with 8192 cells, "
    "U the noiseless log cumulative production at the horizon plus 12 analytic standard deviations "
    "(12 gamma (T+1) for Lorentzian noise)";

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributions of log cumulative production and its volatility under i.i.d. noise", "cumvol"};
  app.set_version_flag("--version", std::string("cumvol ") + kVersion);
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 1 I/O failure, 2 usage, 3 numerical invariant, 4 outside validity domain.\n"
             "CUMVOL_THREADS caps worker threads.");

  EvolveOptions ev;
  auto* evolve = app.add_subcommand("evolve", "Evolve the density of z_t = log Z_t");
  evolve->add_option("--g", ev.g, "Drift per step")->required();
  evolve->add_option("--noise", ev.noise, "gaussian:sigma=S | lorentzian:gamma=G | table:PATH")->required();
  evolve->add_option("--steps", ev.steps, "Number of steps")->required();
  evolve->add_option("--grid", ev.grid, kGridHelp);
  evolve->add_option("--tol", ev.tol, "L1 tolerance on mean-centred successive densities")->capture_default_str();
  evolve->add_option("--out", ev.out, "Output directory")->required();

  VolatilityOptions vo;
  auto* vol = app.add_subcommand("volatility", "Evolve the y-density and transform it to the volatility dz");
  vol->add_option("--g", vo.g, "Drift per step")->required();
  vol->add_option("--noise", vo.noise, "gaussian:sigma=S | lorentzian:gamma=G | table:PATH")->required();
  vol->add_option("--steps", vo.steps, "Number of steps (maximum with --until-converged, default 20000)");
  vol->add_option("--grid", vo.grid, "y-grid; same format and defaults as for evolve with -g and mirrored noise");
  vol->add_option("--dz-grid", vo.dz_grid, "Volatility grid min,max,n (default [0, D] with 8192 cells)");
  vol->add_flag("--until-converged", vo.until_converged, "Stop once the raw L1 step distance is below --tol");
  vol->add_option("--tol", vo.tol, "L1 convergence tolerance")->capture_default_str();
  vol->add_option("--every", vo.every, "Write every n-th step's CSV (default 1, or 0 = final only with --until-converged)");
  vol->add_option("--out", vo.out, "Output directory")->required();

  CompareOptions co;
  auto* cmp = app.add_subcommand("compare", "Ratio of the exact steady-state volatility to sigma_a^2 tanh(g/2)");
  cmp->add_option("--g", co.g, "Drift per step")->required();
  cmp->add_option("--sigma-sweep", co.sweep, "Comma-separated noise variances sigma_a^2")->required();
  cmp->add_option("--steps", co.steps, "Maximum steps per point")->capture_default_str();
  cmp->add_option("--cells", co.cells, "Grid cells")->capture_default_str();
  cmp->add_option("--tol", co.tol, "L1 convergence tolerance")->capture_default_str();
  cmp->add_option("--out", co.out, "Output directory")->required();

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo paths of log cumulative production");
  sim->add_option("--g", so.g, "Drift per step")->required();
  sim->add_option("--noise", so.noise, "gaussian:sigma=S | lorentzian:gamma=G | table:PATH")->required();
  sim->add_option("--paths", so.paths, "Number of paths")->required();
  sim->add_option("--steps", so.steps, "Number of steps")->required();
  sim->add_option("--seed", so.seed, "Seed")->capture_default_str();
  sim->add_option("--against", so.against, "Directory of an evolve run to compare with (KS per step)");
  sim->add_option("--record", so.record,
                  "Comma-separated times to keep (default: every step, or only the last when paths x steps > 2e7)");
  sim->add_flag("--export-paths", so.export_paths, "Also write paths.csv (first 10000 paths)");
  sim->add_option("--out", so.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (evolve->parsed()) return run_evolve(ev, out);
    if (vol->parsed()) return run_volatility(vo, out);
    if (cmp->parsed()) return run_compare(co, out);
    if (sim->parsed()) return run_simulate(so, out);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed run directory: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cumvol
