#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cumvol/cli.hpp"
#include "cumvol/io.hpp"

using namespace cumvol;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cumvol_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"evolve", "--noise", "gaussian:sigma=1", "--steps", "3", "--out", "/tmp/x"}).code, kExitUsage);
  const auto dir = fresh_dir("usage").string();
  EXPECT_EQ(run({"evolve", "--g", "0.2", "--noise", "gaussian:sigma=0", "--steps", "3", "--out", dir}).code,
            kExitUsage);
  EXPECT_EQ(run({"evolve", "--g", "0.2", "--noise", "gauss", "--steps", "3", "--out", dir}).code, kExitUsage);
  EXPECT_EQ(run({"evolve", "--g", "0.2", "--noise", "gaussian:sigma=1", "--steps", "0", "--out", dir}).code,
            kExitUsage);
  EXPECT_EQ(run({"evolve", "--g", "0.2", "--noise", "gaussian:sigma=1", "--steps", "3", "--grid", "0,1", "--out",
                 dir}).code,
            kExitUsage);
  EXPECT_EQ(run({"simulate", "--g", "0.2", "--noise", "gaussian:sigma=1", "--paths", "0", "--steps", "3", "--out",
                 dir}).code,
            kExitUsage);
  EXPECT_EQ(run({"compare", "--g", "0.1", "--sigma-sweep", "", "--out", dir}).code, kExitUsage);
}

TEST(Cli, HelpAndVersion) {
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
}

TEST(Cli, EvolveWritesDensitiesAndManifest) {
  const auto dir = fresh_dir("evolve");
  const auto r = run({"evolve", "--g", "0.2", "--noise", "gaussian:sigma=1", "--steps", "3", "--grid", "0,12,512",
                      "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto manifest = read_json(dir / "manifest.json");
  EXPECT_EQ(manifest.at("command"), "evolve");
  EXPECT_EQ(manifest.at("outputs").size(), 3u);
  for (const auto& f : manifest.at("outputs")) EXPECT_TRUE(fs::exists(dir / f.get<std::string>()));
  const auto table = read_density_csv(dir / "z_t00003.csv");
  ASSERT_EQ(table.x.size(), 512u);
  double mass = 0.0;
  for (double d : table.density) mass += d * 12.0 / 512.0;
  EXPECT_NEAR(mass, 1.0, 1e-9);
  EXPECT_EQ(slurp(dir / "z_t00001.csv").rfind("x,density\n", 0), 0u);
  for (const auto& entry : fs::directory_iterator(dir)) {
    EXPECT_EQ(entry.path().filename().string().find(".tmp"), std::string::npos);
  }
}

TEST(Cli, NarrowGridIsANumericalFailure) {
  const auto dir = fresh_dir("narrow");
  EXPECT_EQ(run({"evolve", "--g", "0.2", "--noise", "gaussian:sigma=1", "--steps", "5", "--grid", "0,1.5,256",
                 "--out", dir.string()})
                .code,
            kExitNumerical);
}

TEST(Cli, VolatilityDomainAndConvergence) {
  const auto dir = fresh_dir("vol");
  EXPECT_EQ(run({"volatility", "--g", "-0.1", "--noise", "gaussian:sigma=0.1", "--until-converged", "--out",
                 dir.string()})
                .code,
            kExitDomain);
  EXPECT_EQ(run({"volatility", "--g", "0.2", "--noise", "gaussian:sigma=0.5", "--steps", "4", "--until-converged",
                 "--out", dir.string()})
                .code,
            kExitNumerical);
  const auto ok = run({"volatility", "--g", "0.2", "--noise", "gaussian:sigma=0.1", "--until-converged", "--grid",
                       "0,5,2048", "--out", dir.string()});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  const auto report = read_json(dir / "volatility_report.json");
  EXPECT_NEAR(report.at("report").at("ratio").get<double>(), 1.0, 0.02);
  EXPECT_TRUE(fs::exists(dir / "dz_final.csv"));
  EXPECT_TRUE(fs::exists(dir / "y_final.csv"));
}

TEST(Cli, CompareWritesRatios) {
  const auto dir = fresh_dir("compare");
  EXPECT_EQ(run({"compare", "--g", "0", "--sigma-sweep", "0.01", "--out", dir.string()}).code, kExitDomain);
  const auto r = run({"compare", "--g", "0.1", "--sigma-sweep", "0.0025,0.01", "--cells", "2048", "--out",
                      dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = read_json(dir / "compare.json");
  ASSERT_EQ(j.at("points").size(), 2u);
  for (const auto& p : j.at("points")) EXPECT_NEAR(p.at("ratio").get<double>(), 1.0, 0.02);
  EXPECT_EQ(slurp(dir / "ratio.csv").rfind("sigma2,ratio,", 0), 0u);
}

TEST(Cli, SimulateIsReproducibleAndComparesWithEvolve) {
  const auto ev = fresh_dir("sim_ev");
  ASSERT_EQ(run({"evolve", "--g", "0.2", "--noise", "gaussian:sigma=1", "--steps", "5", "--out", ev.string()}).code,
            kExitOk);
  const auto a = fresh_dir("sim_a");
  const auto b = fresh_dir("sim_b");
  for (const auto& dir : {a, b}) {
    const auto r = run({"simulate", "--g", "0.2", "--noise", "gaussian:sigma=1", "--paths", "100000", "--steps", "5",
                        "--seed", "7", "--against", ev.string(), "--out", dir.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  const auto summary = read_json(a / "summary.json");
  ASSERT_EQ(summary.at("ks").size(), 5u);
  for (const auto& k : summary.at("ks")) EXPECT_LT(k.at("ks").get<double>(), 0.01);
  EXPECT_TRUE(fs::exists(a / "ks.csv"));
}

TEST(Cli, SimulateExportsPaths) {
  const auto dir = fresh_dir("sim_paths");
  ASSERT_EQ(run({"simulate", "--g", "0.1", "--noise", "lorentzian:gamma=1", "--paths", "10", "--steps", "4",
                 "--export-paths", "--out", dir.string()})
                .code,
            kExitOk);
  const auto csv = slurp(dir / "paths.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(NAN), "nan");
}

TEST(Io, DensityCsvRoundTrips) {
  const auto p = from_noise(GridSpec::make(-3.0, 3.0, 64), NoiseModel::gaussian(1.0));
  const auto path = fs::temp_directory_path() / "cumvol_roundtrip.csv";
  write_file_atomic(path, density_csv(p));
  const auto t = read_density_csv(path);
  ASSERT_EQ(t.density.size(), 64u);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(t.x[i], p.grid().node(i));
    EXPECT_EQ(t.density[i], p.value(i));
  }
}
