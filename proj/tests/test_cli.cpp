#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lumpcheck/cli.hpp"
#include "pairs.hpp"

using namespace lumpcheck;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lumpcheck_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string data(const std::string& rel) { return (fs::path(LUMPCHECK_DATA_DIR) / rel).string(); }

std::vector<double> column(const std::string& csv, int col) {
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::vector<double> v;
  while (std::getline(ss, line)) {
    std::stringstream row(line);
    std::string cell;
    for (int c = 0; c <= col; ++c) std::getline(row, cell, ',');
    v.push_back(std::stod(cell));
  }
  return v;
}

// Writes a matched pair (optionally with the LPM masses scaled) into `dir`.
void write_pair(const fs::path& dir, Index elements, double lpm_mass_scale = 1.0) {
  auto pair = lumpcheck::testing::unit_bar_pair(elements, InputSignal::step(1.0, 4.0));
  for (auto& m : pair.lpm.masses) m.value *= lpm_mass_scale;
  write(dir / "lpm.json", lpm_to_json(pair.lpm));
  save_dpm(dir, pair.dpm);
}

}  // namespace

TEST(Cli, MatchedPairIsConsistent) {
  const auto out = scratch("matched");
  const CliRun r = cli({"check", data("bar_pair/lpm.json"), data("bar_pair/dpm.json"), "--tol", "0.05",
                     "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(fs::exists(out / "summary.txt"));
  const std::string report = slurp(out / "report.json");
  EXPECT_NE(report.find("\"verdict\": \"consistent\""), std::string::npos) << report;
  const std::string csv = slurp(out / "error_decay.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rom_order,eps1,eps2,eps_rel");
  const auto eps1 = column(csv, 1);
  ASSERT_FALSE(eps1.empty());
  for (std::size_t k = 1; k < eps1.size(); ++k) EXPECT_LT(eps1[k], eps1[k - 1]);
}

TEST(Cli, ValidationWritesBothTrajectories) {
  const auto dir = scratch("validate");
  write_pair(dir, 150);
  const CliRun r = cli({"check", (dir / "lpm.json").string(), (dir / "dpm.json").string(),
                     "--validate", "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const std::string report = slurp(dir / "report.json");
  EXPECT_NE(report.find("\"contained\": true"), std::string::npos) << report;
  const std::string d = slurp(dir / "trajectory_dpm.csv");
  const std::string l = slurp(dir / "trajectory_lpm.csv");
  EXPECT_EQ(d.substr(0, d.find('\n')), "t,y1");
  EXPECT_EQ(column(d, 0), column(l, 0));
}

TEST(Cli, MassMismatchFailsC1) {
  const auto dir = scratch("mass");
  write_pair(dir, 40, 1.5);
  const CliRun r = cli({"check", (dir / "lpm.json").string(), (dir / "dpm.json").string(), "--out",
                     dir.string()});
  EXPECT_EQ(r.code, 1) << r.out << r.err;
  const std::string report = slurp(dir / "report.json");
  EXPECT_NE(report.find("\"C1\""), std::string::npos) << report;
  EXPECT_NE(r.out.find("C1"), std::string::npos);
}

TEST(Cli, MissingManifestIsAnError) {
  const auto dir = scratch("missing");
  const CliRun r = cli({"check", data("bar_pair/lpm.json"), (dir / "nope.json").string(), "--out",
                     dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "report.json"));
}

TEST(Cli, ReduceMeetsTargetOnLargeBar) {
  const auto dir = scratch("reduce");
  write_pair(dir, 1000);
  const CliRun r = cli({"reduce", (dir / "dpm.json").string(), "--target", "0.01", "--out",
                     dir.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const std::string csv = slurp(dir / "error_decay.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rom_order,eps1,eps_rel");
  const auto eps1 = column(csv, 1);
  const auto rel = column(csv, 2);
  ASSERT_FALSE(eps1.empty());
  for (std::size_t k = 1; k < eps1.size(); ++k) EXPECT_LT(eps1[k], eps1[k - 1]);
  EXPECT_LE(rel.back(), 0.01);
  const RomFamily family = load_rom_family(dir / "rom_family");
  EXPECT_TRUE(family.target_met);
  EXPECT_EQ(family.steps.size(), eps1.size());
}

TEST(Cli, UnreachableTargetIsFlagged) {
  const auto dir = scratch("unreachable");
  const CliRun r = cli({"reduce", data("bar_pair/dpm.json"), "--target", "1e-9", "--max-order", "4",
                     "--out", dir.string()});
  EXPECT_EQ(r.code, 1) << r.out << r.err;
  EXPECT_NE(r.out.find("NOT met"), std::string::npos);
  EXPECT_FALSE(load_rom_family(dir / "rom_family").target_met);
}

TEST(Cli, UnstableModelIsAnError) {
  const auto dir = scratch("unstable");
  write(dir / "dpm.json", R"({"format": 1,
    "bar": {"length": 1, "area": 1, "youngs_modulus": 1, "density": 1, "elements": 8,
            "alpha": 0, "beta": 0},
    "signals": [{"id": "f1", "kind": "step", "amplitude": 1, "horizon": 1}],
    "inputs": ["f1"]})");
  CliRun r = cli({"reduce", (dir / "dpm.json").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("is_stable"), std::string::npos) << r.err;
  r = cli({"h2", (dir / "dpm.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("is_stable"), std::string::npos) << r.err;
}

TEST(Cli, SimulateZeroSignalAndDcGain) {
  const auto dir = scratch("simulate");
  CliRun r = cli({"simulate", data("oscillator.json"), "--signal", "zero", "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  for (double y : column(slurp(dir / "trajectory.csv"), 1)) EXPECT_EQ(y, 0.0);

  // Unit bar, unit tip force: static tip displacement F L / (E A) = 1.
  write_pair(dir, 20);
  r = cli({"simulate", (dir / "dpm.json").string(), "--signal", "step:amplitude=1", "--dt", "0.05",
           "--horizon", "40", "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir / "trajectory.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,y1");
  EXPECT_NEAR(column(csv, 1).back(), 1.0, 1e-6);
}

TEST(Cli, SimulateRejectsNonPositiveStep) {
  const auto dir = scratch("dt");
  EXPECT_EQ(cli({"simulate", data("oscillator.json"), "--dt", "0", "--out", dir.string()}).code, 2);
  EXPECT_EQ(cli({"simulate", data("oscillator.json"), "--dt", "-1", "--out", dir.string()}).code, 2);
  EXPECT_EQ(cli({"simulate", data("oscillator.json"), "--horizon", "0", "--out", dir.string()}).code,
            2);
}

TEST(Cli, H2OfTheUnitOscillator) {
  CliRun r = cli({"h2", data("oscillator.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 9), "0.7071067");
  EXPECT_NEAR(std::stod(r.out), 1.0 / std::sqrt(2.0), 1e-14);
  r = cli({"h2", data("oscillator.json"), data("oscillator.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(r.out), 0.0);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"check", data("bar_pair/lpm.json")}).code, 2);
  EXPECT_EQ(cli({"reduce", data("bar_pair/dpm.json"), "--target", "abc"}).code, 2);
  EXPECT_EQ(cli({"reduce", data("bar_pair/dpm.json"), "--target", "1.5"}).code, 2);
  EXPECT_EQ(cli({"check", data("bar_pair/lpm.json"), data("bar_pair/dpm.json"), "--tol", "0"}).code,
            2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, RerunsAreBitIdentical) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  const std::vector<std::string> files{"report.json", "summary.txt", "error_decay.csv",
                                       "trajectory_dpm.csv", "trajectory_lpm.csv"};
  ASSERT_EQ(cli({"check", data("bar_pair/lpm.json"), data("bar_pair/dpm.json"), "--validate",
                 "--out", a.string()}).code, 0);
  ::setenv(kThreadsEnv, "3", 1);
  EXPECT_EQ(threads_from_env(), 3);
  ASSERT_EQ(cli({"check", data("bar_pair/lpm.json"), data("bar_pair/dpm.json"), "--validate",
                 "--out", b.string()}).code, 0);
  ::unsetenv(kThreadsEnv);
  for (const auto& f : files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, ThreadCountFromEnvironment) {
  ::unsetenv(kThreadsEnv);
  EXPECT_EQ(threads_from_env(), 1);
  ::setenv(kThreadsEnv, "junk", 1);
  EXPECT_EQ(threads_from_env(), 1);
  ::setenv(kThreadsEnv, "0", 1);
  EXPECT_EQ(threads_from_env(), 1);
  ::setenv(kThreadsEnv, "4", 1);
  EXPECT_EQ(threads_from_env(), 4);
  ::unsetenv(kThreadsEnv);
}
