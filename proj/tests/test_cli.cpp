#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qiso/cli.hpp"

using namespace qiso;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
  Json json() const { return Json::parse(out); }
  Json error() const { return Json::parse(err); }
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qiso");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qiso_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Serialize, SpectrumJsonAndCsv) {
  const auto s = eigenvalues(Potential(), BoundaryCondition::robin(0.5, 2.0), 3);
  const auto j = to_json(s);
  EXPECT_EQ(j["schema"], "1");
  EXPECT_EQ(j["bc"]["kind"], "robin");
  EXPECT_EQ(j["bc"]["H"], 2.0);
  EXPECT_EQ(j["index_offset"], 0);
  const auto back = spectrum_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.eigenvalues, s.eigenvalues);
  EXPECT_EQ(back.bc.kind, BcKind::robin);
  std::ostringstream os;
  write_spectrum_csv(os, s);
  EXPECT_EQ(os.str().substr(0, 13), "index,lambda\n");
  EXPECT_EQ(csv_rows(os.str()).size(), 3u);
}

TEST(Serialize, CheckReportFields) {
  const auto j = to_json(make_check("x", 1.0, 1.5, 0.1));
  EXPECT_EQ(j["check"], "x");
  EXPECT_EQ(j["pass"], false);
  EXPECT_EQ(j["lhs"], 1.0);
  EXPECT_EQ(j["rhs"], 1.5);
  EXPECT_EQ(j["tolerance"], 0.1);
}

TEST(Cli, SpectrumCsv) {
  const auto r = run_cli({"spectrum", "--q", "0", "--bc", "dirichlet", "--m", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 13), "index,lambda\n");
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], 1.0);
  EXPECT_NEAR(rows[0][1], 9.8696044, 1e-7);
  EXPECT_NEAR(rows[1][1], 39.4784176, 1e-7);
}

TEST(Cli, SpectrumJsonWithGeneralBc) {
  const auto r = run_cli({"spectrum", "--q", "0", "--bc", "family", "--theta", "0.7853981633974483", "--m", "3",
                      "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  EXPECT_EQ(j["schema"], "1");
  EXPECT_EQ(j["bc"]["kind"], "general");
  EXPECT_NEAR(j["eigenvalues"][0].get<double>(), -1.0, 1e-8);
}

TEST(Cli, QuasiReport) {
  const auto r = run_cli({"quasi", "--q", "0", "--n", "1", "--t", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_NEAR(j["eigenvalues"][0]["lambda_p"].get<double>(), 14.8696044, 1e-7);
  for (const auto& c : j["checks"]) EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
}

TEST(Cli, QuasiArtifactsRoundTrip) {
  const auto dir = scratch("pair");
  const auto r = run_cli({"quasi", "--q", "2+sin(2*pi*x)", "--n", "1", "--t", "4", "--m", "12", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"potential_p.csv", "spectrum_q.json", "spectrum_p.json", "report.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  // the exported grid reproduces the spectrum in the report
  const auto p = read_potential_csv((dir / "potential_p.csv").string());
  const auto s = eigenvalues(p, BoundaryCondition::dirichlet(), 12);
  const auto report = r.json();
  for (const auto& row : report["eigenvalues"]) {
    EXPECT_NEAR(s.at(row["index"].get<int>()), row["lambda_p"].get<double>(), 1e-6);
  }
  const auto v = run_cli({"verify", "--pair", dir.string()});
  ASSERT_EQ(v.code, 0) << v.err << v.out;
  EXPECT_TRUE(v.json()["pass"].get<bool>());
  fs::remove_all(dir);
}

TEST(Cli, VerifyDetectsWrongPair) {
  const auto dir = scratch("wrong");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "p.csv");
    write_potential_csv(f, parse_potential("1"), 129, true);
  }
  const auto v = run_cli({"verify", "--q", "0", "--p-csv", (dir / "p.csv").string(), "--n", "1", "--t", "5", "--m", "5"});
  EXPECT_EQ(v.code, cli::kExitVerification);
  EXPECT_FALSE(v.json()["pass"].get<bool>());
  EXPECT_EQ(v.error()["error"]["category"], "verification");
  fs::remove_all(dir);
}

TEST(Cli, BcSweep) {
  const auto r = run_cli({"bc-sweep", "--q", "0", "--theta-grid", "16", "--m", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = r.json()["rows"];
  ASSERT_EQ(rows.size(), 16u);
  for (const auto& row : rows) {
    const double theta = row["theta"].get<double>();
    EXPECT_GT(theta, 0.0);
    EXPECT_LT(theta, pi / 2);
    const double cot = std::cos(theta) / std::sin(theta);
    EXPECT_NEAR(row["eigenvalues"][0].get<double>(), -cot * cot, 1e-7);
    for (int n = 1; n < 4; ++n) EXPECT_NEAR(row["eigenvalues"][n].get<double>(), n * n * pi * pi, 1e-7);
    EXPECT_NEAR(row["lambda0_determinant"].get<double>(), std::cos(theta) * std::cos(theta), 1e-10);
    EXPECT_FALSE(row["lambda0_is_eigenvalue"].get<bool>());
  }
}

TEST(Cli, HeatDetCoordsDarboux) {
  const auto heat = run_cli({"heat", "--q", "5*sin(pi*x)+2", "--t-grid", "1e-3,1e-2"});
  ASSERT_EQ(heat.code, 0) << heat.err;
  EXPECT_EQ(heat.json()["rows"].size(), 2u);
  EXPECT_LT(std::abs(heat.json()["rows"][0]["residual"].get<double>()), 1e-5);

  const auto det = run_cli({"det", "--q", "0", "--n", "2", "--t", "-3", "--t-grid", "log:1e-4:1:5"});
  ASSERT_EQ(det.code, 0) << det.err;
  EXPECT_NEAR(det.json()["determinant"]["value"].get<double>(), (4 * pi * pi - 3) / (4 * pi * pi), 1e-7);
  EXPECT_EQ(det.json()["rows"].size(), 5u);

  const auto coords = run_cli({"coords", "--q", "3", "--m", "4", "--format", "csv"});
  ASSERT_EQ(coords.code, 0) << coords.err;
  for (const auto& row : csv_rows(coords.out)) EXPECT_NEAR(row[1], 0.0, 1e-8);

  const auto dar = run_cli({"darboux", "--q", "0", "--mu", "-1"});
  ASSERT_EQ(dar.code, 0) << dar.err;
  EXPECT_NEAR(dar.json()["transformed"]["at_0"].get<double>(), -2.0, 1e-9);

  const auto robin = run_cli({"darboux", "--q", "0", "--bc", "robin", "--h", "1", "--H", "1", "--m", "6"});
  ASSERT_EQ(robin.code, 0) << robin.err;
  EXPECT_TRUE(robin.json()["pairs"][0]["dirichlet"].is_null());
  EXPECT_TRUE(robin.json()["pass"].get<bool>());
}

TEST(Cli, OutputFileAndDefaultGrid) {
  const auto dir = scratch("heatfile");
  const auto file = dir / "heat.csv";
  const auto r = run_cli({"heat", "--q", "1", "--format", "csv", "--out", file.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(csv_rows(ss.str()).size(), 13u);
  fs::remove_all(dir);
}

TEST(Cli, Deterministic) {
  const std::vector<std::string> args{"quasi", "--q", "x*(1-x)", "--n", "2", "--t", "3", "--m", "8"};
  EXPECT_EQ(run_cli(args).out, run_cli(args).out);
  setenv("QISO_THREADS", "3", 1);
  const auto threaded = run_cli(args);
  unsetenv("QISO_THREADS");
  EXPECT_EQ(threaded.out, run_cli(args).out);
}

TEST(Cli, UsageErrors) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"bogus"},
           {"spectrum"},
           {"spectrum", "--q", "0", "--q-csv", "a.csv"},
           {"spectrum", "--q", "0", "--m", "501"},
           {"spectrum", "--q", "1/(x-0.5)"},
           {"spectrum", "--q", "sin("},
           {"spectrum", "--q", "0", "--format", "xml"},
           {"quasi", "--q", "0", "--n", "1", "--t", "20000"},
           {"quasi", "--q", "0", "--n", "1"},
           {"heat", "--q", "0", "--t-grid", "0.1,-1"},
           {"spectrum", "--q-csv", "/nonexistent/q.csv"},
       }) {
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, cli::kExitUsage) << (args.empty() ? "" : args[0]) << " " << r.err;
    EXPECT_EQ(r.error()["schema"], "1");
    EXPECT_EQ(r.error()["error"]["category"], "usage");
  }
  setenv("QISO_THREADS", "zero", 1);
  EXPECT_EQ(run_cli({"spectrum", "--q", "0"}).code, cli::kExitUsage);
  unsetenv("QISO_THREADS");
}

TEST(Cli, NumericalErrorRemovesArtifacts) {
  const auto dir = scratch("gap");
  const auto r = run_cli({"quasi", "--q", "0", "--n", "1", "--t", "40", "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kExitNumerical);
  EXPECT_EQ(r.error()["error"]["code"], "gap_violation");
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, HelpExitsCleanly) {
  const auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("quasi"), std::string::npos);
}

TEST(Cli, TGridParsing) {
  const auto g = cli::parse_t_grid("log:1e-4:1:13");
  ASSERT_EQ(g.size(), 13u);
  EXPECT_NEAR(g.front(), 1e-4, 1e-18);
  EXPECT_NEAR(g.back(), 1.0, 1e-14);
  EXPECT_NEAR(g[3], 1e-3, 1e-15);
  EXPECT_EQ(cli::parse_t_grid("0.5,0.25").size(), 2u);
  EXPECT_THROW(cli::parse_t_grid("log:1:2"), InvalidArgument);
  EXPECT_THROW(cli::parse_t_grid("a,b"), InvalidArgument);
}
