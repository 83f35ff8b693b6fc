#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qpj/cli.hpp"
#include "qpj/error.hpp"

using namespace qpj;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "qpj");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qpj_test_cli_" + name);
}

const std::vector<std::string> kQuick = {"--orbit-length", "20000", "--phases", "16"};

std::vector<std::string> with_quick(std::vector<std::string> a) {
  a.insert(a.end(), kQuick.begin(), kQuick.end());
  return a;
}

}  // namespace

TEST_CASE("grid and complex syntax") {
  const auto g = cli::parse_grid("0:0.5:64");
  REQUIRE(g.size() == 64);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 0.5);
  CHECK(cli::parse_grid("-3:3:61")[30] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cli::parse_grid("0.25") == std::vector<double>{0.25});
  CHECK_THROWS_AS(cli::parse_grid("0:1"), Error);
  CHECK_THROWS_AS(cli::parse_grid("0:1:2.5"), Error);
  CHECK_THROWS_AS(cli::parse_grid("0:1:x"), Error);
  CHECK(cli::parse_complex("3,0") == cplx(3, 0));
  CHECK(cli::parse_complex("-1.5,2e-1") == cplx(-1.5, 0.2));
  CHECK(cli::parse_complex("2") == cplx(2, 0));
  CHECK_THROWS_AS(cli::parse_complex("1,2,3"), Error);
  CHECK(cli::format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("lyapunov on a zero potential file") {
  const auto path = temp_file("zero.txt");
  std::ofstream(path) << "# free operator\n0 0 0\n";
  const auto r = run({"lyapunov", "--potential", path.string(), "--alpha", "0.6180339887", "--energy", "3,0"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["version"] == cli::kVersion);
  CHECK(j["config"]["alpha"] == 0.6180339887);
  CHECK(std::abs(j["exponents"][0].get<double>() - std::log((3 + std::sqrt(5.0)) / 2)) < 1e-6);
  CHECK(std::abs(j["exponents"][0].get<double>() - 0.9624) < 1e-4);
}

TEST_CASE("jensen: amo(2) profile and summary") {
  const auto csv = temp_file("jensen.csv"), js = temp_file("jensen.json");
  const auto r = run(with_quick({"jensen", "--preset", "amo", "--lambda", "2", "--energy", "auto", "--eps", "0:0.5:64",
                                 "--csv", csv.string(), "--json", js.string()}));
  REQUIRE(r.code == 0);
  std::ifstream cf(csv);
  const auto rows = read_csv(std::string(std::istreambuf_iterator<char>(cf), {}));
  REQUIRE(rows.size() == 65);
  CHECK(rows[0] == std::vector<std::string>{"eps", "L_measured", "L_predicted", "stderr"});
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].size() == 4);
  std::ifstream jf(js);
  const auto j = json::parse(jf);
  CHECK(j["turning_points"].size() == 1);
  CHECK(j["slopes"] == json::array({1}));
  CHECK(j["sup_deviation"].get<double>() < 2e-2);
  CHECK(j.contains("config"));
}

TEST_CASE("classify: amo(1/2) is subcritical inside the spectrum") {
  const auto spec = run({"spectrum-approx", "--preset", "amo", "--lambda", "0.5"});
  REQUIRE(spec.code == 0);
  std::vector<std::pair<double, double>> iv;
  const auto srows = read_csv(spec.out);
  CHECK(srows[0] == std::vector<std::string>{"lo", "hi"});
  for (std::size_t i = 1; i < srows.size(); ++i) iv.emplace_back(std::stod(srows[i][0]), std::stod(srows[i][1]));
  REQUIRE_FALSE(iv.empty());

  const auto r = run(with_quick({"classify", "--preset", "amo", "--lambda", "0.5", "--energy-grid", "-3:3:61"}));
  REQUIRE(r.code == 0);
  const auto rows = read_csv(r.out);
  REQUIRE(rows.size() == 62);
  CHECK(rows[0] == std::vector<std::string>{"E", "L0", "Lhat1", "regime", "omega", "h", "uniform"});
  int inside = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double e = std::stod(rows[i][0]);
    bool in = false;
    for (auto [lo, hi] : iv) in = in || (e > lo + 0.05 && e < hi - 0.05);
    if (!in) continue;
    ++inside;
    CHECK(rows[i][3] == "Subcritical");
    CHECK(rows[i][4] == "0");
  }
  CHECK(inside > 10);
}

TEST_CASE("greens-check and winding emit JSON") {
  const auto g = run(with_quick({"greens-check", "--preset", "sem", "--energy", "1,1", "--eps", "0.05", "--truncation",
                                 "200", "--average-phases", "32"}));
  REQUIRE(g.code == 0);
  const auto j = json::parse(g.out);
  CHECK(j["strip"]["rce"].get<double>() < 1e-8);
  CHECK(j["dual_kernel"]["dense_difference"].get<double>() < 1e-8);
  CHECK(j["scalar"]["difference"].get<double>() < 1e-8);
  CHECK(j["duality"]["difference"].get<double>() < 1e-3);
  CHECK_FALSE(j["guard_band"]["inside"].get<bool>());

  // inside the guard band the eps-dependent checks are skipped
  const auto s = run(with_quick({"greens-check", "--preset", "sem", "--energy", "2,1", "--eps", "0.1"}));
  REQUIRE(s.code == 0);
  CHECK(json::parse(s.out)["duality"].contains("skipped"));

  const auto csv = temp_file("winding.csv");
  const auto w = run(with_quick({"winding", "--preset", "sem", "--eps", "0:0.3:4", "--size", "100", "--csv", csv.string()}));
  REQUIRE(w.code == 0);
  CHECK(json::parse(w.out)["results"].size() == 4);
  std::ifstream cf(csv);
  const auto rows = read_csv(std::string(std::istreambuf_iterator<char>(cf), {}));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0][0] == "eps");
  CHECK(rows[0][1] == "nu");
}

TEST_CASE("dual-spectrum and the analytic table") {
  const auto d = run(with_quick({"dual-spectrum", "--preset", "sem", "--energy", "2,1"}));
  REQUIRE(d.code == 0);
  const auto j = json::parse(d.out);
  CHECK(j["gamma"].size() == 2);
  CHECK(j["groups"].size() == 2);

  const auto t = run(with_quick({"dual-spectrum", "--analytic", "0.3", "--degrees", "1,2,3", "--energy", "0.5,0.8"}));
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out)["table"].size() == 3);
}

TEST_CASE("exit codes and error objects") {
  auto r = run({"jensen", "--eps", "0:1"});
  CHECK(r.code == cli::kConfigError);
  CHECK(json::parse(r.err)["error"] == "ParseError");

  r = run({"lyapunov", "--potential", "/nonexistent/v.txt"});
  CHECK(r.code == cli::kConfigError);

  r = run({"lyapunov", "--alpha", "0.5"});
  CHECK(r.code == cli::kConfigError);
  CHECK(json::parse(r.err)["error"] == "InvalidArgument");

  r = run({"lyapunov", "--no-such-flag"});
  CHECK(r.code == cli::kConfigError);

  r = run({});
  CHECK(r.code == cli::kConfigError);

  // numerical failure: far too coarse a theta grid
  r = run(with_quick({"winding", "--preset", "amo", "--lambda", "2", "--energy", "0,3", "--eps", "0", "--size", "50",
                      "--theta-steps", "100"}));
  CHECK(r.code == cli::kNumericalError);
  CHECK(json::parse(r.err)["error"] == "GridTooCoarse");

  r = run({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find(cli::kVersion) != std::string::npos);
}

TEST_CASE("determinism: byte-identical output across thread counts") {
  const std::vector<std::string> base = {"jensen", "--preset", "sem", "--lambda1", "0.4", "--lambda2", "0.2",
                                         "--eps", "0:0.5:20", "--orbit-length", "5000", "--phases", "8"};
  auto a = base, b = base;
  a.insert(a.end(), {"--threads", "1"});
  b.insert(b.end(), {"--threads", "3"});
  const auto ra = run(a), rb = run(b);
  REQUIRE(ra.code == 0);
  CHECK(ra.out == rb.out);
  CHECK(ra.out == run(a).out);
}

TEST_CASE("QPJ_SEED changes the phases and is echoed") {
  const std::vector<std::string> args = {"lyapunov", "--preset", "amo", "--lambda", "0.5", "--energy", "0.3,0",
                                         "--orbit-length", "2000", "--phases", "4"};
  const auto a = run(args);
  ::setenv("QPJ_SEED", "12345", 1);
  const auto b = run(args);
  ::unsetenv("QPJ_SEED");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(json::parse(b.out)["config"]["seed"] == 12345);
  CHECK(a.out != b.out);
}
