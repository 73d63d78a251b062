#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support/scenarios.hpp"
#include "topp3/cli.hpp"
#include "topp3/error.hpp"
#include "topp3/scenario.hpp"

using namespace topp3;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("topp3_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string write_scenario(const TempDir& dir, const Scenario& sc,
                           const char* name = "scenario.json") {
  const fs::path p = dir.path / name;
  std::ofstream out(p);
  out << scenario_to_json(sc);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("scenario: JSON round trip") {
  const auto sc = testing::one_singularity_2dof();
  const std::string text = scenario_to_json(sc);
  const Scenario back = load_scenario(text);
  CHECK(back.path->n_dof() == 2);
  CHECK(back.path->s_end() == 1.0);
  CHECK(back.jerk_min[1] == doctest::Approx(-2000.0));
  CHECK(back.jerk_max[1] == doctest::Approx(150.0));
  CHECK((back.bc.v_end - sc.bc.v_end).norm() <= 1e-12);
  CHECK(scenario_to_json(back) == text);
}

TEST_CASE("scenario: schema errors name the offending key") {
  const auto sc = testing::line_1dof(100.0);
  json j = json::parse(scenario_to_json(sc));

  SUBCASE("missing boundary") {
    j.erase("boundary");
    try {
      load_scenario(j.dump());
      FAIL("expected SchemaError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaError);
      CHECK(std::string(e.what()).find("boundary") != std::string::npos);
    }
  }
  SUBCASE("missing jerk bounds") {
    j["constraints"].erase("jerk_max");
    try {
      load_scenario(j.dump());
      FAIL("expected SchemaError");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("jerk_max") != std::string::npos);
    }
  }
  SUBCASE("velocity limits are rejected with a clear message") {
    j["constraints"]["vel_max"] = {1.0};
    try {
      load_scenario(j.dump());
      FAIL("expected SchemaError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaError);
      CHECK(std::string(e.what()).find("vel_max") != std::string::npos);
      CHECK(std::string(e.what()).find("third-order") != std::string::npos);
    }
  }
  SUBCASE("bad version") {
    j["schema"] = 2;
    CHECK_THROWS_AS(load_scenario(j.dump()), Error);
  }
  SUBCASE("invalid JSON") {
    CHECK_THROWS_AS(load_scenario("{not json"), Error);
  }
}

TEST_CASE("trajectory csv: round trip") {
  const auto sc = testing::line_1dof(100.0);
  const auto sol = solve(sc.problem());
  REQUIRE(sol.ok());
  const auto samples = to_trajectory(sol, *sc.path, 1e-2);
  std::stringstream ss;
  write_trajectory_csv(ss, samples);
  const auto back = read_trajectory_csv(ss);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == doctest::Approx(samples[i].t).epsilon(1e-10));
    CHECK(back[i].s == doctest::Approx(samples[i].s).epsilon(1e-10));
    CHECK(back[i].q[0] == doctest::Approx(samples[i].q[0]).epsilon(1e-10));
  }
}

TEST_CASE("cli: solve writes the solution bundle and exits 0") {
  TempDir dir;
  const auto sc = testing::line_1dof(100.0);
  const std::string scenario = write_scenario(dir, sc);
  const fs::path out = dir.path / "out";
  const int rc =
      cli::run({"solve", scenario, "-o", out.string()});
  CHECK(rc == 0);
  const json sol = json::parse(slurp(out / "solution.json"));
  CHECK(sol["status"] == "ok");
  REQUIRE(sol["structure"].size() == 3);
  CHECK(sol["structure"][0] == "max");
  CHECK(sol["structure"][1] == "min");
  CHECK(sol["structure"][2] == "max");
  CHECK(fs::exists(out / "trajectory.csv"));
  CHECK(fs::exists(out / "piece_0_max.csv"));

  SUBCASE("check accepts the emitted trajectory") {
    const int rc2 = cli::run(
        {"check", (out / "trajectory.csv").string(), scenario});
    CHECK(rc2 == 0);
  }
  SUBCASE("reruns are byte-identical") {
    const std::string first = slurp(out / "trajectory.csv");
    const std::string sol1 = slurp(out / "solution.json");
    const int rc2 = cli::run({"solve", scenario, "-o", out.string()});
    CHECK(rc2 == 0);
    CHECK(slurp(out / "trajectory.csv") == first);
    CHECK(slurp(out / "solution.json") == sol1);
  }
}

TEST_CASE("cli: malformed scenario exits 3 naming the key") {
  TempDir dir;
  const auto sc = testing::line_1dof(100.0);
  json j = json::parse(scenario_to_json(sc));
  j.erase("boundary");
  const fs::path p = dir.path / "bad.json";
  {
    std::ofstream out(p);
    out << j.dump();
  }
  const int rc = cli::run({"solve", p.string(), "-o", (dir.path / "o").string()});
  CHECK(rc == 3);
}

TEST_CASE("cli: profiles and singular dumps") {
  TempDir dir;
  const auto sc = testing::parabola_1dof(100.0);
  const std::string scenario = write_scenario(dir, sc);
  const fs::path out = dir.path / "out";
  CHECK(cli::run({"profiles", scenario, "-o", out.string()}) == 0);
  CHECK(fs::exists(out / "profile_forward.csv"));
  CHECK(fs::exists(out / "profile_backward.csv"));
  const std::string fwd = slurp(out / "profile_forward.csv");
  CHECK(fwd.find("t,s,sd,sdd,sddd,policy") == 0);
  CHECK(fwd.find("# termination:") != std::string::npos);

  CHECK(cli::run({"singular", scenario, "-o", out.string()}) == 0);
  const std::string sing = slurp(out / "singularities.csv");
  CHECK(sing.find("s_star,k,side,sd,sdd") == 0);
  CHECK(sing.find("0.5,0,max") != std::string::npos);
  CHECK(sing.find("0.5,1,min") != std::string::npos);
}

TEST_CASE("cli: oracle-compare writes a report") {
  TempDir dir;
  const auto sc = testing::curved_2dof();
  const std::string scenario = write_scenario(dir, sc);
  const fs::path out = dir.path / "out";
  CHECK(cli::run({"oracle-compare", scenario, "-o", out.string()}) == 0);
  const json rep = json::parse(slurp(out / "oracle_report.json"));
  REQUIRE(rep.is_array());
  CHECK(rep[0]["method"] == "single-shooting");
  CHECK(std::abs(rep[0]["delta_relative"].get<double>()) <= 0.005);
}

TEST_CASE("cli: jerk-scale flag shortens the duration") {
  TempDir dir;
  const auto sc = testing::curved_2dof();
  const std::string scenario = write_scenario(dir, sc);
  const fs::path out1 = dir.path / "o1";
  const fs::path out2 = dir.path / "o2";
  REQUIRE(cli::run({"solve", scenario, "-o", out1.string()}) == 0);
  REQUIRE(cli::run({"solve", scenario, "-o", out2.string(), "--jerk-scale",
                    "10"}) == 0);
  const double t1 = json::parse(slurp(out1 / "solution.json"))["duration"];
  const double t2 = json::parse(slurp(out2 / "solution.json"))["duration"];
  CHECK(t2 < t1);
}

TEST_CASE("scenario: piecewise paths round-trip through JSON") {
  Scenario sc;
  JointPolynomial j;
  j.breakpoints = {0.0, 0.5, 1.0};
  j.pieces = {{0.0, 1.0}, {0.5, 1.0}};  // C1 line split in two
  sc.path = std::make_shared<PathSpec>(std::vector<JointPolynomial>{j}, 1.0, 1);
  sc.jerk_min = Vector::Constant(1, -100.0);
  sc.jerk_max = Vector::Constant(1, 100.0);
  testing::set_boundary(sc, 0.5, 0.0, 0.5, 0.0);
  const Scenario back = load_scenario(scenario_to_json(sc));
  CHECK(back.path->joints()[0].breakpoints.size() == 3);
  CHECK(back.path->derivative(0.75, 0)[0] == doctest::Approx(0.75));
  const auto sol = solve(back.problem());
  CHECK(sol.ok());
}

TEST_CASE("cli: check exits 2 on a violating trajectory") {
  TempDir dir;
  const auto sc = testing::line_1dof(100.0);
  const std::string scenario = write_scenario(dir, sc);
  const fs::path out = dir.path / "out";
  REQUIRE(cli::run({"solve", scenario, "-o", out.string()}) == 0);
  // inflate every jerk column entry beyond the bound
  std::stringstream tampered;
  std::ifstream in(out / "trajectory.csv");
  std::string line;
  std::getline(in, line);
  tampered << line << "\n";
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    tampered << line.substr(0, last) << ",150\n";
  }
  const fs::path bad = dir.path / "bad.csv";
  {
    std::ofstream o(bad);
    o << tampered.str();
  }
  CHECK(cli::run({"check", bad.string(), scenario}) == 2);
}
