#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "ngmix/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = ngmix::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) out.push_back(c);
  return out;
}

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::current_path() / "cli_work") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({
  "schema_version": 1,
  "model": {"fixed": ["1", "time", "x1"], "random": ["1"],
            "noise": {"family": "nig", "nu": 2.0},
            "random_effects": {"family": "normal"},
            "process": {"kind": "exponential", "family": "normal", "kappa0": 1.0}},
  "iters": 60, "warmup": 10, "init_sweeps": 5, "louis_draws": 40, "seed": 3,
  "simulate": {"subjects": 30, "n_per_subject": 4, "t_max": 4,
               "covariates": {"x1": {"kind": "bernoulli", "p": 0.5}},
               "truth": {"beta": [1.0, -0.2, 0.5], "sigma": 0.5, "Sigma": 1.0, "kappa": 1.0, "nu_z": 2.0}},
  "predict": {"mode": "nowcast", "draws": 60, "burn_in": 5, "criterion": {"threshold": 0.05, "window": 1.0}}
})";
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  Run r = run({"fit", "--config", "a.json", "--data", "d.csv", "--out", "o", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("ngmix fit: error:") != std::string::npos);
  r = run({"frobnicate"});
  CHECK(r.code == 2);
  r = run({"egfr", "--scr", "88.4"});
  CHECK(r.code == 2);
  r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1 and one line") {
  Workspace ws;
  Run r = run({"fit", "--config", ws / "missing.json", "--data", ws / "d.csv", "--out", ws / "o"});
  CHECK(r.code == 1);
  CHECK(lines(r.err).size() == 1);
  CHECK(r.err.rfind("ngmix fit: error: ", 0) == 0);
  r = run({"egfr", "--scr", "-1", "--age", "50"});
  CHECK(r.code == 1);
  r = run({"tv", "--grid", "1:10"});
  CHECK(r.code != 0);
}

TEST_CASE("egfr") {
  const Run r = run({"egfr", "--scr", "88.4", "--age", "50"});
  CHECK(r.code == 0);
  CHECK(std::stod(r.out) == doctest::Approx(79.09).epsilon(1e-3));
}

TEST_CASE("tv curve has one row per grid point") {
  Workspace ws;
  const Run r = run({"tv", "--family", "nig", "--grid", "0.001:250:50", "--out", ws / "tv.csv"});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(ws / "tv.csv"));
  REQUIRE(rows.size() == 51);
  CHECK(rows[0] == "a,tv_cauchy,tv_gaussian");
  CHECK(std::stod(cells(rows[1])[0]) == doctest::Approx(0.001));
  CHECK(std::stod(cells(rows[50])[0]) == doctest::Approx(250.0));
  double prev_c = -1, prev_g = 2;
  for (int k = 1; k <= 50; ++k) {
    const auto c = cells(rows[k]);
    const double tc = std::stod(c[1]), tg = std::stod(c[2]);
    CHECK(tc >= 0.0);
    CHECK(tg <= 1.0);
    CHECK(tc >= prev_c - 1e-6);
    CHECK(tg <= prev_g + 1e-6);
    prev_c = tc;
    prev_g = tg;
  }
}

TEST_CASE("simulate, fit and predict end to end") {
  Workspace ws;
  Run r = run({"simulate", "--config", ws / "cfg.json", "--out", ws / "d.csv", "--seed", "5"});
  REQUIRE(r.code == 0);
  r = run({"simulate", "--config", ws / "cfg.json", "--out", ws / "d2.csv", "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(slurp(ws / "d.csv") == slurp(ws / "d2.csv"));
  r = run({"simulate", "--config", ws / "cfg.json", "--out", ws / "d3.csv", "--seed", "6", "--subjects", "7"});
  REQUIRE(r.code == 0);
  CHECK(ngmix::read_table(ws / "d3.csv").rows() == 28);

  r = run({"fit", "--config", ws / "cfg.json", "--data", ws / "d.csv", "--out", ws / "res", "--threads", "2"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto params = nlohmann::json::parse(slurp(ws / "res/params.json"));
  const auto& names = params["names"];
  CHECK(names.size() == params["estimate"].size());
  CHECK(names[0] == "beta.(Intercept)");
  const auto& lo = params["p_lower"];
  const auto& hi = params["p_upper"];
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (lo[i].is_number() && hi[i].is_number()) CHECK(lo[i].get<double>() <= hi[i].get<double>());
  const auto fe = lines(slurp(ws / "res/fixed_effects.csv"));
  CHECK(fe.size() == 4);
  CHECK(cells(fe[3])[0] == "x1");
  CHECK(lines(slurp(ws / "res/trace.csv")).size() == 61);

  const ngmix::StoredFit stored = ngmix::read_params(ws / "res/params.json");
  CHECK(stored.params.beta(0) == params["estimate"][0].get<double>());

  r = run({"predict", "--params", ws / "res/params.json", "--data", ws / "d.csv", "--out", ws / "p.csv", "--config",
           ws / "cfg.json"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto pred = lines(slurp(ws / "p.csv"));
  CHECK(pred[0] == "subject_id,time,mode,mean,median,q05,q95,excursion_prob");
  CHECK(pred.size() == 1 + 120);
  for (std::size_t k = 1; k < pred.size(); ++k) {
    const auto c = cells(pred[k]);
    REQUIRE(c.size() == 8);
    CHECK(c[2] == "nowcast");
    CHECK(std::stod(c[5]) <= std::stod(c[6]));
  }

  std::ofstream(ws / "h.csv") << "subject_id,time,x1\ns01,4.5,1\ns01,5.0,1\ns02,6.0,0\n";
  r = run({"predict", "--params", ws / "res/params.json", "--data", ws / "d.csv", "--out", ws / "f.csv", "--horizon",
           ws / "h.csv", "--mode", "forecast", "--draws", "40", "--threshold", "0.1", "--window", "0.5"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto fc = lines(slurp(ws / "f.csv"));
  REQUIRE(fc.size() == 4);
  CHECK(cells(fc[1])[0] == "s01");
  CHECK(cells(fc[1])[2] == "forecast");
  CHECK(cells(fc[3])[1] == "6");
}
