#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "ngmix/errors.hpp"
#include "ngmix/io.hpp"

using namespace ngmix;
namespace fs = std::filesystem;

namespace {

const char* kTable =
    "subject_id,time,y,age,female\n"
    "b,2.0,1.5,60,1\n"
    "a,1.0,NA,50,0\n"
    "a,0.0,2.5,50,0\n"
    "\n"
    "b,0.5,1.0,60,1\r\n"
    "a,3.0,2.0,50,0\n";

const char* kConfig = R"({
  "schema_version": 1,
  "model": {"fixed": ["1", "time", "age"], "random": ["1"],
            "noise": {"family": "nig", "nu": 2.0},
            "random_effects": {"family": "normal"},
            "process": {"kind": "exponential", "family": "nig", "nu": 1.5, "kappa0": 0.7, "mesh_nodes": 12}},
  "iters": 40, "burn_in": 10, "alpha0": 0.8, "gamma": 0.7, "warmup": 5, "init_sweeps": 3,
  "louis_draws": 0, "seed": 11, "threads": 2,
  "subsample": {"strategy": "grouped", "M": 8, "r": 2},
  "gibbs": {"sweeps": 2, "warm_start": true},
  "switch": {"to_gaussian_above": 100, "to_cauchy_below": 0.01},
  "simulate": {"subjects": 12, "n_per_subject": 4, "t_max": 3,
               "covariates": {"age": {"kind": "normal", "mean": 50, "sd": 5}},
               "truth": {"beta": {"1": 1.0, "time": -0.2, "age": 0.01}, "sigma": 0.4, "Sigma": 0.6, "kappa": 0.7}},
  "predict": {"mode": "forecast", "cut": 2.0, "draws": 50, "criterion": {"threshold": 0.1, "window": 0.5}}
})";

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("ngmix_io_" + std::to_string(::getpid()) + "_" + std::to_string(rand()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse a long table") {
  const LongTable t = parse_table(kTable, "mem");
  CHECK(t.rows() == 5);
  CHECK(t.columns == std::vector<std::string>{"age", "female"});
  CHECK(t.column("female") == 1);
  CHECK(t.column("y") == -1);
  CHECK(std::isnan(t.y[1]));
  CHECK(t.line[3] == 6);
  CHECK(t.time[3] == 0.5);
  CHECK(t.cov[0][0] == 60.0);

  const LongTable no_y = parse_table("subject_id,time\nx,1\n", "mem", false);
  CHECK(std::isnan(no_y.y[0]));
  CHECK_THROWS_AS(parse_table("subject_id,time\nx,1\n", "mem"), IoError);
  CHECK_THROWS_AS(parse_table("", "mem"), IoError);
  CHECK_THROWS_AS(parse_table("subject_id,time,y\nx,1\n", "mem"), IoError);
  CHECK_THROWS_AS(parse_table("subject_id,time,y\nx,abc,1\n", "mem"), IoError);
  CHECK_THROWS_AS(parse_table("subject_id,time,y,a,a\nx,1,1,1,1\n", "mem"), IoError);
  CHECK_THROWS_AS(parse_table("subject_id,time,y\n,1,1\n", "mem"), IoError);
}

TEST_CASE("build a dataset") {
  const LongTable t = parse_table(kTable, "mem");
  const Dataset d = build_dataset(t, {{"1", "time", "age"}, {"1", "female"}}, "mem");
  CHECK(d.dropped_missing == 1);
  REQUIRE(d.subjects.size() == 2);
  CHECK(d.subjects[0].id == "a");
  CHECK(d.subjects[0].times == Eigen::Vector2d(0.0, 3.0));
  CHECK(d.subjects[0].y == Eigen::Vector2d(2.5, 2.0));
  CHECK(d.subjects[1].times == Eigen::Vector2d(0.5, 2.0));
  CHECK(d.subjects[1].x.row(1) == Eigen::RowVector3d(1.0, 2.0, 60.0));
  CHECK(d.subjects[1].d.row(0) == Eigen::RowVector2d(1.0, 1.0));
  CHECK(d.fixed_names == std::vector<std::string>{"1", "time", "age"});

  const Dataset kept = build_dataset(t, {}, "mem", true);
  CHECK(kept.subjects[0].n() == 3);
  CHECK(kept.subjects[0].x.cols() == 1);
  CHECK(kept.subjects[0].d.cols() == 0);

  try {
    build_dataset(t, {{"1", "weight"}, {}}, "data.csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()) == "data.csv: missing column 'weight'");
  }
  const LongTable dup = parse_table("subject_id,time,y\na,1,1\nb,1,1\na,1,2\n", "d.csv");
  try {
    build_dataset(dup, {}, "d.csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(a, 1)") != std::string::npos);
    CHECK(msg.find("lines 2 and 4") != std::string::npos);
  }
  const LongTable hole = parse_table("subject_id,time,y,age\na,1,1,NA\n", "h.csv");
  CHECK_THROWS_AS(build_dataset(hole, {{"1", "age"}, {}}, "h.csv"), IoError);
}

TEST_CASE("row order does not change the dataset") {
  const LongTable t = parse_table(kTable, "mem");
  std::string shuffled = "subject_id,time,y,age,female\na,3.0,2.0,50,0\nb,0.5,1.0,60,1\na,0.0,2.5,50,0\nb,2.0,1.5,60,1\n";
  const Dataset a = build_dataset(t, {{"1", "time"}, {"1"}}, "mem");
  const Dataset b = build_dataset(parse_table(shuffled, "mem"), {{"1", "time"}, {"1"}}, "mem");
  REQUIRE(a.subjects.size() == b.subjects.size());
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    CHECK(a.subjects[i].id == b.subjects[i].id);
    CHECK(a.subjects[i].times == b.subjects[i].times);
    CHECK(a.subjects[i].y == b.subjects[i].y);
    CHECK(a.subjects[i].x == b.subjects[i].x);
  }
}

TEST_CASE("table round trip") {
  TempDir dir;
  const LongTable t = parse_table(kTable, "mem");
  const std::string path = (dir.path / "t.csv").string();
  write_table(path, t);
  const LongTable back = read_table(path);
  CHECK(back.rows() == t.rows());
  CHECK(back.columns == t.columns);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    CHECK(back.subject[r] == t.subject[r]);
    CHECK(back.time[r] == t.time[r]);
    CHECK((back.y[r] == t.y[r] || (std::isnan(back.y[r]) && std::isnan(t.y[r]))));
    CHECK(back.cov[r] == t.cov[r]);
  }
  CHECK_THROWS_AS(read_table((dir.path / "missing.csv").string()), IoError);
}

TEST_CASE("configuration") {
  const RunConfig c = parse_config(kConfig, "cfg.json");
  CHECK(c.model.formula.fixed.size() == 3);
  CHECK(c.model.noise.family == Family::NIG);
  CHECK(c.model.noise.nu == 2.0);
  CHECK(c.model.process == ProcessKind::Exponential);
  CHECK(c.model.kappa0 == 0.7);
  CHECK(c.model.grid.mesh_nodes == 12);
  CHECK(c.fit.schedule.total_iters == 40);
  CHECK(c.fit.schedule.burn_in == 10);
  CHECK(c.fit.schedule.gamma == 0.7);
  CHECK(c.fit.subsample.strategy == SubsampleStrategy::Grouped);
  CHECK(c.fit.subsample.M == 8);
  CHECK(c.fit.gibbs.sweeps_per_step == 2);
  CHECK(c.fit.rule.to_gaussian_above == 100);
  CHECK(c.fit.threads == 2);
  CHECK(c.fit.seed == 11);
  CHECK(c.simulate.subjects == 12);
  CHECK(c.simulate.truth.beta == Eigen::Vector3d(1.0, -0.2, 0.01));
  CHECK(c.simulate.covariates.size() == 1);
  CHECK(c.predict.mode == PredictMode::Forecast);
  CHECK(c.predict.cut == 2.0);
  CHECK(c.predict.criterion->window == 0.5);

  const RunConfig dflt = parse_config("{}", "d.json");
  CHECK(dflt.fit.schedule.total_iters == StepSchedule{}.total_iters);
  CHECK(dflt.model.formula.fixed == std::vector<std::string>{"1"});

  CHECK_THROWS_AS(parse_config(R"({"iterations": 5})", "x.json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"noise": {"famliy": "nig"}}})", "x.json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"iters": "many"})", "x.json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})", "x.json"), ConfigError);
  CHECK_THROWS_AS(parse_config("{", "x.json"), ConfigError);
  try {
    parse_config(R"({"subsample": {"strategy": "grouped", "size": 3}})", "x.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("size") != std::string::npos);
  }
}

TEST_CASE("model skeleton and simulated table") {
  const RunConfig c = parse_config(kConfig, "cfg.json");
  const ModelParams s = model_skeleton(c.model);
  CHECK(s.p() == 3);
  CHECK(s.q() == 1);
  CHECK(s.noise.family == Family::NIG);
  CHECK(s.proc.nu == 1.5);
  CHECK(s.kappa == 0.7);
  CHECK(s.mu_w == 0.0);

  const LongTable a = simulate_table(c, 12, 5);
  const LongTable b = simulate_table(c, 12, 5);
  const LongTable d = simulate_table(c, 12, 6);
  CHECK(a.rows() == 48);
  CHECK(a.y == b.y);
  CHECK(a.y != d.y);
  CHECK(a.column("age") >= 0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    CHECK(a.time[r] >= 0.0);
    CHECK(a.time[r] <= 3.0);
  }
  const Dataset ds = build_dataset(a, c.model.formula, "sim");
  CHECK(ds.subjects.size() == 12);
  for (const auto& r : ds.subjects) {
    CHECK(r.times(0) == 0.0);
    CHECK(r.x.col(2).maxCoeff() == r.x.col(2).minCoeff());
  }
}

TEST_CASE("fit results round trip") {
  TempDir dir;
  RunConfig c = parse_config(kConfig, "cfg.json");
  c.fit.subsample = {};
  c.fit.threads = 1;
  const Dataset ds = build_dataset(simulate_table(c, 12, 5), c.model.formula, "sim");
  ModelParams init = initial_params(model_skeleton(c.model), ds.subjects);
  c.fit.louis_draws = 20;
  const FitResult f = fit(ds.subjects, init, c.fit, ds.fixed_names, ds.random_names);
  write_results(f, c, dir.path.string());
  CHECK(fs::exists(dir.path / "params.json"));

  const StoredFit back = read_params((dir.path / "params.json").string());
  CHECK((back.params.beta - f.theta_hat.beta).norm() < 1e-14);
  CHECK(back.params.sigma == f.theta_hat.sigma);
  CHECK(back.params.kappa == f.theta_hat.kappa);
  CHECK(back.params.noise.family == f.theta_hat.noise.family);
  CHECK(back.params.noise.nu == f.theta_hat.noise.nu);
  CHECK(back.formula.fixed == ds.fixed_names);
  CHECK(back.grid.mesh_nodes == 12);

  std::istringstream fe(slurp(dir.path / "fixed_effects.csv"));
  std::string line;
  std::getline(fe, line);
  CHECK(line == "term,Estimate,SE,p-lower,p-upper");
  int rows = 0;
  while (std::getline(fe, line)) ++rows;
  CHECK(rows == 3);

  std::istringstream tr(slurp(dir.path / "trace.csv"));
  std::getline(tr, line);
  CHECK(line.rfind("iter,beta.(Intercept),beta.time,beta.age,sigma", 0) == 0);
  rows = 0;
  while (std::getline(tr, line)) ++rows;
  CHECK(rows == 40);
  CHECK_THROWS_AS(read_params((dir.path / "nope.json").string()), IoError);
}

TEST_CASE("prediction output") {
  TempDir dir;
  PredictiveSummary s;
  s.id = "a";
  s.mode = PredictMode::Nowcast;
  s.time = Eigen::Vector2d(0.0, 1.5);
  s.mean = Eigen::Vector2d(1.0, 2.0);
  s.median = s.mean;
  s.q05 = Eigen::Vector2d(0.5, 1.5);
  s.q95 = Eigen::Vector2d(1.5, 2.5);
  s.excursion = Eigen::Vector2d(NAN, 0.25);
  const std::string path = (dir.path / "p.csv").string();
  write_predictions(path, {s});
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  CHECK(line == "subject_id,time,mode,mean,median,q05,q95,excursion_prob");
  std::getline(in, line);
  CHECK(line == "a,0,nowcast,1,1,0.5,1.5,NA");
  std::getline(in, line);
  CHECK(line == "a,1.5,nowcast,2,2,1.5,2.5,0.25");
}
