#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "ngmix/estimator.hpp"
#include "ngmix/numeric.hpp"
#include "oracles.hpp"

using namespace ngmix;

namespace {

// Subjects with a single visit at time t: x = [1, t] has rank one on its own.
std::vector<Eigen::MatrixXd> single_visit_designs(const std::vector<double>& times) {
  std::vector<Eigen::MatrixXd> out;
  for (double t : times) out.push_back((Eigen::MatrixXd(1, 2) << 1.0, t).finished());
  return out;
}

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void subsets(int k, int r, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == r) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < k; ++i) {
    cur.push_back(i);
    subsets(k, r, i + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

TEST_CASE("step schedule") {
  StepSchedule s;
  s.total_iters = 1000;
  s.alpha0 = 0.5;
  s.gamma = 0.75;
  CHECK(s.effective_n0() == 100.0);
  CHECK(s.effective_burn_in() == 500);
  CHECK(s.alpha(0) == 0.5);
  CHECK(s.alpha(300) == doctest::Approx(0.5 / std::pow(4.0, 0.75)).epsilon(1e-15));
  for (int n = 1; n < 1000; ++n) CHECK(s.alpha(n) < s.alpha(n - 1));
  CHECK_NOTHROW(s.validate());
  StepSchedule bad = s;
  bad.gamma = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.burn_in = 1000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.alpha0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_subsample_strategy("grouped") == SubsampleStrategy::Grouped);
  CHECK_THROWS_AS(parse_subsample_strategy("stratified"), ConfigError);
}

TEST_CASE("group formation") {
  const auto designs = single_visit_designs({1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 5.0});
  CHECK(design_rank(designs, {0, 1}) == 1);
  CHECK(design_rank(designs, {0, 2}) == 2);
  CHECK(design_rank(designs, {}) == 0);
  const Groups g = form_groups(designs);
  std::set<int> seen;
  for (const auto& grp : g.groups) {
    CHECK(design_rank(designs, grp) == 2);
    for (int i : grp) CHECK(seen.insert(i).second);
  }
  for (int i : g.g0) CHECK(seen.insert(i).second);
  CHECK(seen.size() == designs.size());
  CHECK(design_rank(designs, g.g0) < 2);
  // greedy on the input order: {0, 2}, {1, 3}, {4, 6}, leftover {5}
  REQUIRE(g.groups.size() == 3);
  CHECK(g.groups[0] == std::vector<int>{0, 2});
  CHECK(g.groups[1] == std::vector<int>{1, 3});
  CHECK(g.groups[2] == std::vector<int>{4, 6});
  CHECK(g.g0 == std::vector<int>{5});
  CHECK_THROWS_AS(form_groups({}), DomainError);
}

TEST_CASE("grouped sub-sampler is unbiased by enumeration") {
  // Stratum dummies: one rare stratum forces a large group.
  std::vector<Eigen::MatrixXd> designs;
  const std::vector<int> stratum{0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 2, 0, 0, 1, 0, 0, 0, 0};
  for (int s : stratum) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 3);
    x(0, 0) = x(1, 0) = 1.0;
    if (s > 0) x(0, s) = x(1, s) = 1.0;
    designs.push_back(x);
  }
  SubsampleSettings set;
  set.strategy = SubsampleStrategy::Grouped;
  set.M = 6;
  set.r = 1;
  const SubsamplePlan plan = make_subsample_plan(set, designs);
  const auto& groups = plan.groups.groups;
  const int k = static_cast<int>(groups.size());
  REQUIRE(k >= 1);
  const int n_g0 = static_cast<int>(plan.groups.g0.size());
  REQUIRE(n_g0 > 0);

  std::vector<double> f(designs.size());
  Rng frng(3);
  std::normal_distribution<double> z;
  for (auto& v : f) v = z(frng);
  const double total = std::accumulate(f.begin(), f.end(), 0.0);

  for (int r = 1; r <= k; ++r) {
    SubsamplePlan pr = plan;
    pr.r = r;
    // every weight the sampler emits must be the inverse conditional inclusion probability
    std::map<std::vector<int>, int> hits;
    Rng rng(11);
    for (int it = 0; it < 4000; ++it) {
      const Subsample s = draw_subsample(pr, rng);
      std::vector<int> chosen;
      int selected = 0;
      for (int g = 0; g < k; ++g)
        if (std::find(s.index.begin(), s.index.end(), groups[g][0]) != s.index.end()) {
          chosen.push_back(g);
          selected += static_cast<int>(groups[g].size());
        }
      REQUIRE(static_cast<int>(chosen.size()) == r);
      ++hits[chosen];
      const int n0 = std::clamp(pr.M - selected, 1, n_g0);
      int in_g0 = 0;
      for (std::size_t j = 0; j < s.index.size(); ++j) {
        const int i = s.index[j];
        const bool is_g0 = std::find(plan.groups.g0.begin(), plan.groups.g0.end(), i) != plan.groups.g0.end();
        if (is_g0) {
          ++in_g0;
          CHECK(s.weight[j] == doctest::Approx(double(n_g0) / n0).epsilon(1e-15));
        } else {
          CHECK(s.weight[j] == doctest::Approx(double(k) / r).epsilon(1e-15));
        }
      }
      CHECK(in_g0 == n0);
      CHECK(std::is_sorted(s.index.begin(), s.index.end()));
    }
    CHECK(static_cast<double>(hits.size()) == binom(k, r));

    // exact expectation of sum_i w_i f_i over every group subset and every G0 subset size
    std::vector<std::vector<int>> all;
    std::vector<int> cur;
    subsets(k, r, 0, cur, all);
    double expect = 0;
    for (const auto& S : all) {
      int selected = 0;
      double part = 0;
      for (int g : S) {
        selected += static_cast<int>(groups[g].size());
        for (int i : groups[g]) part += double(k) / r * f[i];
      }
      const int n0 = std::clamp(pr.M - selected, 1, n_g0);
      for (int i : plan.groups.g0) part += (double(n0) / n_g0) * (double(n_g0) / n0) * f[i];
      expect += part / all.size();
    }
    CHECK(std::abs(expect - total) < 1e-12);
  }
}

TEST_CASE("bernoulli and full sub-samplers") {
  const auto designs = single_visit_designs(std::vector<double>(50, 1.0));
  SubsampleSettings set;
  set.strategy = SubsampleStrategy::Bernoulli;
  set.s = 4.0;
  const SubsamplePlan plan = make_subsample_plan(set, designs);
  Rng rng(2);
  double kept = 0;
  const int reps = 4000;
  for (int it = 0; it < reps; ++it) {
    const Subsample s = draw_subsample(plan, rng);
    kept += s.index.size();
    for (double w : s.weight) CHECK(w == 4.0);
  }
  const double p = kept / (reps * 50.0);
  CHECK(std::abs(p - 0.25) < 4 * std::sqrt(0.25 * 0.75 / (reps * 50.0)));

  const Subsample full = draw_subsample(make_subsample_plan({}, designs), rng);
  CHECK(full.index.size() == 50);
  for (double w : full.weight) CHECK(w == 1.0);

  set.s = 0.5;
  CHECK_THROWS_AS(make_subsample_plan(set, designs), ConfigError);
}

TEST_CASE("grouped sub-sampler configuration errors") {
  const auto designs = single_visit_designs({1, 2, 3, 4, 5, 6, 7, 8});
  SubsampleSettings set;
  set.strategy = SubsampleStrategy::Grouped;
  set.M = 1;
  CHECK_THROWS_AS(make_subsample_plan(set, designs), ConfigError);
  set.M = 4;
  set.r = 5;
  CHECK_THROWS_AS(make_subsample_plan(set, designs), ConfigError);
  set.r = 0;
  CHECK_THROWS_AS(make_subsample_plan(set, designs), ConfigError);
  // every subject identical: no full-rank group, falls back to the full data
  set.r = 1;
  const auto flat = single_visit_designs(std::vector<double>(6, 2.0));
  CHECK(make_subsample_plan(set, flat).strategy == SubsampleStrategy::Full);
}

TEST_CASE("batch means and p-value bounds") {
  Rng rng(4);
  std::normal_distribution<double> z;
  std::vector<Eigen::VectorXd> rows;
  for (int i = 0; i < 20000; ++i) rows.push_back(Eigen::Vector2d(z(rng), 3.0));
  const Eigen::VectorXd se = batch_means_se(rows, 20);
  CHECK(oracle::rel_err(se(0), 1.0 / std::sqrt(20000.0)) < 0.4);
  CHECK(se(1) == doctest::Approx(0.0));
  CHECK(std::isnan(batch_means_se({Eigen::Vector2d(1, 2)}, 20)(0)));

  const Eigen::VectorXd theta = Eigen::Vector3d(1.959963984540054, -0.5, 0.0);
  const Eigen::VectorXd s = Eigen::Vector3d(1.0, 0.2, 1.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  const PBounds exact = p_bounds(theta, s, zero, zero);
  CHECK(exact.lower(0) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(exact.upper(0) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(exact.upper(2) == doctest::Approx(1.0));
  const PBounds wide = p_bounds(theta, s, Eigen::Vector3d(0.1, 0.05, 0.3), Eigen::Vector3d(0.05, 0.01, 0.1));
  for (int i = 0; i < 3; ++i) {
    CHECK(wide.lower(i) <= exact.lower(i) + 1e-15);
    CHECK(wide.upper(i) >= exact.upper(i) - 1e-15);
    CHECK(wide.lower(i) <= wide.upper(i));
  }
  const PBounds nan = p_bounds(theta, s, Eigen::VectorXd::Constant(3, NAN), Eigen::VectorXd::Constant(3, NAN));
  CHECK(nan.lower(0) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("initial values use ordinary least squares") {
  const ModelParams truth = fixture::gaussian_params();
  const auto data = simulate(truth, fixture::cohort(60, 4, 5.0, 8), 3);
  const ModelParams init = initial_params(truth, data);
  Eigen::MatrixXd X(240, 2);
  Eigen::VectorXd y(240);
  for (int i = 0; i < 60; ++i) {
    X.middleRows(4 * i, 4) = data[i].x;
    y.segment(4 * i, 4) = data[i].y;
  }
  const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(y);
  CHECK((init.beta - ols).norm() < 1e-10);
  CHECK(init.sigma > 0);
  CHECK(init.Sigma.rows() == 1);
  CHECK(init.Sigma(0, 0) > 0);
  CHECK_THROWS_AS(initial_params(truth, {}), DomainError);
}

TEST_CASE("fit is reproducible and independent of the thread count") {
  ModelParams truth = fixture::gaussian_params(ProcessKind::Exponential);
  truth.noise = {Family::NIG, 1.5};
  const auto data = simulate(truth, fixture::cohort(40, 4, 4.0, 9), 5);
  FitConfig cfg;
  cfg.schedule.total_iters = 60;
  cfg.gibbs.sweeps_per_step = 1;
  cfg.warmup = 10;
  cfg.init_sweeps = 5;
  cfg.louis_draws = 0;
  cfg.seed = 77;
  cfg.threads = 1;
  const FitResult a = fit(data, initial_params(truth, data), cfg, {"1", "time"}, {"1"});
  cfg.threads = 4;
  const FitResult b = fit(data, initial_params(truth, data), cfg, {"1", "time"}, {"1"});
  CHECK(a.estimate == b.estimate);
  CHECK(a.trace.size() == 60);
  CHECK(a.names.size() == static_cast<std::size_t>(a.layout.dim()));
  CHECK(a.names[0] == "beta.(Intercept)");
  CHECK(a.estimate.allFinite());
  CHECK(a.std_errors.array().isNaN().all());
  CHECK(a.states.size() == data.size());
  cfg.seed = 78;
  const FitResult c = fit(data, initial_params(truth, data), cfg);
  CHECK(c.estimate != a.estimate);
}

TEST_CASE("louis information of a random-intercept model matches the exact observed information") {
  ModelParams truth = fixture::gaussian_params();
  const auto data = simulate(truth, fixture::cohort(80, 4, 4.0, 12), 6);
  std::vector<SubjectDesign> designs;
  for (const auto& r : data) designs.push_back(make_design(r, ProcessKind::None));
  const ParamLayout layout(truth);
  const Eigen::VectorXd nat = layout.natural(layout.pack(truth));
  auto ll = [&](const Eigen::VectorXd& x) {
    const ModelParams q = layout.unpack(layout.working(x), truth);
    double s = 0;
    for (const auto& d : designs) s += marginal_loglik_gaussian(q, d, nullptr);
    return s;
  };
  const int dim = layout.dim();
  Eigen::MatrixXd H(dim, dim);
  const double h = 1e-4;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      auto at = [&](double a, double b) {
        Eigen::VectorXd x = nat;
        x(i) += a;
        x(j) += b;
        return ll(x);
      };
      H(i, j) = -(at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
    }
  const LouisResult L = louis_observed_fim(truth, designs, 20000, GibbsConfig{1, true}, 3);
  CHECK(L.positive_definite);
  for (int i = 0; i < dim; ++i) {
    CAPTURE(i);
    CHECK(oracle::rel_err(L.fim(i, i), H(i, i)) < 0.05);
    CHECK(L.std_errors(i) == doctest::Approx(std::sqrt(H.inverse()(i, i))).epsilon(0.05));
  }
  CHECK_THROWS_AS(louis_observed_fim(truth, designs, 1, GibbsConfig{1, true}, 3), ConfigError);
}
