#include <benchmark/benchmark.h>

#include "ngmix/estimator.hpp"
#include "ngmix/gibbs.hpp"
#include "ngmix/numeric.hpp"

using namespace ngmix;

namespace {

std::vector<SubjectRecord> cohort(int m, int n) {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<SubjectRecord> out;
  for (int i = 0; i < m; ++i) {
    std::vector<double> t(n, 0.0);
    for (int k = 1; k < n; ++k) t[k] = u(rng);
    std::sort(t.begin(), t.end());
    SubjectRecord r;
    r.id = std::to_string(i);
    r.times = Eigen::Map<Eigen::VectorXd>(t.data(), n);
    r.y = Eigen::VectorXd::Zero(n);
    r.x.resize(n, 2);
    r.x.col(0).setOnes();
    r.x.col(1) = r.times;
    r.d = Eigen::MatrixXd::Ones(n, 1);
    out.push_back(r);
  }
  return out;
}

ModelParams nig_params() {
  ModelParams p;
  p.beta = Eigen::Vector2d(1.0, -0.2);
  p.sigma = 0.4;
  p.Sigma = Eigen::MatrixXd::Constant(1, 1, 0.5);
  p.noise = {Family::NIG, 1.0};
  p.re = {Family::Normal, 1.0};
  p.proc = {Family::NIG, 1.5};
  p.process = ProcessKind::Exponential;
  p.kappa = 0.8;
  return p;
}

}  // namespace

static void BM_BesselK(benchmark::State& state) {
  double nu = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_bessel_k(nu, 2.5));
    nu += 1e-9;
  }
}
BENCHMARK(BM_BesselK);

static void BM_GigSample(benchmark::State& state) {
  Rng rng(1);
  const GigParams g{-0.5, 1.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(gig_sample(g, rng));
}
BENCHMARK(BM_GigSample);

static void BM_GibbsSweep(benchmark::State& state) {
  const ModelParams p = nig_params();
  auto recs = simulate(p, cohort(1, static_cast<int>(state.range(0))), 3);
  const SubjectDesign d = make_design(recs[0], p.process);
  const Discretization disc = discretize(p, d);
  LatentState s = initial_state(p, d, &disc);
  Rng rng(2);
  const GibbsConfig cfg{1, true};
  for (auto _ : state) s = sweep(p, d, &disc, s, cfg, rng);
}
BENCHMARK(BM_GibbsSweep)->Arg(5)->Arg(20)->Arg(80);

static void BM_FitIteration(benchmark::State& state) {
  const ModelParams p = nig_params();
  const auto data = simulate(p, cohort(static_cast<int>(state.range(0)), 5), 4);
  FitConfig cfg;
  cfg.schedule.total_iters = 10;
  cfg.schedule.burn_in = 2;
  cfg.warmup = 2;
  cfg.init_sweeps = 2;
  cfg.mc_batches = 2;
  cfg.louis_draws = 0;
  cfg.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, p, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.schedule.total_iters);
}
BENCHMARK(BM_FitIteration)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
