#include "ngmix/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "ngmix/log.hpp"
#include "ngmix/numeric.hpp"
#include "ngmix/parallel.hpp"

namespace ngmix {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> choose(int n, int k, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

const Discretization* disc_ptr(const ModelParams& p, const std::vector<Discretization>& discs, int i) {
  return p.has_process() ? &discs[i] : nullptr;
}

std::vector<Discretization> discretize_all(const ModelParams& p, const std::vector<SubjectDesign>& designs) {
  std::vector<Discretization> out;
  out.reserve(designs.size());
  for (const auto& d : designs) out.push_back(discretize(p, d));
  return out;
}

Eigen::VectorXd natural_score(const ModelParams& p, const ParamLayout& layout, const SubjectDesign& design,
                              const Discretization* disc, const LatentState& latent) {
  const Eigen::VectorXd jac = layout.natural_jacobian(layout.pack(p));
  return complete_score(p, layout, design, disc, latent).cwiseQuotient(jac);
}

// -d2 log p / d natural^2 by central differences of the analytic score.
Eigen::MatrixXd natural_neg_hessian(const ModelParams& p, const ParamLayout& layout, const SubjectDesign& design,
                                    const Discretization* disc, const LatentState& latent) {
  const int dim = layout.dim();
  const Eigen::VectorXd nat = layout.natural(layout.pack(p));
  std::optional<BlockSpan> kappa = layout.find(Block::LogKappa);
  Eigen::MatrixXd H(dim, dim);
  for (int j = 0; j < dim; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(nat(j)));
    Eigen::VectorXd plus = nat;
    Eigen::VectorXd minus = nat;
    plus(j) += h;
    minus(j) -= h;
    const ModelParams pp = layout.unpack(layout.working(plus), p);
    const ModelParams pm = layout.unpack(layout.working(minus), p);
    Eigen::VectorXd sp;
    Eigen::VectorXd sm;
    if (kappa && kappa->offset == j) {
      const Discretization dp = discretize(pp, design);
      const Discretization dm = discretize(pm, design);
      sp = natural_score(pp, layout, design, &dp, latent);
      sm = natural_score(pm, layout, design, &dm, latent);
    } else {
      sp = natural_score(pp, layout, design, disc, latent);
      sm = natural_score(pm, layout, design, disc, latent);
    }
    H.col(j) = -(sp - sm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

void reset_gaussian_latents(const ModelParams& p, const std::vector<Discretization>& discs,
                            std::vector<LatentState>& states) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (p.noise.family == Family::Normal) states[i].Vz.setOnes();
    if (p.re.family == Family::Normal) states[i].Vu = 1.0;
    if (p.has_process() && p.proc.family == Family::Normal) states[i].Vw = discs[i].h;
  }
}

bool spd_ok(const Eigen::MatrixXd& m) { return m.size() == 0 || is_spd(m); }

}  // namespace

void StepSchedule::validate() const {
  if (!(alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
  if (!(gamma > 0.5 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0.5, 1]");
  if (total_iters < 1) throw ConfigError("iters must be positive");
  if (n0 < 0.0) throw ConfigError("n0 must be positive");
  if (burn_in >= total_iters) throw ConfigError("burn_in must be smaller than iters");
}

double StepSchedule::effective_n0() const { return n0 > 0.0 ? n0 : std::max(1.0, total_iters / 10.0); }
int StepSchedule::effective_burn_in() const { return burn_in >= 0 ? burn_in : total_iters / 2; }
double StepSchedule::alpha(int n) const { return alpha0 / std::pow(1.0 + n / effective_n0(), gamma); }

SubsampleStrategy parse_subsample_strategy(std::string_view name) {
  if (name == "full") return SubsampleStrategy::Full;
  if (name == "bernoulli") return SubsampleStrategy::Bernoulli;
  if (name == "grouped") return SubsampleStrategy::Grouped;
  throw ConfigError("unknown subsample strategy '" + std::string(name) + "'");
}

int design_rank(const std::vector<Eigen::MatrixXd>& designs, const std::vector<int>& members) {
  if (members.empty()) return 0;
  const Eigen::Index p = designs[members[0]].cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  for (int i : members) xtx += designs[i].transpose() * designs[i];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

Groups form_groups(const std::vector<Eigen::MatrixXd>& designs) {
  if (designs.empty()) throw DomainError("form_groups: no subjects");
  const int p = static_cast<int>(designs[0].cols());
  Groups out;
  std::vector<int> I(designs.size());
  std::iota(I.begin(), I.end(), 0);

  auto create_group = [&](std::vector<int> pool) {
    std::vector<int> g{pool.front()};
    pool.erase(pool.begin());
    while (design_rank(designs, g) < p && !pool.empty()) {
      std::vector<int> trial = g;
      trial.push_back(pool.front());
      if (design_rank(designs, trial) > design_rank(designs, g)) g.push_back(pool.front());
      pool.erase(pool.begin());
    }
    return g;
  };

  while (!I.empty()) {
    std::vector<int> g = create_group(I);
    if (design_rank(designs, g) == p) {
      std::vector<int> rest;
      for (int i : I)
        if (std::find(g.begin(), g.end(), i) == g.end()) rest.push_back(i);
      I = std::move(rest);
      out.groups.push_back(std::move(g));
    } else {
      out.g0 = I;
      I.clear();
    }
  }
  return out;
}

SubsamplePlan make_subsample_plan(const SubsampleSettings& settings, const std::vector<Eigen::MatrixXd>& designs) {
  SubsamplePlan plan;
  plan.strategy = settings.strategy;
  plan.m = static_cast<int>(designs.size());
  plan.s = settings.s;
  plan.M = settings.M > 0 ? settings.M : std::max(1, plan.m / 5);
  plan.r = settings.r;
  if (plan.strategy == SubsampleStrategy::Bernoulli && !(plan.s >= 1.0))
    throw ConfigError("subsample.s must be at least 1");
  if (plan.strategy != SubsampleStrategy::Grouped) return plan;

  plan.groups = form_groups(designs);
  if (plan.groups.groups.empty()) {
    log_warning("grouped sub-sampler: no full-rank group could be formed, using the full data");
    plan.strategy = SubsampleStrategy::Full;
    return plan;
  }
  std::size_t largest = 0;
  for (const auto& g : plan.groups.groups) largest = std::max(largest, g.size());
  if (static_cast<std::size_t>(plan.M) < largest) {
    std::ostringstream os;
    os << "subsample.M = " << plan.M << " is smaller than the largest group (" << largest << " subjects)";
    throw ConfigError(os.str());
  }
  const int k = static_cast<int>(plan.groups.groups.size());
  if (plan.r < 1 || plan.r > k) {
    std::ostringstream os;
    os << "subsample.r = " << plan.r << " must lie in [1, " << k << "]";
    throw ConfigError(os.str());
  }
  return plan;
}

Subsample draw_subsample(const SubsamplePlan& plan, Rng& rng) {
  Subsample out;
  std::vector<std::pair<int, double>> picked;
  switch (plan.strategy) {
    case SubsampleStrategy::Full:
      for (int i = 0; i < plan.m; ++i) picked.emplace_back(i, 1.0);
      break;
    case SubsampleStrategy::Bernoulli: {
      std::bernoulli_distribution keep(1.0 / plan.s);
      for (int i = 0; i < plan.m; ++i)
        if (keep(rng)) picked.emplace_back(i, plan.s);
      break;
    }
    case SubsampleStrategy::Grouped: {
      const auto& groups = plan.groups.groups;
      const int k = static_cast<int>(groups.size());
      const double wg = static_cast<double>(k) / plan.r;
      int selected = 0;
      for (int g : choose(k, plan.r, rng)) {
        for (int i : groups[g]) picked.emplace_back(i, wg);
        selected += static_cast<int>(groups[g].size());
      }
      const int n_g0 = static_cast<int>(plan.groups.g0.size());
      if (n_g0 > 0) {
        const int n0 = std::clamp(plan.M - selected, 1, n_g0);
        const double w0 = static_cast<double>(n_g0) / n0;
        for (int j : choose(n_g0, n0, rng)) picked.emplace_back(plan.groups.g0[j], w0);
      }
      break;
    }
  }
  std::sort(picked.begin(), picked.end());
  for (const auto& [i, w] : picked) {
    out.index.push_back(i);
    out.weight.push_back(w);
  }
  return out;
}

ModelParams initial_params(const ModelParams& like, const std::vector<SubjectRecord>& data) {
  if (data.empty()) throw DomainError("initial_params: no subjects");
  const int p = static_cast<int>(data[0].x.cols());
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
  int n = 0;
  for (const auto& s : data) {
    xtx += s.x.transpose() * s.x;
    xty += s.x.transpose() * s.y;
    n += s.n();
  }
  ModelParams out = like;
  out.beta = xtx.ldlt().solve(xty);
  double rss = 0.0;
  for (const auto& s : data) rss += (s.y - s.x * out.beta).squaredNorm();
  const double var = std::max(rss / std::max(1, n - p), 1e-8);
  const int q = static_cast<int>(data[0].d.cols());
  const int layers = 1 + (q > 0 ? 1 : 0) + (like.has_process() ? 1 : 0);
  out.sigma = std::sqrt(var / layers);
  out.Sigma = (var / layers) * Eigen::MatrixXd::Identity(q, q);
  if (out.has_mu_u()) out.mu_u = Eigen::VectorXd::Zero(q);
  return out;
}

Eigen::VectorXd batch_means_se(const std::vector<Eigen::VectorXd>& rows, int batches) {
  if (rows.empty()) return {};
  const auto dim = rows[0].size();
  const int n = static_cast<int>(rows.size());
  const int b = std::max(2, std::min(batches, n / 2));
  if (n < 4) return Eigen::VectorXd::Constant(dim, kNaN);
  const int len = n / b;
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(b, dim);
  for (int k = 0; k < b; ++k) {
    for (int t = 0; t < len; ++t) means.row(k) += rows[n - b * len + k * len + t].transpose();
    means.row(k) /= len;
  }
  const Eigen::RowVectorXd centre = means.colwise().mean();
  Eigen::VectorXd out(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double var = (means.col(j).array() - centre(j)).square().sum() / (b - 1);
    out(j) = std::sqrt(var / b);
  }
  return out;
}

PBounds p_bounds(const Eigen::VectorXd& theta, const Eigen::VectorXd& se, const Eigen::VectorXd& mc_se,
                 const Eigen::VectorXd& se_mc_error) {
  const auto n = theta.size();
  PBounds out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(theta(i));
    const double m = std::isfinite(mc_se(i)) ? mc_se(i) : 0.0;
    const double ms = std::isfinite(se_mc_error(i)) ? se_mc_error(i) : 0.0;
    const double z_small = std::max(a - 2.0 * m, 0.0) / (se(i) + 2.0 * ms);
    const double z_large = (a + 2.0 * m) / std::max(se(i) - 2.0 * ms, std::numeric_limits<double>::min());
    out.upper(i) = 2.0 * (1.0 - normal_cdf(z_small));
    out.lower(i) = 2.0 * (1.0 - normal_cdf(z_large));
    if (out.lower(i) > out.upper(i)) std::swap(out.lower(i), out.upper(i));
  }
  return out;
}

LouisResult louis_observed_fim(const ModelParams& theta_hat, const std::vector<SubjectDesign>& designs,
                               int mc_draws, const GibbsConfig& gibbs, std::uint64_t seed, int threads,
                               const std::vector<LatentState>* warm) {
  if (mc_draws < 2) throw ConfigError("louis_observed_fim: need at least two draws");
  const ParamLayout layout(theta_hat);
  const int dim = layout.dim();
  const int m = static_cast<int>(designs.size());
  constexpr int kBatches = 10;
  const int batches = std::min(kBatches, mc_draws / 2);
  const std::vector<Discretization> discs = discretize_all(theta_hat, designs);

  // Per subject: mean negative Hessian and score variance, overall and per batch.
  std::vector<Eigen::MatrixXd> hess(m), var(m);
  std::vector<std::vector<Eigen::MatrixXd>> bhess(m), bvar(m);
  parallel_for(m, threads, [&](int i) {
    Rng rng = make_stream(seed, 0x4c6f756973ull + static_cast<std::uint64_t>(i));
    const Discretization* disc = disc_ptr(theta_hat, discs, i);
    LatentState state = warm != nullptr ? (*warm)[i] : initial_state(theta_hat, designs[i], disc);
    if (theta_hat.has_process() && state.W.size() != disc->size()) state = initial_state(theta_hat, designs[i], disc);
    GibbsConfig burn = gibbs;
    burn.sweeps_per_step = 10 * gibbs.sweeps_per_step;
    state = sweep(theta_hat, designs[i], disc, state, burn, rng);

    std::vector<Eigen::VectorXd> scores(mc_draws);
    std::vector<Eigen::MatrixXd> hs(mc_draws);
    for (int d = 0; d < mc_draws; ++d) {
      state = sweep(theta_hat, designs[i], disc, state, gibbs, rng);
      scores[d] = natural_score(theta_hat, layout, designs[i], disc, state);
      hs[d] = natural_neg_hessian(theta_hat, layout, designs[i], disc, state);
    }
    auto summarise = [&](int begin, int end, Eigen::MatrixXd& h, Eigen::MatrixXd& v) {
      const int len = end - begin;
      h = Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
      for (int d = begin; d < end; ++d) {
        h += hs[d];
        mean += scores[d];
      }
      h /= len;
      mean /= len;
      v = Eigen::MatrixXd::Zero(dim, dim);
      for (int d = begin; d < end; ++d) v += (scores[d] - mean) * (scores[d] - mean).transpose();
      v /= (len - 1);
    };
    summarise(0, mc_draws, hess[i], var[i]);
    const int len = mc_draws / batches;
    bhess[i].resize(batches);
    bvar[i].resize(batches);
    for (int b = 0; b < batches; ++b) summarise(b * len, (b + 1) * len, bhess[i][b], bvar[i][b]);
  });

  auto standard_errors = [&](const Eigen::MatrixXd& fim, bool& pd) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fim);
    const Eigen::VectorXd ev = eig.eigenvalues();
    pd = ev.size() == 0 || ev.minCoeff() > 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k)
      if (ev(k) > 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff())) inv(k) = 1.0 / ev(k);
    const Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    return Eigen::VectorXd(cov.diagonal().cwiseMax(0.0).cwiseSqrt());
  };

  LouisResult out;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  out.variance_term = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < m; ++i) {
    H += hess[i];
    out.variance_term += var[i];
  }
  out.fim = H - out.variance_term;
  out.fim = 0.5 * (out.fim + out.fim.transpose());
  out.std_errors = standard_errors(out.fim, out.positive_definite);
  if (!out.positive_definite)
    log_warning("observed information is not positive definite; standard errors use a pseudo-inverse");

  Eigen::MatrixXd se_b(batches, dim);
  for (int b = 0; b < batches; ++b) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < m; ++i) f += bhess[i][b] - bvar[i][b];
    bool pd = true;
    se_b.row(b) = standard_errors(0.5 * (f + f.transpose()), pd).transpose();
  }
  out.se_mc_error.resize(dim);
  for (int j = 0; j < dim; ++j) {
    const double mean = se_b.col(j).mean();
    const double v = batches > 1 ? (se_b.col(j).array() - mean).square().sum() / (batches - 1) : 0.0;
    out.se_mc_error(j) = std::sqrt(v / batches);
  }
  return out;
}

FitResult fit(const std::vector<SubjectRecord>& data, const ModelParams& init, const FitConfig& cfg,
              const std::vector<std::string>& fixed_names, const std::vector<std::string>& random_names) {
  cfg.schedule.validate();
  cfg.gibbs.validate();
  cfg.rule.validate();
  init.validate();
  if (data.empty()) throw DomainError("fit: no subjects");
  const int m = static_cast<int>(data.size());
  const int threads = std::max(1, cfg.threads);

  ModelParams params = init;
  std::vector<SubjectDesign> designs;
  designs.reserve(m);
  std::vector<Eigen::MatrixXd> xs;
  for (const auto& rec : data) {
    designs.push_back(make_design(rec, params.process, cfg.grid));
    xs.push_back(rec.x);
  }
  std::vector<Discretization> discs = discretize_all(params, designs);
  std::vector<LatentState> states(m);
  std::vector<Rng> rngs;
  rngs.reserve(m);
  for (int i = 0; i < m; ++i) {
    states[i] = initial_state(params, designs[i], disc_ptr(params, discs, i));
    rngs.push_back(make_stream(cfg.seed, static_cast<std::uint64_t>(i)));
  }
  const SubsamplePlan plan = make_subsample_plan(cfg.subsample, xs);
  Rng main_rng = make_stream(cfg.seed, 0xfffffffffull);

  GibbsConfig init_gibbs = cfg.gibbs;
  init_gibbs.sweeps_per_step = std::max(1, cfg.init_sweeps);
  parallel_for(m, threads, [&](int i) {
    states[i] = sweep(params, designs[i], disc_ptr(params, discs, i), states[i], init_gibbs, rngs[i]);
  });

  ParamLayout layout(params);
  Eigen::VectorXd theta = layout.pack(params);
  FitResult result;
  result.trace_names = layout.names(fixed_names, random_names);
  std::unordered_map<std::string, int> trace_col;
  for (std::size_t k = 0; k < result.trace_names.size(); ++k) trace_col[result.trace_names[k]] = static_cast<int>(k);

  const int burn_in = cfg.schedule.effective_burn_in();
  std::vector<Eigen::VectorXd> post;  // natural-scale iterates after burn-in (since the last switch)
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(layout.dim(), layout.dim());
  int emp_count = 0;

  auto record = [&]() {
    const Eigen::VectorXd nat = layout.natural(theta);
    const auto names = layout.names(fixed_names, random_names);
    Eigen::VectorXd row = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(result.trace_names.size()), kNaN);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto it = trace_col.find(names[k]);
      if (it != trace_col.end()) row(it->second) = nat(static_cast<Eigen::Index>(k));
    }
    result.trace.push_back(row);
    return nat;
  };

  std::vector<Eigen::VectorXd> scores(m);
  for (int n = 1; n <= cfg.schedule.total_iters; ++n) {
    const Subsample sub = draw_subsample(plan, main_rng);
    const int ns = static_cast<int>(sub.index.size());
    parallel_for(ns, threads, [&](int s) {
      const int i = sub.index[s];
      const Discretization* disc = disc_ptr(params, discs, i);
      LatentState start = cfg.gibbs.warm_start ? states[i] : initial_state(params, designs[i], disc);
      states[i] = sweep(params, designs[i], disc, start, cfg.gibbs, rngs[i]);
      scores[i] = complete_score(params, layout, designs[i], disc, states[i]);
    });

    const int dim = layout.dim();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    double wsum = 0.0;
    for (int s = 0; s < ns; ++s) {
      g += sub.weight[s] * scores[sub.index[s]];
      wsum += sub.weight[s];
    }

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<bool> unavailable(dim, false);
    for (int i = 0; i < m; ++i) {
      const Information info = complete_information(params, layout, designs[i], disc_ptr(params, discs, i), states[i]);
      P += info.matrix;
      for (int k = 0; k < dim; ++k) unavailable[k] = unavailable[k] || info.unavailable[k];
    }
    const bool any_unavailable = std::find(unavailable.begin(), unavailable.end(), true) != unavailable.end();
    if (any_unavailable) {
      if (emp_count < cfg.warmup && ns > 1) {
        const Eigen::VectorXd mean = g / wsum;
        for (int s = 0; s < ns; ++s) {
          const Eigen::VectorXd c = scores[sub.index[s]] - mean;
          emp += sub.weight[s] * c * c.transpose();
        }
        ++emp_count;
      }
      for (int a = 0; a < dim; ++a) {
        if (!unavailable[a]) continue;
        for (int b = 0; b < dim; ++b) {
          if (!unavailable[b]) continue;
          P(a, b) = emp_count > 0 ? emp(a, b) / emp_count : (a == b ? 1.0 : 0.0);
        }
        P(a, a) = std::max(P(a, a), 1e-8);
      }
    }

    Eigen::VectorXd step = Eigen::VectorXd::Zero(dim);
    if (ns > 0) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(P);
      step = cfg.schedule.alpha(n) * ldlt.solve(g);
      if (!step.allFinite()) {
        const double ridge = 1e-8 * std::max(1.0, P.diagonal().cwiseAbs().maxCoeff());
        step = cfg.schedule.alpha(n) * (P + ridge * Eigen::MatrixXd::Identity(dim, dim)).ldlt().solve(g);
      }
    }
    for (const auto& b : layout.blocks())
      if (ParamLayout::is_log(b.block))
        step(b.offset) = std::clamp(step(b.offset), -cfg.max_log_step, cfg.max_log_step);

    Eigen::VectorXd next = theta + step;
    if (const auto sb = layout.find(Block::SigmaMatrix)) {
      for (int halvings = 0; halvings < 60 && !spd_ok(unvech(next.segment(sb->offset, sb->size))); ++halvings)
        next.segment(sb->offset, sb->size) =
            0.5 * (next.segment(sb->offset, sb->size) + theta.segment(sb->offset, sb->size));
      if (!spd_ok(unvech(next.segment(sb->offset, sb->size))))
        next.segment(sb->offset, sb->size) = theta.segment(sb->offset, sb->size);
    }
    if (!next.allFinite() || next.norm() > 1e8) {
      std::ostringstream os;
      os << "fit diverged at iteration " << n;
      throw DivergenceError(os.str(), result.trace_names, result.trace);
    }
    theta = next;
    params = layout.unpack(theta, params);

    // Tail-parameter switching at the edges of the NIG family.
    bool switched = false;
    auto maybe_switch = [&](NvmSpec& spec, bool active, const char* what) {
      if (!active) return;
      const NvmSpec out = apply_switch(cfg.rule, spec);
      if (out.family != spec.family) {
        std::ostringstream os;
        os << what << " NIG tail parameter " << spec.nu << " crossed a threshold at iteration " << n
           << "; switching to " << to_string(out.family);
        log_info(os.str());
        result.warnings.push_back(os.str());
        spec = out;
        switched = true;
      }
    };
    maybe_switch(params.noise, true, "noise");
    maybe_switch(params.re, params.q() > 0, "random-effect");
    maybe_switch(params.proc, params.has_process(), "process");
    if (switched) {
      layout = ParamLayout(params);
      theta = layout.pack(params);
      emp = Eigen::MatrixXd::Zero(layout.dim(), layout.dim());
      emp_count = 0;
      post.clear();
    }
    if (params.has_kappa() || switched) discs = discretize_all(params, designs);
    if (switched) reset_gaussian_latents(params, discs, states);

    const Eigen::VectorXd nat = record();
    if (n > burn_in) post.push_back(nat);
  }

  if (post.empty()) post.push_back(layout.natural(theta));
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(layout.dim());
  for (const auto& row : post) avg += row;
  avg /= static_cast<double>(post.size());
  result.layout = layout;
  result.names = layout.names(fixed_names, random_names);
  result.estimate = avg;
  result.theta_hat = layout.unpack(layout.working(avg), params);
  result.mc_se = batch_means_se(post, cfg.mc_batches);
  if (result.mc_se.size() == 0) result.mc_se = Eigen::VectorXd::Zero(layout.dim());
  result.states = states;

  const int dim = layout.dim();
  if (cfg.louis_draws > 0) {
    const LouisResult louis =
        louis_observed_fim(result.theta_hat, designs, cfg.louis_draws, cfg.gibbs, cfg.seed, threads, &result.states);
    result.observed_fim = louis.fim;
    result.std_errors = louis.std_errors;
    result.se_mc_error = louis.se_mc_error;
    if (!louis.positive_definite)
      result.warnings.push_back("observed information is not positive definite; pseudo-inverse standard errors");
  } else {
    result.observed_fim = Eigen::MatrixXd::Constant(dim, dim, kNaN);
    result.std_errors = Eigen::VectorXd::Constant(dim, kNaN);
    result.se_mc_error = Eigen::VectorXd::Constant(dim, kNaN);
  }
  const PBounds pb = p_bounds(result.estimate, result.std_errors, result.mc_se, result.se_mc_error);
  result.p_lower = pb.lower;
  result.p_upper = pb.upper;
  return result;
}

}  // namespace ngmix
