#include "ngmix/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "ngmix/errors.hpp"
#include "ngmix/log.hpp"
#include "ngmix/parallel.hpp"
#include "ngmix/random.hpp"

namespace ngmix {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double batch_se(const Eigen::VectorXd& x) {
  const auto n = x.size();
  const Eigen::Index b = std::min<Eigen::Index>(20, n / 2);
  if (b < 2) return kNaN;
  const Eigen::Index len = n / b;
  Eigen::VectorXd means(b);
  for (Eigen::Index k = 0; k < b; ++k) means(k) = x.segment(n - b * len + k * len, len).mean();
  const double var = (means.array() - means.mean()).square().sum() / static_cast<double>(b - 1);
  return std::sqrt(var / static_cast<double>(b));
}

SubjectRecord head(const SubjectRecord& rec, int n) {
  SubjectRecord out;
  out.id = rec.id;
  out.times = rec.times.head(n);
  out.y = rec.y.head(n);
  out.x = rec.x.topRows(n);
  out.d = rec.d.topRows(n);
  return out;
}

double noise_variance(const ModelParams& p, const LatentState& s, bool conditioned, Rng& rng) {
  if (p.noise.family == Family::Normal) return 1.0;
  if (p.scope == NoiseScope::PerSubject && conditioned && s.Vz.size() > 0) return s.Vz(0);
  return gig_sample(noise_prior(p), rng);
}

}  // namespace

PredictMode parse_predict_mode(std::string_view name) {
  if (name == "nowcast") return PredictMode::Nowcast;
  if (name == "smooth") return PredictMode::Smooth;
  if (name == "forecast") return PredictMode::Forecast;
  throw ConfigError("unknown prediction mode '" + std::string(name) + "'");
}

std::string to_string(PredictMode mode) {
  switch (mode) {
    case PredictMode::Nowcast: return "nowcast";
    case PredictMode::Smooth: return "smooth";
    case PredictMode::Forecast: return "forecast";
  }
  return "?";
}

void DeclineCriterion::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("criterion threshold must lie in (0, 1)");
  if (!(window > 0.0) || !std::isfinite(window)) throw ConfigError("criterion window must be positive");
}

void PredictRequest::validate() const {
  if (draws < 2) throw ConfigError("predict: draws must be at least 2");
  if (burn_in < 0) throw ConfigError("predict: burn_in must be non-negative");
  gibbs.validate();
  if (criterion) criterion->validate();
  if (horizon.size() > 0) {
    if (!horizon.allFinite()) throw DomainError("predict: non-finite horizon time");
    for (Eigen::Index k = 1; k < horizon.size(); ++k)
      if (!(horizon(k) > horizon(k - 1))) throw DomainError("predict: horizon times must be strictly increasing");
    if (x_h.rows() != horizon.size() || d_h.rows() != horizon.size())
      throw ShapeError("predict: horizon covariates do not match the horizon length");
  }
}

Eigen::VectorXd excursion_probability(const Eigen::MatrixXd& draws, const Eigen::VectorXd& times,
                                      const DeclineCriterion& criterion) {
  criterion.validate();
  if (draws.cols() != times.size()) throw ShapeError("excursion_probability: draws and times disagree");
  const double limit = std::log1p(-criterion.threshold);
  const Eigen::Index n = times.size();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(n, kNaN);
  if (draws.rows() == 0) return out;
  const double eps = 1e-12 * std::max(1.0, times.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = times(k) - criterion.window;
    if (s < times(0) - eps) continue;
    Eigen::Index j = 0;
    while (j + 1 < n && times(j + 1) <= s + eps) ++j;
    if (j >= k) continue;
    const double span = times(j + 1) - times(j);
    const double w = j + 1 < n && span > 0 ? std::clamp((s - times(j)) / span, 0.0, 1.0) : 0.0;
    Eigen::Index hits = 0;
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      const double start = (1.0 - w) * draws(r, j) + (w > 0 ? w * draws(r, j + 1) : 0.0);
      if ((draws(r, k) - start) / criterion.window <= limit) ++hits;
    }
    out(k) = static_cast<double>(hits) / static_cast<double>(draws.rows());
  }
  return out;
}

PredictiveSummary predict(const ModelParams& theta_hat, const SubjectRecord& subject, const PredictRequest& request) {
  theta_hat.validate();
  request.validate();
  subject.validate();
  if (subject.x.cols() != theta_hat.p() || subject.d.cols() != theta_hat.q())
    throw ShapeError("predict: subject '" + subject.id + "' design does not match the parameters");

  PredictiveSummary out;
  out.id = subject.id;
  out.mode = request.mode;
  const bool own = request.horizon.size() == 0;
  const Eigen::VectorXd& horizon = own ? subject.times : request.horizon;
  const Eigen::MatrixXd& x_h = own ? subject.x : request.x_h;
  const Eigen::MatrixXd& d_h = own ? subject.d : request.d_h;
  if (x_h.cols() != theta_hat.p() || d_h.cols() != theta_hat.q())
    throw ShapeError("predict: horizon covariates have the wrong number of columns");
  const Eigen::Index nh = horizon.size();
  out.time = horizon;

  Grid grid;
  SparseMatrix A_h;
  if (theta_hat.has_process()) {
    Eigen::VectorXd all(subject.n() + nh);
    all << subject.times, horizon;
    const Grid own_grid = default_grid(subject.times, request.grid.mesh_nodes, request.grid.max_nodes);
    if (horizon.minCoeff() < own_grid.lo() || horizon.maxCoeff() > own_grid.hi()) {
      std::ostringstream os;
      os << "subject '" << subject.id << "': grid extended to cover the horizon [" << horizon.minCoeff() << ", "
         << horizon.maxCoeff() << "]";
      log_info(os.str());
    }
    grid = default_grid(all, request.grid.mesh_nodes, request.grid.max_nodes);
    A_h = observation_matrix(grid, horizon);
  }

  const double last = subject.times(subject.n() - 1);
  const double cut = request.cut.value_or(last);
  std::vector<int> n_cond(nh);
  for (Eigen::Index k = 0; k < nh; ++k) {
    double c = std::numeric_limits<double>::infinity();
    if (request.mode == PredictMode::Nowcast) c = horizon(k);
    if (request.mode == PredictMode::Forecast) c = std::min(horizon(k), cut);
    int n = 0;
    while (n < subject.n() && subject.times(n) <= c) ++n;
    n_cond[k] = n;
  }

  std::map<int, Eigen::MatrixXd> chains;
  for (int n : n_cond) chains.emplace(n, Eigen::MatrixXd());
  for (auto& [n, Y] : chains) {
    if (n == 0) {
      const std::string msg = "subject '" + subject.id + "': no data in the conditioning window; prior predictive used";
      log_warning(msg);
      out.warnings.push_back(msg);
    }
    const SubjectDesign design = make_design(head(subject, n), theta_hat.process, grid);
    const Discretization disc = discretize(theta_hat, design);
    const Discretization* dp = theta_hat.has_process() ? &disc : nullptr;
    Rng rng = make_stream(request.seed, static_cast<std::uint64_t>(n));
    LatentState state = initial_state(theta_hat, design, dp);
    GibbsConfig burn = request.gibbs;
    burn.sweeps_per_step = std::max(1, request.burn_in * request.gibbs.sweeps_per_step);
    if (request.burn_in > 0) state = sweep(theta_hat, design, dp, state, burn, rng);
    const Eigen::VectorXd fixed = x_h * theta_hat.beta;
    Y.resize(request.draws, nh);
    for (int r = 0; r < request.draws; ++r) {
      state = sweep(theta_hat, design, dp, state, request.gibbs, rng);
      Eigen::VectorXd y = fixed;
      if (theta_hat.q() > 0) y += d_h * state.U;
      if (theta_hat.has_process()) y += A_h * state.W;
      if (request.with_noise) {
        std::normal_distribution<double> z;
        const double shared = noise_variance(theta_hat, state, n > 0, rng);
        for (Eigen::Index k = 0; k < nh; ++k) {
          const double v = theta_hat.scope == NoiseScope::PerSubject ? shared
                                                                       : noise_variance(theta_hat, state, false, rng);
          y(k) += theta_hat.sigma * std::sqrt(v) * z(rng);
        }
      }
      Y.row(r) = y.transpose();
    }
  }

  out.mean.resize(nh);
  out.median.resize(nh);
  out.q05.resize(nh);
  out.q95.resize(nh);
  out.mc_se.resize(nh);
  out.excursion = Eigen::VectorXd::Constant(nh, kNaN);
  if (request.keep_draws) out.draws.resize(request.draws, nh);
  std::map<int, Eigen::VectorXd> excursions;
  if (request.criterion)
    for (const auto& [n, Y] : chains) excursions[n] = excursion_probability(Y, horizon, *request.criterion);
  for (Eigen::Index k = 0; k < nh; ++k) {
    const Eigen::VectorXd col = chains.at(n_cond[k]).col(k);
    std::vector<double> v(col.data(), col.data() + col.size());
    out.mean(k) = col.mean();
    out.median(k) = quantile(v, 0.5);
    out.q05(k) = quantile(v, 0.05);
    out.q95(k) = quantile(v, 0.95);
    out.mc_se(k) = batch_se(col);
    if (request.criterion) out.excursion(k) = excursions.at(n_cond[k])(k);
    if (request.keep_draws) out.draws.col(k) = col;
  }
  return out;
}

std::vector<PredictiveSummary> predict_all(const ModelParams& theta_hat, const std::vector<SubjectRecord>& subjects,
                                           const std::vector<PredictRequest>& requests, int threads) {
  if (requests.size() != subjects.size()) throw ShapeError("predict_all: one request per subject required");
  std::vector<PredictiveSummary> out(subjects.size());
  parallel_for(static_cast<int>(subjects.size()), std::max(1, threads), [&](int i) {
    PredictRequest req = requests[i];
    req.seed = make_stream(requests[i].seed, static_cast<std::uint64_t>(i))();
    out[i] = predict(theta_hat, subjects[i], req);
  });
  return out;
}

double egfr_from_scr(double scr, double age, bool female, bool black) {
  if (!(scr > 0.0) || !(age > 0.0) || !std::isfinite(scr) || !std::isfinite(age))
    throw DomainError("egfr_from_scr: creatinine and age must be positive");
  double out = 175.0 * std::pow(scr / 88.4, -1.154) * std::pow(age, -0.203);
  if (female) out *= 0.742;
  if (black) out *= 1.21;
  return out;
}

}  // namespace ngmix
