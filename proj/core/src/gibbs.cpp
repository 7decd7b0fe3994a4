#include "ngmix/gibbs.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>

#include "ngmix/errors.hpp"
#include "ngmix/numeric.hpp"

namespace ngmix {
namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Cholesky = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

GigParams posterior(const GigParams& prior, double dp, double da, double db) {
  GigParams g{prior.p + dp, prior.a + da, prior.b + db};
  if (g.b < 1e-300 && g.p <= 0.0) g.b = 1e-300;
  return g;
}

Eigen::VectorXd mu_u_of(const ModelParams& p) {
  if (p.has_mu_u() && p.mu_u.size() == p.q()) return p.mu_u;
  return Eigen::VectorXd::Zero(p.q());
}

struct Factored {
  Cholesky llt;
  Eigen::VectorXd mean;
};

void factor(const ModelParams& params, const SubjectDesign& design, const Discretization* disc,
            const LatentState& v, Factored& out, SparseMatrix& Q) {
  const SubjectRecord& rec = design.rec;
  const int n = rec.n();
  const int q = params.q();
  const int K = params.has_process() ? disc->size() : 0;
  const int dim = K + q;
  if (dim == 0) throw ParameterError("draw_gaussian_block: model has neither random effects nor a process");

  const bool gaussian_noise = params.noise.family == Family::Normal;
  Eigen::VectorXd rinv(n);
  for (int j = 0; j < n; ++j)
    rinv(j) = 1.0 / (params.sigma * params.sigma * (gaussian_noise ? 1.0 : v.Vz(j)));

  Triplets t;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

  if (K > 0) {
    const Eigen::VectorXd& vw = params.proc.family == Family::Normal ? disc->h : v.Vw;
    const double mu = params.has_mu_w() ? params.mu_w : 0.0;
    const Eigen::VectorXd dinv = vw.cwiseInverse();
    const SparseMatrix prior = SparseMatrix(disc->K.transpose()) * dinv.asDiagonal() * disc->K;
    for (int k = 0; k < prior.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(prior, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    const Eigen::VectorXd c = mu * (vw - disc->h);
    b.head(K) += disc->K.transpose() * dinv.cwiseProduct(c);

    const SparseMatrix AtRA = SparseMatrix(design.A.transpose()) * rinv.asDiagonal() * design.A;
    for (int k = 0; k < AtRA.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(AtRA, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  const Eigen::VectorXd ry = rinv.cwiseProduct(rec.y - rec.x * params.beta);
  if (K > 0) b.head(K) += design.A.transpose() * ry;

  if (q > 0) {
    const bool gaussian_re = params.re.family == Family::Normal;
    const double vu = gaussian_re ? 1.0 : v.Vu;
    const Eigen::MatrixXd L = spd_factor(params.Sigma);
    const Eigen::MatrixXd Sinv = L.triangularView<Eigen::Lower>().transpose().solve(
        L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(q, q)));
    const Eigen::VectorXd mu = mu_u_of(params);
    const Eigen::VectorXd m = mu * (vu - re_mean_v(params));
    const Eigen::MatrixXd DtRD = rec.d.transpose() * rinv.asDiagonal() * rec.d;
    const Eigen::MatrixXd Quu = Sinv / vu + DtRD;
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) t.emplace_back(K + i, K + j, Quu(i, j));
    b.tail(q) += Sinv * m / vu + rec.d.transpose() * ry;
    if (K > 0) {
      const Eigen::MatrixXd AtRD = SparseMatrix(design.A.transpose()) * (rinv.asDiagonal() * rec.d);
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < q; ++i) {
          if (AtRD(k, i) == 0.0) continue;
          t.emplace_back(k, K + i, AtRD(k, i));
          t.emplace_back(K + i, k, AtRD(k, i));
        }
    }
  }

  Q.resize(dim, dim);
  Q.setFromTriplets(t.begin(), t.end());
  out.llt.compute(Q);
  if (out.llt.info() != Eigen::Success)
    throw NumericalError("draw_gaussian_block: conditional precision is not positive definite");
  out.mean = out.llt.solve(b);
}

}  // namespace

void GibbsConfig::validate() const {
  if (sweeps_per_step < 1) throw ConfigError("gibbs.sweeps must be at least 1");
}

GaussianConditional gaussian_conditional(const ModelParams& params, const SubjectDesign& design,
                                         const Discretization* disc, const LatentState& v) {
  Factored f;
  GaussianConditional out;
  factor(params, design, disc, v, f, out.precision);
  out.mean = f.mean;
  return out;
}

GaussianDraw draw_gaussian_block(const ModelParams& params, const SubjectDesign& design,
                                 const Discretization* disc, const LatentState& v, Rng& rng) {
  Factored f;
  SparseMatrix Q;
  factor(params, design, disc, v, f, Q);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(f.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd x = f.mean + f.llt.matrixU().solve(z);
  const int q = params.q();
  const auto K = x.size() - q;
  return {x.tail(q), x.head(K)};
}

GigParams v_u_conditional(const ModelParams& params, const Eigen::VectorXd& U) {
  const int q = params.q();
  const Eigen::MatrixXd L = spd_factor(params.Sigma);
  const Eigen::VectorXd mu = mu_u_of(params);
  const Eigen::VectorXd zr = L.triangularView<Eigen::Lower>().solve(U + mu * re_mean_v(params));
  const Eigen::VectorXd zm = L.triangularView<Eigen::Lower>().solve(mu);
  return posterior(re_prior(params), -0.5 * q, zm.squaredNorm(), zr.squaredNorm());
}

std::vector<GigParams> v_z_conditional(const ModelParams& params, const Eigen::VectorXd& e) {
  const GigParams prior = noise_prior(params);
  const double s2 = params.sigma * params.sigma;
  std::vector<GigParams> out;
  if (params.scope == NoiseScope::PerSubject) {
    out.push_back(posterior(prior, -0.5 * static_cast<double>(e.size()), 0.0, e.squaredNorm() / s2));
    return out;
  }
  out.reserve(e.size());
  for (Eigen::Index j = 0; j < e.size(); ++j) out.push_back(posterior(prior, -0.5, 0.0, e(j) * e(j) / s2));
  return out;
}

std::vector<GigParams> v_w_conditional(const ModelParams& params, const Discretization& disc,
                                       const Eigen::VectorXd& W) {
  const Eigen::VectorXd E = disc.K * W;
  const double mu = params.has_mu_w() ? params.mu_w : 0.0;
  std::vector<GigParams> out;
  out.reserve(E.size());
  for (Eigen::Index k = 0; k < E.size(); ++k) {
    const double r = E(k) + mu * disc.h(k);
    out.push_back(posterior(process_prior(params, disc.h(k)), -0.5, mu * mu, r * r));
  }
  return out;
}

double draw_v_u(const ModelParams& params, const Eigen::VectorXd& U, Rng& rng) {
  return gig_sample(v_u_conditional(params, U), rng);
}

Eigen::VectorXd draw_v_z(const ModelParams& params, const Eigen::VectorXd& e, Rng& rng) {
  if (!e.allFinite()) throw DomainError("draw_v_z: residuals must be finite");
  const auto laws = v_z_conditional(params, e);
  if (params.scope == NoiseScope::PerSubject) return Eigen::VectorXd::Constant(e.size(), gig_sample(laws[0], rng));
  Eigen::VectorXd out(e.size());
  for (Eigen::Index j = 0; j < e.size(); ++j) out(j) = gig_sample(laws[j], rng);
  return out;
}

Eigen::VectorXd draw_v_w(const ModelParams& params, const Discretization& disc, const Eigen::VectorXd& W,
                         Rng& rng) {
  if (!W.allFinite()) throw DomainError("draw_v_w: W must be finite");
  const auto laws = v_w_conditional(params, disc, W);
  Eigen::VectorXd out(W.size());
  for (Eigen::Index k = 0; k < W.size(); ++k) out(k) = gig_sample(laws[k], rng);
  return out;
}

LatentState sweep(const ModelParams& params, const SubjectDesign& design, const Discretization* disc,
                  LatentState state, const GibbsConfig& cfg, Rng& rng) {
  const bool has_gaussian_block = params.q() > 0 || params.has_process();
  for (int s = 0; s < cfg.sweeps_per_step; ++s) {
    if (has_gaussian_block) {
      GaussianDraw g = draw_gaussian_block(params, design, disc, state, rng);
      state.U = std::move(g.U);
      state.W = std::move(g.W);
    }
    if (params.noise.family != Family::Normal)
      state.Vz = draw_v_z(params, residuals(params, design, state), rng);
    if (params.q() > 0 && params.re.family != Family::Normal) state.Vu = draw_v_u(params, state.U, rng);
    if (params.has_process() && params.proc.family != Family::Normal)
      state.Vw = draw_v_w(params, *disc, state.W, rng);
  }
  return state;
}

}  // namespace ngmix
