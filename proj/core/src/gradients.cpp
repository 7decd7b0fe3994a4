#include "ngmix/gradients.hpp"

#include <cmath>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "ngmix/errors.hpp"
#include "ngmix/numeric.hpp"

namespace ngmix {
namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd L = spd_factor(m);
  const Eigen::MatrixXd Li = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return Li.transpose() * Li;
}

Eigen::VectorXd mu_u_of(const ModelParams& p) {
  if (p.has_mu_u() && p.mu_u.size() == p.q()) return p.mu_u;
  return Eigen::VectorXd::Zero(p.q());
}

struct TailTerm {
  double score;
  double info;
};

// d/dnu log p(v) and -E[d2/dnu2] of a node prior with weight h.
TailTerm tail_term(Family family, double nu, double h, double v) {
  using boost::math::digamma;
  using boost::math::trigamma;
  switch (family) {
    case Family::NIG:
      return {0.5 / nu + h - 0.5 * v - 0.5 * h * h / v, 0.5 / (nu * nu)};
    case Family::GAL:
      return {h * std::log(nu) + h - h * digamma(nu * h) + h * std::log(v) - v,
              h * h * trigamma(nu * h) - h / nu};
    case Family::StudentT:
      return {0.5 * std::log(0.5 * nu) + 0.5 - 0.5 * digamma(0.5 * nu) - 0.5 * std::log(v) - 0.5 / v,
              0.25 * trigamma(0.5 * nu) - 0.5 / nu};
    default:
      break;
  }
  throw UnsupportedFamilyError("score_nu: family '" + to_string(family) + "' has no tail parameter");
}

Eigen::VectorXd process_v(const ModelParams& params, const Discretization& disc, const LatentState& latent) {
  return params.proc.family == Family::Normal ? disc.h : latent.Vw;
}

Eigen::VectorXd process_residual(const ModelParams& params, const Discretization& disc, const LatentState& latent,
                                 const Eigen::VectorXd& v) {
  const double mu = params.has_mu_w() ? params.mu_w : 0.0;
  return disc.K * latent.W - mu * (v - disc.h);
}

}  // namespace

std::string to_string(Block block) {
  switch (block) {
    case Block::Beta:
      return "beta";
    case Block::LogSigma:
      return "sigma";
    case Block::SigmaMatrix:
      return "Sigma";
    case Block::MuU:
      return "mu_u";
    case Block::LogNuU:
      return "nu_u";
    case Block::MuW:
      return "mu_w";
    case Block::LogKappa:
      return "kappa";
    case Block::LogNuW:
      return "nu_w";
    case Block::LogNuZ:
      return "nu_z";
  }
  return "";
}

ScoreBlock score_beta(const ModelParams& params, const SubjectDesign& design, const LatentState& latent) {
  const SubjectRecord& rec = design.rec;
  const Eigen::VectorXd e = residuals(params, design, latent);
  const double s2 = params.sigma * params.sigma;
  const bool gaussian = params.noise.family == Family::Normal;
  const Eigen::VectorXd w = gaussian ? Eigen::VectorXd::Ones(rec.n()) : Eigen::VectorXd(latent.Vz.cwiseInverse());
  ScoreBlock out{Block::Beta, rec.x.transpose() * w.cwiseProduct(e) / s2, std::nullopt};

  double inv_mean = 1.0;
  if (!gaussian) {
    const auto m = gig_moment(noise_prior(params), -1.0);
    inv_mean = m ? *m : w.mean();
  }
  out.information = inv_mean * rec.x.transpose() * rec.x / s2;
  return out;
}

ScoreBlock score_sigma_noise(const ModelParams& params, const SubjectDesign& design, const LatentState& latent) {
  const Eigen::VectorXd e = residuals(params, design, latent);
  const int n = design.rec.n();
  const double s = params.sigma;
  double quad = 0.0;
  for (int j = 0; j < n; ++j) {
    const double v = params.noise.family == Family::Normal ? 1.0 : latent.Vz(j);
    quad += e(j) * e(j) / v;
  }
  ScoreBlock out{Block::LogSigma, Eigen::VectorXd::Constant(1, -n / s + quad / (s * s * s)), std::nullopt};
  out.information = Eigen::MatrixXd::Constant(1, 1, 2.0 * n / (s * s));
  return out;
}

ScoreBlock score_sigma_matrix(const ModelParams& params, const LatentState& latent) {
  const int q = params.q();
  if (q == 0) throw ParameterError("score_sigma_matrix: model has no random effects");
  const Eigen::MatrixXd Si = spd_inverse(params.Sigma);
  const double v = params.re.family == Family::Normal ? 1.0 : latent.Vu;
  const Eigen::VectorXd mu = mu_u_of(params);
  const Eigen::VectorXd r = latent.U + mu * re_mean_v(params) - mu * v;
  const Eigen::VectorXd a = Si * r;
  const Eigen::MatrixXd G = 0.5 * (a * a.transpose() / v - Si);
  const Eigen::MatrixXd D = duplication_matrix(q);
  Eigen::MatrixXd kron(q * q, q * q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) kron.block(i * q, j * q, q, q) = Si(i, j) * Si;
  ScoreBlock out{Block::SigmaMatrix, D.transpose() * vec(G), std::nullopt};
  out.information = 0.5 * D.transpose() * kron * D;
  return out;
}

ScoreBlock score_mu_u(const ModelParams& params, const LatentState& latent) {
  if (!params.has_mu_u()) throw ParameterError("score_mu_u: random effects have no skew parameter");
  const Eigen::MatrixXd Si = spd_inverse(params.Sigma);
  const double v = latent.Vu;
  const double ev = re_mean_v(params);
  const Eigen::VectorXd mu = mu_u_of(params);
  const Eigen::VectorXd r = latent.U + mu * ev - mu * v;
  ScoreBlock out{Block::MuU, (v - ev) / v * (Si * r), std::nullopt};
  const auto inv = gig_moment(re_prior(params), -1.0);
  if (inv) out.information = (ev * ev * *inv - ev) * Si;
  return out;
}

ScoreBlock score_operator(const ModelParams& params, const Discretization& disc, const LatentState& latent) {
  if (disc.spec.kind != OperatorKind::Exponential)
    throw ParameterError("score_operator: only the exponential operator has a free parameter");
  const Eigen::VectorXd v = process_v(params, disc, latent);
  const Eigen::VectorXd r = process_residual(params, disc, latent, v);
  double trace = 0.0;
  for (int k = 0; k < disc.size(); ++k) trace += disc.dK.coeff(k, k) / disc.K.coeff(k, k);
  const Eigen::VectorXd kw = disc.dK * latent.W;
  const double g = trace - kw.dot(r.cwiseQuotient(v));
  return {Block::LogKappa, Eigen::VectorXd::Constant(1, g), std::nullopt};
}

ScoreBlock score_mu_w(const ModelParams& params, const Discretization& disc, const LatentState& latent) {
  if (!params.has_mu_w()) throw ParameterError("score_mu_w: process has no skew parameter");
  const Eigen::VectorXd& v = latent.Vw;
  const Eigen::VectorXd r = process_residual(params, disc, latent, v);
  double g = 0.0;
  for (int k = 0; k < disc.size(); ++k) g += (v(k) - disc.h(k)) / v(k) * r(k);
  ScoreBlock out{Block::MuW, Eigen::VectorXd::Constant(1, g), std::nullopt};
  double info = 0.0;
  for (int k = 0; k < disc.size(); ++k) {
    const auto inv = gig_moment(process_prior(params, disc.h(k)), -1.0);
    if (!inv) return out;
    info += disc.h(k) * disc.h(k) * *inv - disc.h(k);
  }
  out.information = Eigen::MatrixXd::Constant(1, 1, info);
  return out;
}

ScoreBlock score_nu(const ModelParams& params, const Discretization* disc, const LatentState& latent,
                    Component component) {
  double g = 0.0;
  double info = 0.0;
  Block block = Block::LogNuZ;
  auto add = [&](Family f, double nu, double h, double v) {
    const TailTerm t = tail_term(f, nu, h, v);
    g += t.score;
    info += t.info;
  };
  switch (component) {
    case Component::Noise:
      if (params.scope == NoiseScope::PerSubject) {
        add(params.noise.family, params.noise.nu, 1.0, latent.Vz(0));
      } else {
        for (Eigen::Index j = 0; j < latent.Vz.size(); ++j) add(params.noise.family, params.noise.nu, 1.0, latent.Vz(j));
      }
      break;
    case Component::RandomEffect:
      block = Block::LogNuU;
      add(params.re.family, params.re.nu, 1.0, latent.Vu);
      break;
    case Component::Process:
      block = Block::LogNuW;
      if (disc == nullptr) throw ParameterError("score_nu: process component needs a discretization");
      if (params.proc.family == Family::StudentT)
        throw UnsupportedFamilyError("score_nu: process family t is not supported");
      for (int k = 0; k < disc->size(); ++k) add(params.proc.family, params.proc.nu, disc->h(k), latent.Vw(k));
      break;
  }
  return {block, Eigen::VectorXd::Constant(1, g), Eigen::MatrixXd::Constant(1, 1, info)};
}

ParamLayout::ParamLayout(const ModelParams& params) : q_(params.q()) {
  auto add = [&](Block b, int size) {
    if (size <= 0) return;
    blocks_.push_back({b, dim_, size});
    dim_ += size;
  };
  add(Block::Beta, params.p());
  add(Block::LogSigma, 1);
  add(Block::SigmaMatrix, q_ * (q_ + 1) / 2);
  if (params.has_mu_u()) add(Block::MuU, q_);
  if (params.has_nu_u()) add(Block::LogNuU, 1);
  if (params.has_mu_w()) add(Block::MuW, 1);
  if (params.has_kappa()) add(Block::LogKappa, 1);
  if (params.has_nu_w()) add(Block::LogNuW, 1);
  if (params.has_nu_z()) add(Block::LogNuZ, 1);
}

std::optional<BlockSpan> ParamLayout::find(Block block) const {
  for (const auto& b : blocks_)
    if (b.block == block) return b;
  return std::nullopt;
}

bool ParamLayout::is_log(Block block) {
  return block == Block::LogSigma || block == Block::LogNuU || block == Block::LogKappa ||
         block == Block::LogNuW || block == Block::LogNuZ;
}

Eigen::VectorXd ParamLayout::pack(const ModelParams& params) const {
  Eigen::VectorXd theta(dim_);
  for (const auto& b : blocks_) {
    auto seg = theta.segment(b.offset, b.size);
    switch (b.block) {
      case Block::Beta:
        seg = params.beta;
        break;
      case Block::LogSigma:
        seg(0) = std::log(params.sigma);
        break;
      case Block::SigmaMatrix:
        seg = vech(params.Sigma);
        break;
      case Block::MuU:
        seg = mu_u_of(params);
        break;
      case Block::LogNuU:
        seg(0) = std::log(params.re.nu);
        break;
      case Block::MuW:
        seg(0) = params.mu_w;
        break;
      case Block::LogKappa:
        seg(0) = std::log(params.kappa);
        break;
      case Block::LogNuW:
        seg(0) = std::log(params.proc.nu);
        break;
      case Block::LogNuZ:
        seg(0) = std::log(params.noise.nu);
        break;
    }
  }
  return theta;
}

ModelParams ParamLayout::unpack(const Eigen::VectorXd& theta, const ModelParams& like) const {
  if (theta.size() != dim_) throw ShapeError("ParamLayout::unpack: wrong length");
  ModelParams p = like;
  for (const auto& b : blocks_) {
    const auto seg = theta.segment(b.offset, b.size);
    switch (b.block) {
      case Block::Beta:
        p.beta = seg;
        break;
      case Block::LogSigma:
        p.sigma = std::exp(seg(0));
        break;
      case Block::SigmaMatrix:
        p.Sigma = unvech(seg);
        break;
      case Block::MuU:
        p.mu_u = seg;
        break;
      case Block::LogNuU:
        p.re.nu = std::exp(seg(0));
        break;
      case Block::MuW:
        p.mu_w = seg(0);
        break;
      case Block::LogKappa:
        p.kappa = std::exp(seg(0));
        break;
      case Block::LogNuW:
        p.proc.nu = std::exp(seg(0));
        break;
      case Block::LogNuZ:
        p.noise.nu = std::exp(seg(0));
        break;
    }
  }
  return p;
}

Eigen::VectorXd ParamLayout::natural(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = theta;
  for (const auto& b : blocks_)
    if (is_log(b.block)) out(b.offset) = std::exp(theta(b.offset));
  return out;
}

Eigen::VectorXd ParamLayout::working(const Eigen::VectorXd& natural) const {
  Eigen::VectorXd out = natural;
  for (const auto& b : blocks_)
    if (is_log(b.block)) out(b.offset) = std::log(natural(b.offset));
  return out;
}

Eigen::VectorXd ParamLayout::natural_jacobian(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(dim_);
  for (const auto& b : blocks_)
    if (is_log(b.block)) out(b.offset) = std::exp(theta(b.offset));
  return out;
}

std::vector<std::string> ParamLayout::names(const std::vector<std::string>& fixed,
                                            const std::vector<std::string>& random) const {
  auto label = [](const std::vector<std::string>& cols, int i) {
    if (i < static_cast<int>(cols.size())) return cols[i] == "1" ? std::string("(Intercept)") : cols[i];
    return std::to_string(i);
  };
  std::vector<std::string> out;
  for (const auto& b : blocks_) {
    switch (b.block) {
      case Block::Beta:
        for (int i = 0; i < b.size; ++i) out.push_back("beta." + label(fixed, i));
        break;
      case Block::SigmaMatrix:
        for (int j = 0; j < q_; ++j)
          for (int i = 0; i <= j; ++i) out.push_back("Sigma." + label(random, i) + "." + label(random, j));
        break;
      case Block::MuU:
        for (int i = 0; i < b.size; ++i) out.push_back("mu_u." + label(random, i));
        break;
      default:
        out.push_back(to_string(b.block));
    }
  }
  return out;
}

Eigen::VectorXd complete_score(const ModelParams& params, const ParamLayout& layout, const SubjectDesign& design,
                               const Discretization* disc, const LatentState& latent) {
  Eigen::VectorXd g(layout.dim());
  for (const auto& b : layout.blocks()) {
    auto seg = g.segment(b.offset, b.size);
    switch (b.block) {
      case Block::Beta:
        seg = score_beta(params, design, latent).gradient;
        break;
      case Block::LogSigma:
        seg = params.sigma * score_sigma_noise(params, design, latent).gradient;
        break;
      case Block::SigmaMatrix:
        seg = score_sigma_matrix(params, latent).gradient;
        break;
      case Block::MuU:
        seg = score_mu_u(params, latent).gradient;
        break;
      case Block::LogNuU:
        seg = params.re.nu * score_nu(params, disc, latent, Component::RandomEffect).gradient;
        break;
      case Block::MuW:
        seg = score_mu_w(params, *disc, latent).gradient;
        break;
      case Block::LogKappa:
        seg = params.kappa * score_operator(params, *disc, latent).gradient;
        break;
      case Block::LogNuW:
        seg = params.proc.nu * score_nu(params, disc, latent, Component::Process).gradient;
        break;
      case Block::LogNuZ:
        seg = params.noise.nu * score_nu(params, disc, latent, Component::Noise).gradient;
        break;
    }
  }
  return g;
}

Information complete_information(const ModelParams& params, const ParamLayout& layout,
                                 const SubjectDesign& design, const Discretization* disc,
                                 const LatentState& latent) {
  Information out{Eigen::MatrixXd::Zero(layout.dim(), layout.dim()), std::vector<bool>(layout.dim(), false)};
  for (const auto& b : layout.blocks()) {
    std::optional<Eigen::MatrixXd> info;
    double scale = 1.0;
    switch (b.block) {
      case Block::Beta:
        info = score_beta(params, design, latent).information;
        break;
      case Block::LogSigma:
        info = score_sigma_noise(params, design, latent).information;
        scale = params.sigma;
        break;
      case Block::SigmaMatrix:
        info = score_sigma_matrix(params, latent).information;
        break;
      case Block::MuU:
        info = score_mu_u(params, latent).information;
        break;
      case Block::LogNuU:
        info = score_nu(params, disc, latent, Component::RandomEffect).information;
        scale = params.re.nu;
        break;
      case Block::MuW:
        info = score_mu_w(params, *disc, latent).information;
        break;
      case Block::LogKappa:
        break;
      case Block::LogNuW:
        info = score_nu(params, disc, latent, Component::Process).information;
        scale = params.proc.nu;
        break;
      case Block::LogNuZ:
        info = score_nu(params, disc, latent, Component::Noise).information;
        scale = params.noise.nu;
        break;
    }
    if (info) {
      out.matrix.block(b.offset, b.offset, b.size, b.size) = scale * scale * *info;
    } else {
      for (int i = 0; i < b.size; ++i) out.unavailable[b.offset + i] = true;
    }
  }
  return out;
}

GradientEstimate assemble_gradient(const ModelParams& params, const ParamLayout& layout,
                                   const std::vector<SubjectDesign>& designs,
                                   const std::vector<Discretization>& discs,
                                   const std::vector<std::vector<LatentState>>& draws,
                                   const std::vector<int>& index, const std::vector<double>& weights) {
  if (index.size() != weights.size() || draws.size() != index.size())
    throw ShapeError("assemble_gradient: index, weights and draws disagree in length");
  const int dim = layout.dim();
  GradientEstimate out{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim), std::vector<bool>(dim, false),
                       Eigen::MatrixXd::Zero(dim, dim)};
  for (std::size_t s = 0; s < index.size(); ++s) {
    const int i = index[s];
    if (!(weights[s] > 0.0)) throw ParameterError("assemble_gradient: weights must be positive");
    if (draws[s].empty()) throw ParameterError("assemble_gradient: subject has zero Gibbs draws");
    const Discretization* disc = params.has_process() ? &discs[i] : nullptr;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& latent : draws[s]) mean += complete_score(params, layout, designs[i], disc, latent);
    mean /= static_cast<double>(draws[s].size());
    out.gradient += weights[s] * mean;
    out.score_outer += weights[s] * mean * mean.transpose();
    const Information info = complete_information(params, layout, designs[i], disc, draws[s].back());
    out.preconditioner += weights[s] * info.matrix;
    for (int k = 0; k < dim; ++k) out.unavailable[k] = out.unavailable[k] || info.unavailable[k];
  }
  bool any = false;
  for (int k = 0; k < dim; ++k) {
    if (out.unavailable[k]) {
      out.preconditioner.row(k).setZero();
      out.preconditioner.col(k).setZero();
      out.preconditioner(k, k) = 1.0;
    } else {
      any = true;
    }
  }
  if (!any && dim > 0) throw ConfigError("assemble_gradient: no parameter block has an expected information");
  return out;
}

}  // namespace ngmix
