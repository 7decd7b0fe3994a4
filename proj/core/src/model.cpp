#include "ngmix/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ngmix/errors.hpp"
#include "ngmix/numeric.hpp"

namespace ngmix {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

Eigen::VectorXd mu_u_or_zero(const ModelParams& p) {
  if (p.has_mu_u() && p.mu_u.size() == p.q()) return p.mu_u;
  return Eigen::VectorXd::Zero(p.q());
}

}  // namespace

void SubjectRecord::validate() const {
  const Eigen::Index n = times.size();
  if (n < 1) throw ShapeError("subject '" + id + "': no observations");
  if (y.size() != n || x.rows() != n || d.rows() != n)
    throw ShapeError("subject '" + id + "': times, y, x and d disagree in length");
  if (!times.allFinite() || !y.allFinite() || !all_finite(x) || !all_finite(d))
    throw DomainError("subject '" + id + "': non-finite value");
  for (Eigen::Index j = 1; j < n; ++j)
    if (!(times(j) > times(j - 1))) throw DomainError("subject '" + id + "': times not strictly increasing");
}

NoiseScope parse_noise_scope(std::string_view name) {
  if (name == "observation" || name == "per-observation") return NoiseScope::PerObservation;
  if (name == "subject" || name == "per-subject") return NoiseScope::PerSubject;
  throw ParameterError("unknown noise scope '" + std::string(name) + "'");
}

ProcessKind parse_process_kind(std::string_view name) {
  if (name == "none") return ProcessKind::None;
  if (name == "exponential") return ProcessKind::Exponential;
  if (name == "irw" || name == "integrated-random-walk") return ProcessKind::IntegratedRandomWalk;
  throw ParameterError("unknown process kind '" + std::string(name) + "'");
}

std::string to_string(NoiseScope scope) {
  return scope == NoiseScope::PerObservation ? "observation" : "subject";
}

std::string to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::None:
      return "none";
    case ProcessKind::Exponential:
      return "exponential";
    case ProcessKind::IntegratedRandomWalk:
      return "irw";
  }
  return "none";
}

bool ModelParams::has_mu_u() const {
  return q() > 0 && (re.family == Family::NIG || re.family == Family::GAL);
}
bool ModelParams::has_nu_u() const { return q() > 0 && has_tail_parameter(re.family); }
bool ModelParams::has_mu_w() const {
  return has_process() && (proc.family == Family::NIG || proc.family == Family::GAL);
}
bool ModelParams::has_nu_w() const { return has_process() && has_tail_parameter(proc.family); }
bool ModelParams::has_nu_z() const { return has_tail_parameter(noise.family); }

void ModelParams::validate() const {
  if (!beta.allFinite()) throw ParameterError("beta must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be positive");
  if (Sigma.rows() != Sigma.cols()) throw ShapeError("Sigma must be square");
  if (q() > 0) (void)spd_factor(Sigma);
  if (has_mu_u() && mu_u.size() != 0 && mu_u.size() != q()) throw ShapeError("mu_u must have length q");
  auto check_nu = [](const NvmSpec& s, const char* what) {
    if (has_tail_parameter(s.family) && !(s.nu > 0.0 && std::isfinite(s.nu))) {
      std::ostringstream os;
      os << what << " tail parameter must be positive, got " << s.nu;
      throw ParameterError(os.str());
    }
  };
  check_nu(noise, "noise");
  if (q() > 0) check_nu(re, "random-effect");
  if (has_process()) {
    if (proc.family == Family::StudentT) throw UnsupportedFamilyError("process family t is not supported");
    check_nu(proc, "process");
    if (process == ProcessKind::Exponential && !(kappa > 0.0 && std::isfinite(kappa)))
      throw ParameterError("kappa must be positive");
  }
  if (!std::isfinite(mu_w)) throw ParameterError("mu_w must be finite");
}

SubjectDesign make_design(const SubjectRecord& rec, ProcessKind process, const GridOptions& opts) {
  rec.validate();
  if (process == ProcessKind::None) return make_design(rec, process, Grid());
  return make_design(rec, process, default_grid(rec.times, opts.mesh_nodes, opts.max_nodes));
}

SubjectDesign make_design(const SubjectRecord& rec, ProcessKind process, const Grid& grid) {
  SubjectDesign out;
  out.rec = rec;
  if (process == ProcessKind::None) {
    out.A.resize(rec.n(), 0);
    return out;
  }
  out.grid = grid;
  out.A = observation_matrix(grid, rec.times);
  return out;
}

Discretization discretize(const ModelParams& params, const SubjectDesign& design) {
  if (!params.has_process()) return {};
  OperatorSpec spec;
  spec.kind = params.process == ProcessKind::Exponential ? OperatorKind::Exponential
                                                          : OperatorKind::IntegratedRandomWalk;
  spec.kappa = params.kappa;
  return assemble(spec, design.grid);
}

void LatentState::validate() const {
  auto positive = [](const Eigen::VectorXd& v) { return v.size() == 0 || (v.array() > 0.0).all(); };
  if (!positive(Vz) || !positive(Vw) || !(Vu > 0.0) || !Vz.allFinite() || !Vw.allFinite() || !std::isfinite(Vu))
    throw DomainError("latent variance components must be positive and finite");
}

GigParams noise_prior(const ModelParams& params) { return mixing_law(params.noise); }
GigParams re_prior(const ModelParams& params) { return mixing_law(params.re); }
GigParams process_prior(const ModelParams& params, double h) {
  return process_node_prior(params.proc.family, params.proc.nu, h);
}

double re_mean_v(const ModelParams& params) {
  if (params.re.family == Family::Normal) return 1.0;
  return gig_moment(re_prior(params), 1.0).value_or(1.0);
}

LatentState initial_state(const ModelParams& params, const SubjectDesign& design, const Discretization* disc) {
  LatentState s;
  s.U = Eigen::VectorXd::Zero(params.q());
  s.Vz = Eigen::VectorXd::Ones(design.rec.n());
  s.Vu = 1.0;
  if (params.has_process() && disc != nullptr) {
    s.W = Eigen::VectorXd::Zero(disc->size());
    s.Vw = disc->h;
  } else {
    s.W.resize(0);
    s.Vw.resize(0);
  }
  return s;
}

Eigen::VectorXd residuals(const ModelParams& params, const SubjectDesign& design, const LatentState& latent) {
  const SubjectRecord& r = design.rec;
  Eigen::VectorXd e = r.y - r.x * params.beta;
  if (params.q() > 0) e -= r.d * latent.U;
  if (design.K() > 0 && latent.W.size() == design.K()) e -= design.A * latent.W;
  return e;
}

double complete_loglik(const ModelParams& params, const SubjectDesign& design, const Discretization* disc,
                       const LatentState& latent) {
  latent.validate();
  const SubjectRecord& rec = design.rec;
  const int n = rec.n();
  if (latent.Vz.size() != n) throw ShapeError("complete_loglik: Vz has wrong length");
  if (latent.U.size() != params.q()) throw ShapeError("complete_loglik: U has wrong length");

  const Eigen::VectorXd e = residuals(params, design, latent);
  const bool gaussian_noise = params.noise.family == Family::Normal;
  double ll = 0.0;
  const double s2 = params.sigma * params.sigma;
  for (int j = 0; j < n; ++j) {
    const double v = gaussian_noise ? 1.0 : latent.Vz(j);
    ll += -0.5 * (kLog2Pi + std::log(s2 * v)) - 0.5 * e(j) * e(j) / (s2 * v);
  }
  if (!gaussian_noise) {
    const GigParams prior = noise_prior(params);
    if (params.scope == NoiseScope::PerSubject) {
      ll += gig_logpdf(prior, latent.Vz(0));
    } else {
      for (int j = 0; j < n; ++j) ll += gig_logpdf(prior, latent.Vz(j));
    }
  }

  const int q = params.q();
  if (q > 0) {
    const bool gaussian_re = params.re.family == Family::Normal;
    const double v = gaussian_re ? 1.0 : latent.Vu;
    const Eigen::VectorXd mu = mu_u_or_zero(params);
    const Eigen::VectorXd r = latent.U + mu * re_mean_v(params) - mu * v;
    const Eigen::MatrixXd L = spd_factor(params.Sigma);
    const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(r);
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    ll += -0.5 * q * (kLog2Pi + std::log(v)) - 0.5 * logdet - 0.5 * z.squaredNorm() / v;
    if (!gaussian_re) ll += gig_logpdf(re_prior(params), latent.Vu);
  }

  if (params.has_process()) {
    if (disc == nullptr) throw ParameterError("complete_loglik: process model needs a discretization");
    const int K = disc->size();
    if (latent.W.size() != K) throw ShapeError("complete_loglik: W has wrong length");
    const bool gaussian_proc = params.proc.family == Family::Normal;
    const Eigen::VectorXd& v = gaussian_proc ? disc->h : latent.Vw;
    if (v.size() != K) throw ShapeError("complete_loglik: Vw has wrong length");
    const double mu = params.has_mu_w() ? params.mu_w : 0.0;
    const Eigen::VectorXd r = disc->K * latent.W - mu * (v - disc->h);
    ll += disc->log_det_K;
    for (int k = 0; k < K; ++k) ll += -0.5 * (kLog2Pi + std::log(v(k))) - 0.5 * r(k) * r(k) / v(k);
    if (!gaussian_proc)
      for (int k = 0; k < K; ++k) ll += gig_logpdf(process_prior(params, disc->h(k)), v(k));
  }
  return ll;
}

Eigen::MatrixXd marginal_covariance_gaussian(const ModelParams& params, const SubjectDesign& design,
                                             const Discretization* disc) {
  const SubjectRecord& rec = design.rec;
  Eigen::MatrixXd C = params.sigma * params.sigma * Eigen::MatrixXd::Identity(rec.n(), rec.n());
  if (params.q() > 0) C += rec.d * params.Sigma * rec.d.transpose();
  if (params.has_process()) {
    if (disc == nullptr) throw ParameterError("marginal_covariance_gaussian: process model needs a discretization");
    WLaw law(*disc, disc->h, 0.0, 0.0);
    const Eigen::MatrixXd F = design.A * law.covariance_factor();
    C += F * F.transpose();
  }
  return C;
}

double marginal_loglik_gaussian(const ModelParams& params, const SubjectDesign& design,
                                const Discretization* disc) {
  if (params.noise.family != Family::Normal || (params.q() > 0 && params.re.family != Family::Normal) ||
      (params.has_process() && params.proc.family != Family::Normal))
    throw UnsupportedFamilyError("marginal_loglik_gaussian: every component must be Gaussian");
  const SubjectRecord& rec = design.rec;
  const Eigen::MatrixXd C = marginal_covariance_gaussian(params, design, disc);
  const Eigen::MatrixXd L = spd_factor(C);
  const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(rec.y - rec.x * params.beta);
  return -0.5 * rec.n() * kLog2Pi - L.diagonal().array().log().sum() - 0.5 * z.squaredNorm();
}

std::vector<SubjectRecord> simulate(const ModelParams& params, const std::vector<SubjectRecord>& designs,
                                    std::uint64_t seed, const GridOptions& opts) {
  params.validate();
  std::vector<SubjectRecord> out;
  out.reserve(designs.size());
  const int q = params.q();
  const Eigen::MatrixXd L = q > 0 ? spd_factor(params.Sigma) : Eigen::MatrixXd();
  const Eigen::VectorXd mu = mu_u_or_zero(params);
  const double ev = q > 0 ? re_mean_v(params) : 1.0;

  for (std::size_t i = 0; i < designs.size(); ++i) {
    SubjectRecord rec = designs[i];
    rec.y = Eigen::VectorXd::Zero(rec.n());
    const SubjectDesign design = make_design(rec, params.process, opts);
    const Discretization disc = discretize(params, design);
    Rng rng = make_stream(seed, i);
    std::normal_distribution<double> normal;
    const int n = rec.n();

    Eigen::VectorXd vz = Eigen::VectorXd::Ones(n);
    if (params.noise.family != Family::Normal) {
      const GigParams prior = noise_prior(params);
      if (params.scope == NoiseScope::PerSubject) {
        vz.setConstant(gig_sample(prior, rng));
      } else {
        for (int j = 0; j < n; ++j) vz(j) = gig_sample(prior, rng);
      }
    }

    Eigen::VectorXd y = rec.x * params.beta;
    if (q > 0) {
      const double vu = params.re.family == Family::Normal ? 1.0 : gig_sample(re_prior(params), rng);
      Eigen::VectorXd z(q);
      for (int k = 0; k < q; ++k) z(k) = normal(rng);
      const Eigen::VectorXd U = -mu * ev + mu * vu + std::sqrt(vu) * (L * z);
      y += rec.d * U;
    }
    if (params.has_process()) {
      Eigen::VectorXd vw = disc.h;
      if (params.proc.family != Family::Normal)
        for (int k = 0; k < disc.size(); ++k) vw(k) = gig_sample(process_prior(params, disc.h(k)), rng);
      const double mw = params.has_mu_w() ? params.mu_w : 0.0;
      const Eigen::VectorXd W = WLaw(disc, vw, mw, -mw).sample(rng);
      y += design.A * W;
    }
    for (int j = 0; j < n; ++j) y(j) += params.sigma * std::sqrt(vz(j)) * normal(rng);
    rec.y = y;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace ngmix
