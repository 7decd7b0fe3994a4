#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngmix/fem.hpp"
#include "ngmix/mixtures.hpp"

namespace ngmix {

/// One subject's follow-up: y = x beta + d U + A W + noise.
struct SubjectRecord {
  std::string id;
  Eigen::VectorXd times;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  ///< n x p fixed-effect design
  Eigen::MatrixXd d;  ///< n x q random-effect design

  int n() const { return static_cast<int>(times.size()); }
  void validate() const;
};

enum class NoiseScope { PerObservation, PerSubject };
enum class ProcessKind { None, Exponential, IntegratedRandomWalk };

NoiseScope parse_noise_scope(std::string_view name);  ///< "observation" | "subject"
ProcessKind parse_process_kind(std::string_view name);  ///< "none" | "exponential" | "irw"
std::string to_string(NoiseScope scope);
std::string to_string(ProcessKind kind);

/// Full parameter set. Only `family` and `nu` of the three specs are used;
/// skews live in mu_u and mu_w.
struct ModelParams {
  Eigen::VectorXd beta;
  double sigma = 1.0;
  Eigen::MatrixXd Sigma;  ///< q x q random-effect covariance
  Eigen::VectorXd mu_u;   ///< random-effect skew (non-Gaussian random effects)
  NvmSpec noise;
  NvmSpec re;
  NvmSpec proc;
  NoiseScope scope = NoiseScope::PerObservation;
  ProcessKind process = ProcessKind::None;
  double kappa = 1.0;  ///< exponential operator range
  double mu_w = 0.0;   ///< process skew

  int p() const { return static_cast<int>(beta.size()); }
  int q() const { return static_cast<int>(Sigma.rows()); }
  bool has_process() const { return process != ProcessKind::None; }

  bool has_mu_u() const;
  bool has_nu_u() const;
  bool has_mu_w() const;
  bool has_kappa() const { return process == ProcessKind::Exponential; }
  bool has_nu_w() const;
  bool has_nu_z() const;

  void validate() const;
};

/// Per-subject data together with its (fixed) FEM grid and observation matrix.
struct SubjectDesign {
  SubjectRecord rec;
  Grid grid;         ///< unset when the model has no process
  SparseMatrix A;    ///< n x K, or n x 0 without a process

  int K() const { return static_cast<int>(A.cols()); }
};

struct GridOptions {
  int mesh_nodes = 20;
  int max_nodes = 200;
};

SubjectDesign make_design(const SubjectRecord& rec, ProcessKind process, const GridOptions& opts = {});
/// Same, on a caller-chosen grid.
SubjectDesign make_design(const SubjectRecord& rec, ProcessKind process, const Grid& grid);

/// Operator for the current kappa; nullopt-like empty result when there is no process.
Discretization discretize(const ModelParams& params, const SubjectDesign& design);

/// One subject's latent variables.
struct LatentState {
  Eigen::VectorXd U;
  Eigen::VectorXd W;
  Eigen::VectorXd Vz;
  double Vu = 1.0;
  Eigen::VectorXd Vw;

  void validate() const;
};

/// U = 0, W = 0 and every variance at its prior mean (h for the process).
LatentState initial_state(const ModelParams& params, const SubjectDesign& design, const Discretization* disc);

/// Mixing-law priors of the three layers.
GigParams noise_prior(const ModelParams& params);
GigParams re_prior(const ModelParams& params);
GigParams process_prior(const ModelParams& params, double h);

/// E[V_u] used in the zero-mean shift delta_U = -mu_u E[V_u] (1 when the mean does not exist).
double re_mean_v(const ModelParams& params);

/// y - x beta - d U - A W.
Eigen::VectorXd residuals(const ModelParams& params, const SubjectDesign& design, const LatentState& latent);

/// log p(y, U, W, V) for one subject. `disc` may be null when the model has no process.
double complete_loglik(const ModelParams& params, const SubjectDesign& design, const Discretization* disc,
                       const LatentState& latent);

/// Marginal covariance d Sigma d^T + A K^{-1} diag(h) K^{-T} A^T + sigma^2 I of an all-Gaussian model.
Eigen::MatrixXd marginal_covariance_gaussian(const ModelParams& params, const SubjectDesign& design,
                                             const Discretization* disc);

/// Closed-form log-likelihood of an all-Gaussian model; throws UnsupportedFamilyError otherwise.
double marginal_loglik_gaussian(const ModelParams& params, const SubjectDesign& design,
                                const Discretization* disc);

/// Draws V's, then U and W, then y. Outcomes in `designs` are ignored; the
/// i-th subject uses random stream i of `seed`.
std::vector<SubjectRecord> simulate(const ModelParams& params, const std::vector<SubjectRecord>& designs,
                                    std::uint64_t seed, const GridOptions& opts = {});

}  // namespace ngmix
