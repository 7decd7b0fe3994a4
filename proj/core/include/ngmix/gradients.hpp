#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngmix/model.hpp"

namespace ngmix {

enum class Block { Beta, LogSigma, SigmaMatrix, MuU, LogNuU, MuW, LogKappa, LogNuW, LogNuZ };
std::string to_string(Block block);

/// Gradient of the complete-data log-likelihood of one parameter block and,
/// when known in closed form, the expected information (negated expected Hessian).
/// Both are on the natural scale (sigma, kappa, nu rather than their logs).
struct ScoreBlock {
  Block block;
  Eigen::VectorXd gradient;
  std::optional<Eigen::MatrixXd> information;
};

ScoreBlock score_beta(const ModelParams& params, const SubjectDesign& design, const LatentState& latent);
ScoreBlock score_sigma_noise(const ModelParams& params, const SubjectDesign& design, const LatentState& latent);
/// Gradient with respect to vech(Sigma).
ScoreBlock score_sigma_matrix(const ModelParams& params, const LatentState& latent);
ScoreBlock score_mu_u(const ModelParams& params, const LatentState& latent);
/// Gradient with respect to kappa; no closed-form information.
ScoreBlock score_operator(const ModelParams& params, const Discretization& disc, const LatentState& latent);
ScoreBlock score_mu_w(const ModelParams& params, const Discretization& disc, const LatentState& latent);

enum class Component { Noise, RandomEffect, Process };
/// Tail-parameter score for NIG, GAL and t components.
ScoreBlock score_nu(const ModelParams& params, const Discretization* disc, const LatentState& latent,
                    Component component);

struct BlockSpan {
  Block block;
  int offset;
  int size;
};

/// Ordering of the free parameters of a model in the working (optimisation)
/// parametrisation, where sigma, kappa and nu enter through their logarithms.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelParams& params);

  int dim() const { return dim_; }
  const std::vector<BlockSpan>& blocks() const { return blocks_; }
  std::optional<BlockSpan> find(Block block) const;
  static bool is_log(Block block);

  Eigen::VectorXd pack(const ModelParams& params) const;
  ModelParams unpack(const Eigen::VectorXd& theta, const ModelParams& like) const;
  Eigen::VectorXd natural(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd working(const Eigen::VectorXd& natural) const;
  /// d natural / d working, elementwise.
  Eigen::VectorXd natural_jacobian(const Eigen::VectorXd& theta) const;
  std::vector<std::string> names(const std::vector<std::string>& fixed,
                                 const std::vector<std::string>& random) const;

 private:
  std::vector<BlockSpan> blocks_;
  int dim_ = 0;
  int q_ = 0;
};

/// Every block's score for one subject and one latent draw, on the working scale.
Eigen::VectorXd complete_score(const ModelParams& params, const ParamLayout& layout, const SubjectDesign& design,
                               const Discretization* disc, const LatentState& latent);

struct Information {
  Eigen::MatrixXd matrix;          ///< working scale; zero on unavailable coordinates
  std::vector<bool> unavailable;   ///< per coordinate
};

/// Block-diagonal complete-data information of one subject on the working scale.
Information complete_information(const ModelParams& params, const ParamLayout& layout,
                                 const SubjectDesign& design, const Discretization* disc,
                                 const LatentState& latent);

struct GradientEstimate {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd preconditioner;   ///< weighted cFIM, identity on unavailable blocks
  std::vector<bool> unavailable;
  Eigen::MatrixXd score_outer;      ///< sum_i w_i s_i s_i^T of the per-subject mean scores
};

/// Monte Carlo average over each subject's draws, weighted across the sub-sample.
/// `draws[i]` belongs to subject `index[i]`.
GradientEstimate assemble_gradient(const ModelParams& params, const ParamLayout& layout,
                                   const std::vector<SubjectDesign>& designs,
                                   const std::vector<Discretization>& discs,
                                   const std::vector<std::vector<LatentState>>& draws,
                                   const std::vector<int>& index, const std::vector<double>& weights);

}  // namespace ngmix
