#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ngmix/model.hpp"

namespace ngmix {

struct GibbsConfig {
  int sweeps_per_step = 5;
  bool warm_start = true;

  void validate() const;
};

struct GaussianDraw {
  Eigen::VectorXd U;
  Eigen::VectorXd W;
};

/// Mean and precision of (W, U) | V, y, stacked W first.
struct GaussianConditional {
  Eigen::VectorXd mean;
  SparseMatrix precision;
};

GaussianConditional gaussian_conditional(const ModelParams& params, const SubjectDesign& design,
                                         const Discretization* disc, const LatentState& v);

/// Exact joint draw of (U, W) given the variance components and the data.
GaussianDraw draw_gaussian_block(const ModelParams& params, const SubjectDesign& design,
                                 const Discretization* disc, const LatentState& v, Rng& rng);

/// Full conditionals of the variance components.
GigParams v_u_conditional(const ModelParams& params, const Eigen::VectorXd& U);
std::vector<GigParams> v_z_conditional(const ModelParams& params, const Eigen::VectorXd& residuals);
std::vector<GigParams> v_w_conditional(const ModelParams& params, const Discretization& disc,
                                       const Eigen::VectorXd& W);

double draw_v_u(const ModelParams& params, const Eigen::VectorXd& U, Rng& rng);
/// Per-subject scope returns the single pooled draw repeated n times.
Eigen::VectorXd draw_v_z(const ModelParams& params, const Eigen::VectorXd& residuals, Rng& rng);
Eigen::VectorXd draw_v_w(const ModelParams& params, const Discretization& disc, const Eigen::VectorXd& W,
                         Rng& rng);

/// cfg.sweeps_per_step alternations of (U, W) | V, y and V | U, W, y.
LatentState sweep(const ModelParams& params, const SubjectDesign& design, const Discretization* disc,
                  LatentState state, const GibbsConfig& cfg, Rng& rng);

}  // namespace ngmix
