#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ngmix/errors.hpp"
#include "ngmix/gibbs.hpp"
#include "ngmix/gradients.hpp"
#include "ngmix/model.hpp"
#include "ngmix/tv.hpp"

namespace ngmix {

/// alpha_n = alpha0 / (1 + n / n0)^gamma.
struct StepSchedule {
  double alpha0 = 1.0;
  double n0 = 0.0;      ///< 0 means total_iters / 10
  double gamma = 0.6;
  int burn_in = -1;     ///< negative means total_iters / 2
  int total_iters = 20000;

  void validate() const;
  double alpha(int n) const;
  int effective_burn_in() const;
  double effective_n0() const;
};

enum class SubsampleStrategy { Full, Bernoulli, Grouped };
SubsampleStrategy parse_subsample_strategy(std::string_view name);  ///< "full" | "bernoulli" | "grouped"

/// G_0 holds the leftovers; groups[j] is G_{j+1}.
struct Groups {
  std::vector<int> g0;
  std::vector<std::vector<int>> groups;
};

/// rank of sum_{i in members} x_i^T x_i.
int design_rank(const std::vector<Eigen::MatrixXd>& designs, const std::vector<int>& members);

/// Group formation for the grouped sub-sampler; deterministic in the input order.
Groups form_groups(const std::vector<Eigen::MatrixXd>& designs);

struct SubsampleSettings {
  SubsampleStrategy strategy = SubsampleStrategy::Full;
  double s = 5.0;  ///< bernoulli: keep each subject with probability 1/s
  int M = 0;       ///< grouped: expected sample size (0 means m/5)
  int r = 2;       ///< grouped: groups drawn per iteration
};

struct SubsamplePlan {
  SubsampleStrategy strategy = SubsampleStrategy::Full;
  int m = 0;
  double s = 5.0;
  int M = 0;
  int r = 0;
  Groups groups;
};

SubsamplePlan make_subsample_plan(const SubsampleSettings& settings, const std::vector<Eigen::MatrixXd>& designs);

struct Subsample {
  std::vector<int> index;      ///< ascending
  std::vector<double> weight;  ///< inverse inclusion probabilities
};

Subsample draw_subsample(const SubsamplePlan& plan, Rng& rng);

struct FitConfig {
  StepSchedule schedule;
  SubsampleSettings subsample;
  GibbsConfig gibbs;
  SwitchRule rule;
  GridOptions grid;
  int louis_draws = 200;  ///< 0 skips standard errors
  int warmup = 20;        ///< iterations used to calibrate blocks without closed-form information
  int init_sweeps = 20;
  int mc_batches = 20;
  double max_log_step = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct FitResult {
  ModelParams theta_hat;
  ParamLayout layout;
  std::vector<std::string> names;
  Eigen::VectorXd estimate;      ///< natural scale, layout order
  Eigen::MatrixXd observed_fim;  ///< natural scale
  Eigen::VectorXd std_errors;
  Eigen::VectorXd mc_se;         ///< Monte Carlo error of the estimate
  Eigen::VectorXd se_mc_error;   ///< Monte Carlo error of the standard errors
  Eigen::VectorXd p_lower;
  Eigen::VectorXd p_upper;
  std::vector<std::string> trace_names;
  std::vector<Eigen::VectorXd> trace;  ///< per iteration, natural scale, NaN after a parameter is switched off
  std::vector<std::string> warnings;
  std::vector<LatentState> states;
};

/// Raised when the iterates blow up; carries the trace so far.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<std::string> names, std::vector<Eigen::VectorXd> trace)
      : NumericalError(what), names_(std::move(names)), trace_(std::move(trace)) {}
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Eigen::VectorXd>& trace() const { return trace_; }

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> trace_;
};

/// OLS beta, residual scale split between the stochastic layers; structure,
/// families and tail parameters are taken from `like`.
ModelParams initial_params(const ModelParams& like, const std::vector<SubjectRecord>& data);

FitResult fit(const std::vector<SubjectRecord>& data, const ModelParams& init, const FitConfig& cfg,
              const std::vector<std::string>& fixed_names = {}, const std::vector<std::string>& random_names = {});

struct LouisResult {
  Eigen::MatrixXd fim;            ///< natural scale
  Eigen::MatrixXd variance_term;  ///< sum_i Var[score_i | y_i]
  Eigen::VectorXd std_errors;
  Eigen::VectorXd se_mc_error;
  bool positive_definite = true;
};

/// Observed information at theta_hat: -E[Hessian | y] - Var[score | y] from Gibbs draws.
/// `warm` optionally supplies starting states (one per design).
LouisResult louis_observed_fim(const ModelParams& theta_hat, const std::vector<SubjectDesign>& designs,
                               int mc_draws, const GibbsConfig& gibbs, std::uint64_t seed, int threads = 1,
                               const std::vector<LatentState>* warm = nullptr);

struct PBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Two-sided Wald p-values at the most and least favourable corners of the Monte Carlo error.
PBounds p_bounds(const Eigen::VectorXd& theta, const Eigen::VectorXd& se, const Eigen::VectorXd& mc_se,
                 const Eigen::VectorXd& se_mc_error);

/// Batch-means standard error of the mean of each column.
Eigen::VectorXd batch_means_se(const std::vector<Eigen::VectorXd>& rows, int batches);

}  // namespace ngmix
