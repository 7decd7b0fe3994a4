#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ngmix/gibbs.hpp"
#include "ngmix/model.hpp"

namespace ngmix {

enum class PredictMode { Nowcast, Smooth, Forecast };

PredictMode parse_predict_mode(std::string_view name);  ///< "nowcast" | "smooth" | "forecast"
std::string to_string(PredictMode mode);

/// Trailing-window decline rule on the log-outcome scale.
struct DeclineCriterion {
  double threshold = 0.05;  ///< relative loss per unit time
  double window = 1.0;

  void validate() const;
};

struct PredictRequest {
  PredictMode mode = PredictMode::Smooth;
  Eigen::VectorXd horizon;  ///< empty: the subject's observation times
  Eigen::MatrixXd x_h;      ///< covariates at the horizon; empty only when horizon is empty
  Eigen::MatrixXd d_h;
  std::optional<double> cut;  ///< forecast: last usable observation time (default: last observation)
  std::optional<DeclineCriterion> criterion;
  int draws = 1000;
  int burn_in = 50;
  GibbsConfig gibbs{1, true};
  GridOptions grid;
  bool with_noise = false;  ///< add fresh measurement noise to the draws
  bool keep_draws = false;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PredictiveSummary {
  std::string id;
  PredictMode mode = PredictMode::Smooth;
  Eigen::VectorXd time;
  Eigen::VectorXd mean;
  Eigen::VectorXd median;
  Eigen::VectorXd q05;
  Eigen::VectorXd q95;
  Eigen::VectorXd excursion;  ///< NaN where not requested or not computable
  Eigen::VectorXd mc_se;      ///< Monte Carlo error of the mean
  Eigen::MatrixXd draws;      ///< draws x times, when kept
  std::vector<std::string> warnings;
};

/// Fraction of draws whose slope over [t - window, t] is at most log(1 - threshold).
/// Draw rows are trajectories over `times`; NaN where t - window precedes times(0)
/// or fewer than two times lie in the window.
Eigen::VectorXd excursion_probability(const Eigen::MatrixXd& draws, const Eigen::VectorXd& times,
                                      const DeclineCriterion& criterion);

PredictiveSummary predict(const ModelParams& theta_hat, const SubjectRecord& subject, const PredictRequest& request);

/// One request per subject, run in parallel; subject i uses seed stream i.
std::vector<PredictiveSummary> predict_all(const ModelParams& theta_hat, const std::vector<SubjectRecord>& subjects,
                                           const std::vector<PredictRequest>& requests, int threads = 1);

/// MDRD eGFR (mL/min/1.73m^2) from serum creatinine in umol/L.
double egfr_from_scr(double scr, double age, bool female, bool black);

}  // namespace ngmix
