#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ngmix/random.hpp"

namespace ngmix {

enum class Family { Normal, NIG, GAL, StudentT, Cauchy };

/// Parses "normal", "nig", "gal", "t", "cauchy".
Family parse_family(std::string_view name);
std::string to_string(Family family);

/// Families whose law carries a tail parameter nu.
bool has_tail_parameter(Family family);

/// Generalized inverse Gaussian law GIG(p, a, b), density
/// (a/b)^{p/2} / (2 K_p(sqrt(ab))) x^{p-1} exp(-(a x + b / x) / 2).
/// b = 0 is the Gamma(p, a/2) boundary and a = 0 the inverse-Gamma(-p, b/2) one.
struct GigParams {
  double p = -0.5;
  double a = 1.0;
  double b = 1.0;

  /// Throws ParameterError unless (a>0, b>0), (b=0, a>0, p>0) or (a=0, b>0, p<0).
  void validate() const;
  bool operator==(const GigParams&) const = default;
};

double gig_logpdf(const GigParams& params, double x);

/// E[V^k]; std::nullopt when the moment does not exist.
std::optional<double> gig_moment(const GigParams& params, double k);

double gig_mode(const GigParams& params);

/// Law of c V for V ~ GIG(p, a, b): GIG(p, a / c, c b).
GigParams gig_scale(const GigParams& params, double c);

double gig_sample(const GigParams& params, Rng& rng);

enum class Constraint {
  Auto,      ///< unit mean when it exists (t keeps its raw law), otherwise unit mode
  UnitMean,
  UnitMode,
  None,      ///< raw laws: NIG GIG(-1/2,nu,nu), GAL GIG(nu,2nu,0), t GIG(-nu/2,0,nu), Cauchy GIG(-1/2,0,1)
};

/// Mixing law of a family under a constraint. Normal has no mixing law and throws.
GigParams constrain_unit(Family family, double nu, Constraint constraint = Constraint::Auto);

/// One stochastic component X = delta + mu V + sqrt(V) L Z.
struct NvmSpec {
  Family family = Family::Normal;
  double nu = 1.0;
  Eigen::VectorXd mu;     ///< skew; empty means zero
  Eigen::VectorXd delta;  ///< shift; empty means zero
  Constraint constraint = Constraint::Auto;
};

GigParams mixing_law(const NvmSpec& spec);

/// One draw of X; V is fixed at 1 for the Normal family.
Eigen::VectorXd nvm_sample(const NvmSpec& spec, const Eigen::MatrixXd& cov_factor, Rng& rng);

/// Marginal log-density of sigma sqrt(V) Z for an arbitrary GIG mixing law.
double normal_mixture_logpdf(const GigParams& mixing, double sigma, double x);

/// Log-density of the symmetric (mu = delta = 0) univariate component sigma sqrt(V) Z.
double nvm_logpdf_1d(const NvmSpec& spec, double sigma, double x);

}  // namespace ngmix
