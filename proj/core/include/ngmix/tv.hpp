#pragma once

#include <functional>

#include "ngmix/mixtures.hpp"

namespace ngmix {

using Density = std::function<double(double)>;

/// 0.5 * integral of |f - g| over the real line. `scale` is a typical width of
/// the densities and only steers where the integrator looks for crossings.
/// Throws NumericalError (with the achieved error estimate) when the
/// quadrature cannot reach an absolute error of 1e-6.
double tv_distance(const Density& f, const Density& g, double scale = 1.0);

/// Symmetric NIG law with shape a and scale b_nig: mixing GIG(-1/2, a / b_nig, a * b_nig).
double nig_density(double a, double b_nig, double x);

/// Cauchy law whose mixing variable is GIG(-1/2, 0, b_ch), i.e. scale sqrt(b_ch).
double cauchy_density(double b_ch, double x);

struct TvFit {
  double tv;
  double best;  ///< minimising b_ch (Cauchy) or standard deviation (Gaussian)
};

TvFit tv_to_nearest_cauchy(double a, double b_nig = 1.0);
TvFit tv_to_nearest_gaussian(double a);

struct SwitchRule {
  double to_gaussian_above = 250.0;
  double to_cauchy_below = 0.001;

  void validate() const;
};

/// NIG with nu above / below the thresholds becomes Normal / Cauchy; other specs pass through.
NvmSpec apply_switch(const SwitchRule& rule, const NvmSpec& spec);

}  // namespace ngmix
