#include "ngmix/tv.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "ngmix/errors.hpp"

namespace ngmix {
namespace {

constexpr double kUmax = 40.0;
constexpr int kScan = 8001;
constexpr double kTolerance = 1e-6;

}  // namespace

double tv_distance(const Density& f, const Density& g, double scale) {
  if (!(scale > 0.0)) throw DomainError("tv_distance: scale must be positive");
  // Work in u with x = scale * sinh(u): fine near the centre, logarithmic in the tails.
  auto diff = [&](double u) { return f(scale * std::sinh(u)) - g(scale * std::sinh(u)); };
  auto integrand = [&](double u) { return std::abs(diff(u)) * scale * std::cosh(u); };

  std::vector<double> cuts{-kUmax};
  const double du = 2.0 * kUmax / (kScan - 1);
  double prev_u = -kUmax;
  double prev = diff(prev_u);
  for (int i = 1; i < kScan; ++i) {
    const double u = -kUmax + i * du;
    const double cur = diff(u);
    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
      double lo = prev_u;
      double hi = u;
      const bool rising = prev < 0.0;
      for (int it = 0; it < 60 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = diff(mid);
        if ((v < 0.0) == rising)
          lo = mid;
        else
          hi = mid;
      }
      cuts.push_back(0.5 * (lo + hi));
    }
    prev_u = u;
    prev = cur;
  }
  cuts.push_back(kUmax);

  double total = 0.0;
  double err_total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1],
                                                                            12, 1e-10, &err);
    err_total += err;
  }
  const double tv = 0.5 * total;
  if (!std::isfinite(tv) || 0.5 * err_total > kTolerance) {
    std::ostringstream os;
    os << "tv_distance: quadrature did not reach tolerance (error estimate " << 0.5 * err_total << ")";
    throw NumericalError(os.str(), 0.5 * err_total);
  }
  return std::min(1.0, std::max(0.0, tv));
}

double nig_density(double a, double b_nig, double x) {
  return std::exp(normal_mixture_logpdf(GigParams{-0.5, a / b_nig, a * b_nig}, 1.0, x));
}

double cauchy_density(double b_ch, double x) {
  const double s = std::sqrt(b_ch);
  return s / (std::numbers::pi * (s * s + x * x));
}

namespace {

// Coarse scan over log(parameter), then Brent on the bracketing cell.
TvFit minimise_log(const std::function<double(double)>& objective, double lo, double hi, double step,
                   const char* what) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (double x = lo; x <= hi + 1e-12; x += step) {
    xs.push_back(x);
    ys.push_back(objective(x));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (ys[i] < ys[best]) best = i;
  if (best == 0 || best + 1 == ys.size()) {
    std::ostringstream os;
    os << what << ": minimum not bracketed inside [exp(" << lo << "), exp(" << hi << ")]";
    throw NumericalError(os.str(), ys[best]);
  }
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::brent_find_minima(objective, xs[best - 1], xs[best + 1], 40, iters);
  return {r.second, std::exp(r.first)};
}

}  // namespace

TvFit tv_to_nearest_cauchy(double a, double b_nig) {
  if (!(a > 0.0) || !(b_nig > 0.0)) throw DomainError("tv_to_nearest_cauchy: a and b_nig must be positive");
  // TV is invariant under a common rescaling, so fix b_nig = 1 and rescale the optimum.
  auto f = [a](double x) { return nig_density(a, 1.0, x); };
  auto objective = [&](double log_b) {
    const double b = std::exp(log_b);
    auto g = [b](double x) { return cauchy_density(b, x); };
    return tv_distance(f, g, std::min({1.0, std::sqrt(b), std::sqrt(a)}));
  };
  const double la = std::log(a);
  TvFit fit = minimise_log(objective, std::min(la, 0.0) - 6.0, std::max(la, 0.0) + 6.0, 0.5,
                           "tv_to_nearest_cauchy");
  fit.best *= b_nig;
  return fit;
}

TvFit tv_to_nearest_gaussian(double a) {
  if (!(a > 0.0)) throw DomainError("tv_to_nearest_gaussian: a must be positive");
  auto f = [a](double x) { return nig_density(a, 1.0, x); };
  auto objective = [&](double log_sd) {
    const double sd = std::exp(log_sd);
    auto g = [sd](double x) {
      const double z = x / sd;
      return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
    };
    return tv_distance(f, g, std::min({1.0, sd, std::sqrt(a)}));
  };
  return minimise_log(objective, -6.0, 4.0, 0.25, "tv_to_nearest_gaussian");
}

void SwitchRule::validate() const {
  if (!(to_cauchy_below > 0.0) || !(to_gaussian_above > 0.0) || !(to_cauchy_below < to_gaussian_above))
    throw ConfigError("switch rule needs 0 < to_cauchy_below < to_gaussian_above");
}

NvmSpec apply_switch(const SwitchRule& rule, const NvmSpec& spec) {
  if (spec.family != Family::NIG) return spec;
  NvmSpec out = spec;
  if (spec.nu < rule.to_cauchy_below) {
    out.family = Family::Cauchy;
  } else if (spec.nu > rule.to_gaussian_above) {
    out.family = Family::Normal;
  }
  return out;
}

}  // namespace ngmix
