#include "ngmix/mixtures.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ngmix/errors.hpp"
#include "ngmix/numeric.hpp"

namespace ngmix {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double uniform01(Rng& rng) {
  // (0, 1): rejection samplers take logs of these.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x;
  do {
    x = u(rng);
  } while (x <= 0.0);
  return x;
}

double standard_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// The samplers below draw from GIG(lambda, omega, omega) with lambda >= 0, using the
// three regimes of Hoermann & Leydold (2014).

double rou_noshift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = standard_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * uniform01(rng);
    const double v = uniform01(rng);
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double rou_shift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = standard_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) solve a cubic with three real roots.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + uniform01(rng) * (uplus - uminus);
    const double v = uniform01(rng);
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// 0 <= lambda < 1, 0 < omega <= 1: piecewise hat (constant, power, exponential).
double hat_sampler(double lambda, double omega, Rng& rng) {
  const double xm = standard_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;
  double k1;
  double k2;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                            : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * uniform01(rng);
    double x;
    double hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = x0 > 2.0 / omega ? x0 : 2.0 / omega;
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = uniform01(rng) * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

double standard_gig(double lambda, double omega, Rng& rng) {
  if (lambda > 2.0 || omega > 3.0) return rou_shift(lambda, omega, rng);
  if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) return rou_noshift(lambda, omega, rng);
  return hat_sampler(lambda, omega, rng);
}

GigParams raw_law(Family family, double nu) {
  switch (family) {
    case Family::NIG:
      return {-0.5, nu, nu};
    case Family::GAL:
      return {nu, 2.0 * nu, 0.0};
    case Family::StudentT:
      return {-0.5 * nu, 0.0, nu};
    case Family::Cauchy:
      return {-0.5, 0.0, 1.0};
    case Family::Normal:
      break;
  }
  throw UnsupportedFamilyError("normal family has no mixing law");
}

}  // namespace

Family parse_family(std::string_view name) {
  if (name == "normal" || name == "gaussian") return Family::Normal;
  if (name == "nig") return Family::NIG;
  if (name == "gal") return Family::GAL;
  if (name == "t") return Family::StudentT;
  if (name == "cauchy") return Family::Cauchy;
  throw ParameterError("unknown family '" + std::string(name) + "'");
}

std::string to_string(Family family) {
  switch (family) {
    case Family::Normal:
      return "normal";
    case Family::NIG:
      return "nig";
    case Family::GAL:
      return "gal";
    case Family::StudentT:
      return "t";
    case Family::Cauchy:
      return "cauchy";
  }
  return "unknown";
}

bool has_tail_parameter(Family family) {
  return family == Family::NIG || family == Family::GAL || family == Family::StudentT;
}

void GigParams::validate() const {
  const bool finite = std::isfinite(p) && std::isfinite(a) && std::isfinite(b);
  const bool ok = finite && a >= 0.0 && b >= 0.0 &&
                  ((a > 0.0 && b > 0.0) || (b == 0.0 && a > 0.0 && p > 0.0) ||
                   (a == 0.0 && b > 0.0 && p < 0.0));
  if (!ok) {
    std::ostringstream os;
    os << "invalid GIG parameters (p=" << p << ", a=" << a << ", b=" << b << ")";
    throw ParameterError(os.str());
  }
}

double gig_logpdf(const GigParams& g, double x) {
  g.validate();
  if (!(x > 0.0)) throw DomainError("gig_logpdf: x must be positive");
  if (g.b == 0.0) {
    return g.p * std::log(g.a / 2.0) - std::lgamma(g.p) + (g.p - 1.0) * std::log(x) - 0.5 * g.a * x;
  }
  if (g.a == 0.0) {
    const double shape = -g.p;
    return shape * std::log(g.b / 2.0) - std::lgamma(shape) + (g.p - 1.0) * std::log(x) -
           0.5 * g.b / x;
  }
  return 0.5 * g.p * std::log(g.a / g.b) - std::numbers::ln2 - log_bessel_k(g.p, std::sqrt(g.a * g.b)) +
         (g.p - 1.0) * std::log(x) - 0.5 * (g.a * x + g.b / x);
}

std::optional<double> gig_moment(const GigParams& g, double k) {
  g.validate();
  if (k == 0.0) return 1.0;
  if (g.b == 0.0) {
    if (g.p + k <= 0.0) return std::nullopt;
    return std::exp(std::lgamma(g.p + k) - std::lgamma(g.p) + k * std::log(2.0 / g.a));
  }
  if (g.a == 0.0) {
    const double shape = -g.p;
    if (shape - k <= 0.0) return std::nullopt;
    return std::exp(k * std::log(g.b / 2.0) + std::lgamma(shape - k) - std::lgamma(shape));
  }
  const double omega = std::sqrt(g.a * g.b);
  return std::exp(0.5 * k * std::log(g.b / g.a) + log_bessel_k(g.p + k, omega) -
                  log_bessel_k(g.p, omega));
}

double gig_mode(const GigParams& g) {
  g.validate();
  const double pm1 = g.p - 1.0;
  if (g.a == 0.0) return g.b / (2.0 * (1.0 - g.p));
  if (g.b == 0.0) return pm1 > 0.0 ? 2.0 * pm1 / g.a : 0.0;
  const double root = std::sqrt(pm1 * pm1 + g.a * g.b);
  return pm1 >= 0.0 ? (pm1 + root) / g.a : g.b / (root - pm1);
}

GigParams gig_scale(const GigParams& g, double c) {
  if (!(c > 0.0)) throw DomainError("gig_scale: factor must be positive");
  return {g.p, g.a / c, g.b * c};
}

double gig_sample(const GigParams& g, Rng& rng) {
  g.validate();
  if (g.b < 1e-300 && g.p > 0.0) {
    std::gamma_distribution<double> gamma(g.p, 2.0 / g.a);
    return gamma(rng);
  }
  if (g.a == 0.0) {
    std::gamma_distribution<double> gamma(-g.p, 2.0 / g.b);
    return 1.0 / gamma(rng);
  }
  const double omega = std::sqrt(g.a * g.b);
  const double alpha = std::sqrt(g.b / g.a);
  double x = standard_gig(std::abs(g.p), omega, rng);
  if (g.p < 0.0) x = 1.0 / x;
  return alpha * x;
}

GigParams constrain_unit(Family family, double nu, Constraint constraint) {
  if (family != Family::Cauchy && !(nu > 0.0 && std::isfinite(nu))) {
    std::ostringstream os;
    os << "tail parameter must be positive, got " << nu;
    throw DomainError(os.str());
  }
  const GigParams raw = raw_law(family, nu);
  if (constraint == Constraint::Auto) {
    switch (family) {
      case Family::StudentT:
        constraint = Constraint::None;
        break;
      case Family::Cauchy:
        constraint = Constraint::UnitMode;
        break;
      default:
        constraint = Constraint::UnitMean;
    }
  }
  switch (constraint) {
    case Constraint::None:
      return raw;
    case Constraint::UnitMean: {
      if (family == Family::NIG || family == Family::GAL) return raw;
      const auto mean = gig_moment(raw, 1.0);
      if (!mean) throw ParameterError(to_string(family) + " mixing law has no mean to normalise");
      return gig_scale(raw, 1.0 / *mean);
    }
    case Constraint::UnitMode: {
      const double mode = gig_mode(raw);
      if (!(mode > 0.0)) throw ParameterError(to_string(family) + " mixing law has its mode at zero");
      return gig_scale(raw, 1.0 / mode);
    }
    case Constraint::Auto:
      break;
  }
  return raw;
}

GigParams mixing_law(const NvmSpec& spec) { return constrain_unit(spec.family, spec.nu, spec.constraint); }

Eigen::VectorXd nvm_sample(const NvmSpec& spec, const Eigen::MatrixXd& cov_factor, Rng& rng) {
  const Eigen::Index d = cov_factor.rows();
  if (cov_factor.cols() != d) throw ShapeError("nvm_sample: covariance factor must be square");
  if (spec.mu.size() != 0 && spec.mu.size() != d) throw ShapeError("nvm_sample: mu has wrong length");
  if (spec.delta.size() != 0 && spec.delta.size() != d)
    throw ShapeError("nvm_sample: delta has wrong length");

  const double v = spec.family == Family::Normal ? 1.0 : gig_sample(mixing_law(spec), rng);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
  Eigen::VectorXd x = std::sqrt(v) * (cov_factor * z);
  if (spec.mu.size() != 0) x += v * spec.mu;
  if (spec.delta.size() != 0) x += spec.delta;
  return x;
}

double normal_mixture_logpdf(const GigParams& g, double sigma, double x) {
  g.validate();
  if (!(sigma > 0.0)) throw DomainError("normal_mixture_logpdf: sigma must be positive");
  const double q = (x / sigma) * (x / sigma);
  const double base = -kLogSqrt2Pi - std::log(sigma);
  const double lam = g.p - 0.5;
  if (g.b == 0.0) {
    const double lognorm = g.p * std::log(g.a / 2.0) - std::lgamma(g.p);
    if (q == 0.0) {
      if (g.p <= 0.5) return std::numeric_limits<double>::infinity();
      return base + lognorm + std::lgamma(lam) + lam * std::log(2.0 / g.a);
    }
    return base + lognorm + std::numbers::ln2 + 0.5 * lam * std::log(q / g.a) +
           log_bessel_k(lam, std::sqrt(g.a * q));
  }
  if (g.a == 0.0) {
    const double shape = -g.p;
    const double lognorm = shape * std::log(g.b / 2.0) - std::lgamma(shape);
    return base + lognorm + std::lgamma(0.5 - g.p) + lam * std::log((g.b + q) / 2.0);
  }
  const double lognorm =
      0.5 * g.p * std::log(g.a / g.b) - std::numbers::ln2 - log_bessel_k(g.p, std::sqrt(g.a * g.b));
  const double bq = g.b + q;
  return base + lognorm + std::numbers::ln2 + 0.5 * lam * std::log(bq / g.a) +
         log_bessel_k(lam, std::sqrt(g.a * bq));
}

double nvm_logpdf_1d(const NvmSpec& spec, double sigma, double x) {
  if ((spec.mu.size() != 0 && spec.mu.cwiseAbs().maxCoeff() != 0.0) ||
      (spec.delta.size() != 0 && spec.delta.cwiseAbs().maxCoeff() != 0.0))
    throw ParameterError("nvm_logpdf_1d: only symmetric (mu = delta = 0) laws are supported");
  if (!(sigma > 0.0)) throw DomainError("nvm_logpdf_1d: sigma must be positive");
  if (spec.family == Family::Normal) {
    const double z = x / sigma;
    return -kLogSqrt2Pi - std::log(sigma) - 0.5 * z * z;
  }
  return normal_mixture_logpdf(mixing_law(spec), sigma, x);
}

}  // namespace ngmix
