#include "ngmix/numeric.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "ngmix/errors.hpp"

namespace ngmix {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

struct BesselSeed {
  double log_k;  // log K_mu(x)
  double ratio;  // K_{mu+1}(x) / K_mu(x)
};

// Temme's series for |mu| <= 1/2 and x < 2.
BesselSeed temme_series(double mu, double x) {
  const double x2 = 0.5 * x;
  const double pimu = std::numbers::pi * mu;
  const double fact = std::abs(pimu) < 1e-8 ? 1.0 + pimu * pimu / 6.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = std::abs(e) < 1e-8 ? 1.0 + e * e / 6.0 : std::sinh(e) / e;

  // gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2.
  const double gp = boost::math::tgamma1pm1(mu);
  const double gm = boost::math::tgamma1pm1(-mu);
  const double gampl = 1.0 / (1.0 + gp);
  const double gammi = 1.0 / (1.0 + gm);
  const double gam1 = std::abs(mu) < 1e-12 ? -std::numbers::egamma
                                           : (gp - gm) / (2.0 * mu * (1.0 + gp) * (1.0 + gm));
  const double gam2 = 0.5 * (gammi + gampl);

  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  const double mu2 = mu * mu;
  int i = 1;
  for (; i <= kMaxIter; ++i) {
    ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
    c *= d / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - i * ff);
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  if (i > kMaxIter) throw NumericalError("bessel_k: Temme series did not converge");
  return {std::log(sum), sum1 * (2.0 / x) / sum};
}

// Steed's continued fraction CF2 for |mu| <= 1/2 and x >= 2.
BesselSeed steed_cf2(double mu, double x) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  int i = 2;
  for (; i <= kMaxIter; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  if (i > kMaxIter) throw NumericalError("bessel_k: continued fraction did not converge");
  h *= a1;
  const double log_k = 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x - std::log(s);
  return {log_k, (mu + x + 0.5 - h) / x};
}

}  // namespace

double log_bessel_k(double order, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream os;
    os << "bessel_k: argument must be positive and finite, got " << x;
    throw DomainError(os.str());
  }
  if (!std::isfinite(order)) throw DomainError("bessel_k: order must be finite");

  const double nu = std::abs(order);  // K_{-p} = K_p
  const auto steps = static_cast<long>(std::floor(nu + 0.5));
  const double mu = nu - static_cast<double>(steps);

  BesselSeed seed = x < 2.0 ? temme_series(mu, x) : steed_cf2(mu, x);
  double log_k = seed.log_k;
  double ratio = seed.ratio;
  for (long k = 0; k < steps; ++k) {
    const double o = mu + static_cast<double>(k);
    log_k += std::log(ratio);
    ratio = 1.0 / ratio + 2.0 * (o + 1.0) / x;
  }
  return log_k;
}

double bessel_k(double order, double x) {
  const double lk = log_bessel_k(order, x);
  if (lk > std::log(std::numeric_limits<double>::max())) {
    std::ostringstream os;
    os << "bessel_k: K_" << order << "(" << x << ") overflows double precision";
    throw RangeError(os.str());
  }
  return std::exp(lk);
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("vech: matrix must be square");
  const Eigen::Index d = m.rows();
  Eigen::VectorXd out(d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) out(k++) = m(i, j);
  return out;
}

Eigen::MatrixXd unvech(const Eigen::VectorXd& v) {
  const double disc = std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0);
  const auto d = static_cast<Eigen::Index>(std::llround((disc - 1.0) / 2.0));
  if (d * (d + 1) / 2 != v.size()) throw ShapeError("unvech: length is not triangular");
  Eigen::MatrixXd m(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd duplication_matrix(int d) {
  if (d < 1) throw DomainError("duplication_matrix: dimension must be positive");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d * d, d * (d + 1) / 2);
  int k = 0;
  for (int j = 0; j < d; ++j)
    for (int i = 0; i <= j; ++i) {
      D(i + j * d, k) = 1.0;
      D(j + i * d, k) = 1.0;
      ++k;
    }
  return D;
}

Eigen::MatrixXd spd_factor(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("spd_factor: matrix must be square");
  const Eigen::Index d = m.rows();
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    throw ParameterError("spd_factor: matrix is not symmetric");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double diag = m(j, j) - L.row(j).head(j).squaredNorm();
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      std::ostringstream os;
      os << "spd_factor: matrix is not positive definite (pivot " << j << " = " << diag << ")";
      throw FactorizationError(os.str(), static_cast<int>(j));
    }
    L(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < d; ++i)
      L(i, j) = (m(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  return L;
}

bool is_spd(const Eigen::MatrixXd& m) {
  try {
    (void)spd_factor(m);
    return true;
  } catch (const Error&) {
    return false;
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace ngmix
