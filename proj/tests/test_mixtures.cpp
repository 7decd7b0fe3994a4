#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "ngmix/errors.hpp"
#include "ngmix/mixtures.hpp"
#include "ngmix/numeric.hpp"
#include "oracles.hpp"

using namespace ngmix;

namespace {

double gig_cdf(const GigParams& g, double x) {
  return oracle::integrate(
      [&](double t) { return t <= 0 ? 0.0 : std::exp(gig_logpdf(g, t)); }, 0.0, x);
}

std::vector<double> draws(const GigParams& g, int n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::vector<double> out(n);
  for (auto& x : out) x = gig_sample(g, rng);
  return out;
}

}  // namespace

TEST_CASE("gig_logpdf closed forms") {
  CHECK(std::exp(gig_logpdf({-0.5, 1, 1}, 1.0)) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  // inverse Gaussian(mean m, shape l) = GIG(-1/2, l/m^2, l)
  const double m = 1.7, l = 2.3, x = 0.8;
  const double ig = std::sqrt(l / (2 * std::numbers::pi * x * x * x)) * std::exp(-l * (x - m) * (x - m) / (2 * m * m * x));
  CHECK(std::exp(gig_logpdf({-0.5, l / (m * m), l}, x)) == doctest::Approx(ig).epsilon(1e-12));
  CHECK(gig_logpdf({1, 2, 0}, 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS(gig_logpdf({1, 2, 0}, 0.0), DomainError);
  CHECK_THROWS_AS(gig_logpdf({-1, 2, 0}, 1.0), ParameterError);
  CHECK_THROWS_AS(gig_logpdf({1, 0, 2}, 1.0), ParameterError);
}

TEST_CASE("gig density integrates to one") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0), pos(0.05, 5.0);
  for (int k = 0; k < 10; ++k) {
    const GigParams g{u(rng), pos(rng), pos(rng)};
    CHECK(oracle::integrate_half_line([&](double x) { return std::exp(gig_logpdf(g, x)); }) ==
          doctest::Approx(1.0).epsilon(1e-8));
  }
  for (const GigParams g : {GigParams{2.5, 1.5, 0}, GigParams{-1.5, 0, 2.0}, GigParams{-0.5, 0, 3.0}})
    CHECK(oracle::integrate_half_line([&](double x) { return std::exp(gig_logpdf(g, x)); }) ==
          doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("gig moments") {
  for (double nu : {0.01, 1.0, 7.0, 300.0}) CHECK(*gig_moment({-0.5, nu, nu}, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(gig_moment({-0.5, 0, 3}, 1).has_value());
  CHECK_FALSE(gig_moment({0.5, 2, 0}, -1).has_value());
  CHECK(*gig_moment({3, 2, 0}, -1) == doctest::Approx(0.5));  // Gamma(3, 1): E[1/V] = 1/2
  CHECK(*gig_moment({-3, 0, 2}, 1) == doctest::Approx(0.5));  // IGamma(3, 1): E[V] = 1/2
  const GigParams g{2, 3, 1};
  const auto x = draws(g, 2'000'000, 9);
  double mean = 0, sq = 0;
  for (double v : x) {
    mean += v;
    sq += v * v;
  }
  mean /= x.size();
  const double se = std::sqrt((sq / x.size() - mean * mean) / x.size());
  CHECK(std::abs(mean - *gig_moment(g, 1)) < 3 * se);
  // oracle: quadrature of x f(x)
  CHECK(*gig_moment(g, 1) ==
        doctest::Approx(oracle::integrate_half_line([&](double v) { return v * std::exp(gig_logpdf(g, v)); }))
            .epsilon(1e-10));
}

TEST_CASE("gig sampler mean") {
  const auto x = draws({-0.5, 4, 1}, 1'000'000, 2);
  double mean = 0, sq = 0;
  for (double v : x) {
    mean += v;
    sq += v * v;
  }
  mean /= x.size();
  const double se = std::sqrt((sq / x.size() - mean * mean) / x.size());
  CHECK(std::abs(mean - 0.5) < 4 * se);
}

TEST_CASE("gig sampler matches the quadrature cdf") {
  for (const GigParams g : {GigParams{1.3, 2, 0.7}, GigParams{-0.5, 1e-3, 1e-3}, GigParams{-0.5, 250, 250},
                            GigParams{0.2, 0.5, 0}, GigParams{-2.5, 0, 1.0}, GigParams{-0.5, 0, 3.0},
                            GigParams{5.0, 1e-4, 20.0}, GigParams{-7.0, 3.0, 1e-4}}) {
    CAPTURE(g.p);
    CAPTURE(g.a);
    CAPTURE(g.b);
    const auto x = draws(g, 100'000, 4);
    auto pdf = [&](double t) { return t <= 0 ? 0.0 : std::exp(gig_logpdf(g, t)); };
    CHECK(oracle::ks_distance_pdf(x, pdf, [&](double t) { return gig_cdf(g, t); }) < 0.005);
  }
}

TEST_CASE("gig scaling law") {
  for (double c : {0.1, 2.5, 40.0}) {
    const GigParams g{0.7, 1.3, 2.2};
    auto a = draws(g, 100'000, 21);
    for (auto& v : a) v *= c;
    const auto b = draws(gig_scale(g, c), 100'000, 22);
    CHECK(oracle::ks_two_sample_p(oracle::ks_two_sample(a, b), a.size(), b.size()) > 0.01);
    // density identity
    for (double x : {0.1, 1.0, 4.0})
      CHECK(gig_logpdf(gig_scale(g, c), c * x) == doctest::Approx(gig_logpdf(g, x) - std::log(c)).epsilon(1e-12));
  }
}

TEST_CASE("constrained mixing laws") {
  CHECK(constrain_unit(Family::NIG, 5) == GigParams{-0.5, 5, 5});
  CHECK(constrain_unit(Family::GAL, 2) == GigParams{2, 4, 0});  // Gamma(shape 2, rate 2)
  const GigParams ch = constrain_unit(Family::Cauchy, 1);
  CHECK(ch.a == 0.0);
  CHECK(ch.b == doctest::Approx(3.0));
  CHECK(gig_mode(ch) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(constrain_unit(Family::NIG, 0.0), DomainError);
  CHECK_THROWS(constrain_unit(Family::Normal, 1.0));
  for (double nu : {0.002, 0.5, 3.0, 240.0}) {
    for (Family f : {Family::NIG, Family::GAL}) CHECK(*gig_moment(constrain_unit(f, nu), 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*gig_moment(constrain_unit(Family::StudentT, nu + 2.0, Constraint::UnitMean), 1) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gig_mode(constrain_unit(Family::StudentT, nu, Constraint::UnitMode)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(constrain_unit(Family::StudentT, 4.0) == GigParams{-2, 0, 4});
  CHECK(constrain_unit(Family::Cauchy, 1.0, Constraint::None) == GigParams{-0.5, 0, 1});
}

TEST_CASE("nvm_sample") {
  Rng rng = make_stream(8, 1);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(1, 1);
  std::vector<double> xs(100'000);
  NvmSpec normal;
  for (auto& x : xs) x = nvm_sample(normal, I, rng)(0);
  boost::math::normal_distribution<double> n01;
  CHECK(oracle::ks_distance(xs, [&](double t) { return boost::math::cdf(n01, t); }) < 0.0065);

  NvmSpec big{Family::NIG, 1e6};
  double sq = 0;
  for (int k = 0; k < 100'000; ++k) sq += std::pow(nvm_sample(big, I, rng)(0), 2);
  CHECK(sq / 1e5 == doctest::Approx(1.0).epsilon(0.02));

  NvmSpec skew{Family::NIG, 1.0, Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, -2.0)};
  double mean = 0, m2 = 0;
  for (int k = 0; k < 200'000; ++k) {
    const double x = nvm_sample(skew, I, rng)(0);
    mean += x;
    m2 += x * x;
  }
  mean /= 2e5;
  const double se = std::sqrt((m2 / 2e5 - mean * mean) / 2e5);
  CHECK(std::abs(mean) < 4 * se);
  CHECK_THROWS_AS(nvm_sample(skew, Eigen::MatrixXd::Identity(2, 2), rng), ShapeError);
}

TEST_CASE("nvm_logpdf_1d") {
  CHECK(nvm_logpdf_1d(NvmSpec{}, 1.0, 0.0) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  // mixing integral oracle for NIG(2)
  const GigParams g{-0.5, 2, 2};
  const double x = 1.3;
  const double ref = oracle::integrate_half_line([&](double v) {
    return std::exp(-0.5 * x * x / v) / std::sqrt(2 * std::numbers::pi * v) * std::exp(gig_logpdf(g, v));
  });
  CHECK(std::exp(nvm_logpdf_1d(NvmSpec{Family::NIG, 2.0}, 1.0, x)) == doctest::Approx(ref).epsilon(1e-8));
  const NvmSpec cauchy{Family::Cauchy, 1.0};
  CHECK(std::exp(nvm_logpdf_1d(cauchy, 1.0, 20.0) - nvm_logpdf_1d(cauchy, 1.0, 10.0)) ==
        doctest::Approx(0.25).epsilon(0.01));

  Rng rng(4);
  std::uniform_real_distribution<double> nu(0.3, 6.0), sig(0.3, 3.0);
  for (Family f : {Family::Normal, Family::NIG, Family::GAL, Family::StudentT, Family::Cauchy})
    for (int k = 0; k < 5; ++k) {
      const NvmSpec s{f, nu(rng)};
      const double sigma = sig(rng);
      CAPTURE(to_string(f));
      CHECK(oracle::integrate_line([&](double t) { return std::exp(nvm_logpdf_1d(s, sigma, t)); }) ==
            doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("sampler and density agree per family") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(1, 1);
  for (Family f : {Family::NIG, Family::GAL, Family::StudentT, Family::Cauchy}) {
    const NvmSpec s{f, 1.5};
    Rng rng = make_stream(31, static_cast<std::uint64_t>(f));
    std::vector<double> xs(100'000);
    for (auto& x : xs) x = nvm_sample(s, I, rng)(0);
    auto pdf = [&](double y) { return std::exp(nvm_logpdf_1d(s, 1.0, y)); };
    auto cdf = [&](double t) {
      return t < 0 ? oracle::integrate_half_line([&](double y) { return pdf(t - y); })
                   : 1.0 - oracle::integrate_half_line([&](double y) { return pdf(t + y); });
    };
    CAPTURE(to_string(f));
    CHECK(oracle::ks_distance_pdf(xs, pdf, cdf) < 0.01);
  }
}

TEST_CASE("family names") {
  for (auto name : {"normal", "nig", "gal", "t", "cauchy"}) CHECK(to_string(parse_family(name)) == name);
  CHECK_THROWS_AS(parse_family("laplace"), ParameterError);
}
