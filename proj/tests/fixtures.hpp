#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngmix/model.hpp"
#include "ngmix/random.hpp"

namespace fixture {

/// Subject with intercept + slope fixed effects and a random intercept; y zero.
inline ngmix::SubjectRecord subject(const Eigen::VectorXd& times, const std::string& id = "s") {
  ngmix::SubjectRecord r;
  r.id = id;
  r.times = times;
  r.y = Eigen::VectorXd::Zero(times.size());
  r.x.resize(times.size(), 2);
  r.x.col(0).setOnes();
  r.x.col(1) = times;
  r.d = Eigen::MatrixXd::Ones(times.size(), 1);
  return r;
}

inline std::vector<ngmix::SubjectRecord> cohort(int m, int n, double t_max, std::uint64_t seed) {
  ngmix::Rng rng = ngmix::make_stream(seed, 999);
  std::uniform_real_distribution<double> u(0.0, t_max);
  std::vector<ngmix::SubjectRecord> out;
  for (int i = 0; i < m; ++i) {
    std::vector<double> t(n);
    t[0] = 0.0;
    for (int k = 1; k < n; ++k) t[k] = u(rng);
    std::sort(t.begin(), t.end());
    out.push_back(subject(Eigen::Map<Eigen::VectorXd>(t.data(), n), "s" + std::to_string(1000 + i)));
  }
  return out;
}

/// Intercept + slope, random intercept, everything Gaussian.
inline ngmix::ModelParams gaussian_params(ngmix::ProcessKind process = ngmix::ProcessKind::None) {
  ngmix::ModelParams p;
  p.beta = Eigen::Vector2d(1.0, -0.3);
  p.sigma = 0.5;
  p.Sigma = Eigen::MatrixXd::Constant(1, 1, 0.8);
  p.process = process;
  p.kappa = 1.2;
  return p;
}

}  // namespace fixture
