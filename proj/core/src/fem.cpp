#include "ngmix/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ngmix/errors.hpp"

namespace ngmix {
namespace {

constexpr double kPin = 1e8;

std::string describe(double t, const Grid& g) {
  std::ostringstream os;
  os << "time " << t << " outside grid [" << g.lo() << ", " << g.hi() << "]";
  return os.str();
}

}  // namespace

OperatorKind parse_operator_kind(std::string_view name) {
  if (name == "exponential") return OperatorKind::Exponential;
  if (name == "irw" || name == "integrated-random-walk") return OperatorKind::IntegratedRandomWalk;
  throw ParameterError("unknown operator kind '" + std::string(name) + "'");
}

std::string to_string(OperatorKind kind) {
  return kind == OperatorKind::Exponential ? "exponential" : "irw";
}

void OperatorSpec::validate() const {
  if (kind == OperatorKind::Exponential && !(kappa > 0.0 && std::isfinite(kappa)))
    throw ParameterError("exponential operator needs kappa > 0");
}

Grid::Grid(Eigen::VectorXd nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw DomainError("grid needs at least two nodes");
  for (Eigen::Index i = 0; i < nodes_.size(); ++i) {
    if (!std::isfinite(nodes_(i))) throw DomainError("grid nodes must be finite");
    if (i > 0 && !(nodes_(i) > nodes_(i - 1))) throw DomainError("grid nodes must be strictly increasing");
  }
}

bool Grid::contains(double t) const { return t >= lo() && t <= hi(); }

Grid default_grid(const Eigen::VectorXd& times, int mesh_nodes, int max_nodes) {
  if (times.size() == 0) throw DomainError("default_grid: no times");
  if (max_nodes < 2) throw DomainError("default_grid: max_nodes must be at least 2");
  const double tmin = times.minCoeff();
  const double tmax = times.maxCoeff();
  const double range = tmax - tmin;
  const double pad = 0.05 * (range > 0.0 ? range : 1.0);
  const double lo = tmin - pad;
  const double hi = tmax + pad;

  std::vector<double> s(times.data(), times.data() + times.size());
  s.push_back(lo);
  s.push_back(hi);
  for (int i = 0; i < mesh_nodes; ++i)
    s.push_back(mesh_nodes == 1 ? lo : lo + (hi - lo) * i / (mesh_nodes - 1));
  std::sort(s.begin(), s.end());
  const double tol = 1e-9 * (hi - lo);
  std::vector<double> merged;
  for (double v : s)
    if (merged.empty() || v - merged.back() > tol) merged.push_back(v);
  if (merged.back() < hi) merged.back() = hi;

  if (static_cast<int>(merged.size()) > max_nodes) {
    merged.resize(max_nodes);
    for (int i = 0; i < max_nodes; ++i) merged[i] = lo + (hi - lo) * i / (max_nodes - 1);
  }
  return Grid(Eigen::Map<Eigen::VectorXd>(merged.data(), static_cast<Eigen::Index>(merged.size())));
}

Eigen::SparseVector<double> basis_eval(const Grid& grid, double t) {
  if (!grid.contains(t)) throw DomainError("basis_eval: " + describe(t, grid));
  const Eigen::VectorXd& s = grid.nodes();
  Eigen::SparseVector<double> out(grid.size());
  const auto it = std::upper_bound(s.data(), s.data() + s.size(), t);
  auto k = static_cast<Eigen::Index>(it - s.data()) - 1;  // s_k <= t < s_{k+1}
  if (k >= s.size() - 1) {
    out.insert(s.size() - 1) = 1.0;
    return out;
  }
  const double w = (t - s(k)) / (s(k + 1) - s(k));
  if (w < 1.0) out.insert(k) = 1.0 - w;
  if (w > 0.0) out.insert(k + 1) = w;
  return out;
}

Discretization assemble(const OperatorSpec& spec, const Grid& grid) {
  spec.validate();
  const int n = grid.size();
  if (n < 2) throw DomainError("assemble: grid needs at least two nodes");
  const Eigen::VectorXd& s = grid.nodes();
  Eigen::VectorXd delta(n);  // delta(k) = s_k - s_{k-1}, delta(0) unused
  delta(0) = 0.0;
  for (int k = 1; k < n; ++k) delta(k) = s(k) - s(k - 1);

  Discretization d;
  d.spec = spec;
  d.grid = grid;

  std::vector<Eigen::Triplet<double>> mass;
  for (int k = 0; k < n; ++k) {
    const double left = k > 0 ? delta(k) : 0.0;
    const double right = k + 1 < n ? delta(k + 1) : 0.0;
    mass.emplace_back(k, k, (left + right) / 3.0);
    if (k + 1 < n) {
      mass.emplace_back(k, k + 1, right / 6.0);
      mass.emplace_back(k + 1, k, right / 6.0);
    }
  }
  d.mass.resize(n, n);
  d.mass.setFromTriplets(mass.begin(), mass.end());

  std::vector<Eigen::Triplet<double>> kt;
  if (spec.kind == OperatorKind::Exponential) {
    const double kappa = spec.kappa;
    d.h = delta;
    d.h(0) = delta(1);
    std::vector<Eigen::Triplet<double>> dkt;
    const double k11 = std::sqrt(2.0 * kappa * d.h(0));
    kt.emplace_back(0, 0, k11);
    dkt.emplace_back(0, 0, k11 / (2.0 * kappa));
    d.log_det_K = std::log(k11);
    for (int k = 1; k < n; ++k) {
      const double half = 0.5 * kappa * delta(k);
      kt.emplace_back(k, k, 1.0 + half);
      kt.emplace_back(k, k - 1, -(1.0 - half));
      dkt.emplace_back(k, k, 0.5 * delta(k));
      dkt.emplace_back(k, k - 1, 0.5 * delta(k));
      d.log_det_K += std::log(1.0 + half);
    }
    d.dK.resize(n, n);
    d.dK.setFromTriplets(dkt.begin(), dkt.end());
  } else {
    d.h.resize(n);
    for (int k = 0; k < n; ++k) {
      const double left = k > 0 ? delta(k) : 0.0;
      const double right = k + 1 < n ? delta(k + 1) : 0.0;
      d.h(k) = 0.5 * (left + right);
      kt.emplace_back(k, k, (k > 0 ? 1.0 / left : 0.0) + (k + 1 < n ? 1.0 / right : 0.0));
      if (k + 1 < n) {
        kt.emplace_back(k, k + 1, -1.0 / right);
        kt.emplace_back(k + 1, k, -1.0 / right);
      }
    }
    kt.emplace_back(0, 0, kPin);
  }
  d.K.resize(n, n);
  d.K.setFromTriplets(kt.begin(), kt.end());
  d.K.makeCompressed();

  if (spec.kind == OperatorKind::IntegratedRandomWalk) {
    Eigen::SparseLU<SparseMatrix> lu(d.K);
    if (lu.info() != Eigen::Success) throw NumericalError("assemble: irw operator is singular");
    d.log_det_K = lu.logAbsDeterminant();
  }
  return d;
}

SparseMatrix observation_matrix(const Grid& grid, const Eigen::VectorXd& times) {
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index j = 0; j < times.size(); ++j) {
    if (!grid.contains(times(j))) throw DomainError("observation_matrix: " + describe(times(j), grid));
    const Eigen::SparseVector<double> row = basis_eval(grid, times(j));
    for (Eigen::SparseVector<double>::InnerIterator it(row); it; ++it) t.emplace_back(j, it.index(), it.value());
  }
  SparseMatrix a(times.size(), grid.size());
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

GigParams process_node_prior(Family family, double nu, double h) {
  if (!(h > 0.0)) throw DomainError("process_node_prior: element weight must be positive");
  if (family != Family::Cauchy && !(nu > 0.0 && std::isfinite(nu)))
    throw DomainError("process_node_prior: nu must be positive");
  switch (family) {
    case Family::NIG:
      return {-0.5, nu, nu * h * h};
    case Family::GAL:
      return {nu * h, 2.0 * nu, 0.0};
    case Family::Cauchy:
      return {-0.5, 0.0, 3.0 * h * h};
    default:
      break;
  }
  throw UnsupportedFamilyError("process family '" + to_string(family) + "' has no node prior");
}

std::vector<GigParams> process_v_prior(const Discretization& disc, double nu) {
  std::vector<GigParams> out;
  out.reserve(disc.h.size());
  for (Eigen::Index k = 0; k < disc.h.size(); ++k) out.push_back(process_node_prior(Family::NIG, nu, disc.h(k)));
  return out;
}

WLaw::WLaw(const Discretization& disc, const Eigen::VectorXd& v, double mu_w, double delta_w)
    : lu_(std::make_shared<Eigen::SparseLU<SparseMatrix>>()) {
  if (v.size() != disc.size()) throw ShapeError("conditional_w_law: V has wrong length");
  if (!(v.array() > 0.0).all()) throw DomainError("conditional_w_law: V must be positive");
  lu_->compute(disc.K);
  if (lu_->info() != Eigen::Success)
    throw NumericalError("conditional_w_law: " + to_string(disc.spec.kind) + " operator matrix is singular");
  sqrt_v_ = v.cwiseSqrt();
  mean_ = lu_->solve((delta_w * disc.h + mu_w * v).eval());
}

Eigen::VectorXd WLaw::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(sqrt_v_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sqrt_v_(i) * normal(rng);
  return mean_ + lu_->solve(z);
}

Eigen::MatrixXd WLaw::covariance_factor() const {
  const Eigen::MatrixXd rhs = sqrt_v_.asDiagonal() * Eigen::MatrixXd::Identity(sqrt_v_.size(), sqrt_v_.size());
  return lu_->solve(rhs);
}

Eigen::MatrixXd WLaw::covariance() const {
  const Eigen::MatrixXd f = covariance_factor();
  return f * f.transpose();
}

}  // namespace ngmix
