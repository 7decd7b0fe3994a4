#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "ngmix/mixtures.hpp"
#include "ngmix/random.hpp"

namespace ngmix {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class OperatorKind { Exponential, IntegratedRandomWalk };

/// "exponential" or "irw".
OperatorKind parse_operator_kind(std::string_view name);
std::string to_string(OperatorKind kind);

struct OperatorSpec {
  OperatorKind kind = OperatorKind::Exponential;
  double kappa = 1.0;

  void validate() const;
};

/// Strictly increasing nodes s_1 < ... < s_K, K >= 2.
class Grid {
 public:
  Grid() = default;
  explicit Grid(Eigen::VectorXd nodes);

  const Eigen::VectorXd& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  double lo() const { return nodes_(0); }
  double hi() const { return nodes_(nodes_.size() - 1); }
  bool contains(double t) const;

 private:
  Eigen::VectorXd nodes_;
};

/// Range of `times` padded by 5% on each side; nodes are the times themselves
/// unioned with a uniform mesh of `mesh_nodes` points. Falls back to a uniform
/// mesh of `max_nodes` points when the union would be larger.
Grid default_grid(const Eigen::VectorXd& times, int mesh_nodes, int max_nodes = 200);

struct Discretization {
  OperatorSpec spec;
  Grid grid;
  SparseMatrix K;      ///< K W = L, bandwidth 1
  SparseMatrix dK;     ///< dK / dkappa; empty for the integrated random walk
  SparseMatrix mass;   ///< consistent mass matrix
  Eigen::VectorXd h;   ///< element weights, E[V_k] = h_k
  double log_det_K = 0.0;

  int size() const { return grid.size(); }
};

/// Hat-function values at t: at most two nonzeros summing to one.
Eigen::SparseVector<double> basis_eval(const Grid& grid, double t);

Discretization assemble(const OperatorSpec& spec, const Grid& grid);

/// Rows are basis_eval at each time.
SparseMatrix observation_matrix(const Grid& grid, const Eigen::VectorXd& times);
inline SparseMatrix observation_matrix(const Discretization& disc, const Eigen::VectorXd& times) {
  return observation_matrix(disc.grid, times);
}

/// Law of the driving variance at a node with weight h: NIG GIG(-1/2, nu, nu h^2),
/// GAL GIG(nu h, 2 nu, 0), Cauchy GIG(-1/2, 0, 3 h^2). NIG and GAL have E[V] = h; the Cauchy law has mode h^2.
GigParams process_node_prior(Family family, double nu, double h);

/// NIG node priors for every node of the discretization.
std::vector<GigParams> process_v_prior(const Discretization& disc, double nu);

/// W | V ~ N(K^{-1}(delta h + mu V), K^{-1} diag(V) K^{-T}).
class WLaw {
 public:
  WLaw(const Discretization& disc, const Eigen::VectorXd& v, double mu_w, double delta_w);

  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd sample(Rng& rng) const;
  /// Dense K^{-1} diag(sqrt V), one banded solve per column.
  Eigen::MatrixXd covariance_factor() const;
  Eigen::MatrixXd covariance() const;

 private:
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
  Eigen::VectorXd sqrt_v_;
  Eigen::VectorXd mean_;
};

inline WLaw conditional_w_law(const Discretization& disc, const Eigen::VectorXd& v, double mu_w,
                              double delta_w) {
  return WLaw(disc, v, mu_w, delta_w);
}

}  // namespace ngmix
