#pragma once

#include <Eigen/Dense>

namespace ngmix {

/// Modified Bessel function of the second kind, K_order(x).
/// Throws DomainError for x <= 0 and RangeError when the result overflows.
double bessel_k(double order, double x);

/// log K_order(x); finite wherever bessel_k would under- or overflow.
double log_bessel_k(double order, double x);

/// Columns of the upper triangle (diagonal included), stacked in column order.
Eigen::VectorXd vech(const Eigen::MatrixXd& m);

/// Inverse of vech for symmetric matrices.
Eigen::MatrixXd unvech(const Eigen::VectorXd& v);

Eigen::VectorXd vec(const Eigen::MatrixXd& m);

/// D_d with D_d * vech(A) == vec(A) for every symmetric d x d matrix A.
Eigen::MatrixXd duplication_matrix(int d);

/// Lower Cholesky factor L with L L^T = m. Throws FactorizationError carrying
/// the zero-based index of the first non-positive pivot.
Eigen::MatrixXd spd_factor(const Eigen::MatrixXd& m);

/// True when m is symmetric (1e-12 relative) and its Cholesky factorization succeeds.
bool is_spd(const Eigen::MatrixXd& m);

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace ngmix
