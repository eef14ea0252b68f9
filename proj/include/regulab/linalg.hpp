#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace regulab {

/// Shared absolute tolerance for SVD rank decisions and spectrum checks.
constexpr double kRankTol = 1e-9;

/// Eigenvalues after diagonal balancing (Parlett-Reinsch scaling). Companion
/// matrices with large coefficient spread need this to reach 1e-9 accuracy.
Eigen::VectorXcd balanced_eigenvalues(const Eigen::MatrixXd& m);

/// Rank with singular values compared against `tol` (absolute).
int svd_rank(const Eigen::MatrixXd& m, double tol = kRankTol);

/// k-th largest singular value (1-based), i.e. the smallest of the first k.
double kth_singular_value(const Eigen::MatrixXcd& m, int k);

/// Controllability matrix (B, AB, ..., A^{n-1}B).
Eigen::MatrixXd controllability_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Polynomial coefficient vectors are low-order-first: p[i] is the
// coefficient of lambda^i.
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b);
double poly_eval(const std::vector<double>& p, double x);
std::complex<double> poly_eval(const std::vector<double>& p, std::complex<double> x);
Eigen::MatrixXd poly_eval(const std::vector<double>& p, const Eigen::MatrixXd& m);

/// Monic polynomial with the given real-part-free root layout: one root at
/// each entry of `real_roots`.
std::vector<double> poly_from_real_roots(const std::vector<double>& real_roots);

/// Single-input pole placement (Ackermann): returns k such that
/// sigma(a - b k) are the roots of the monic `desired` polynomial
/// (low-order-first, length n+1 with desired[n] == 1).
/// Throws HypothesisError("controllability") when (a, b) is not controllable.
Eigen::RowVectorXd ackermann_place(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                   const std::vector<double>& desired);

}  // namespace regulab
