#include "regulab/linalg.hpp"

#include <cmath>

#include "regulab/common.hpp"

namespace regulab {

Eigen::VectorXcd balanced_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd a = m;
  const Eigen::Index n = a.rows();
  const double radix = 2.0, sqrdx = radix * radix;
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = 0, c = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0 || r == 0) continue;
      double g = r / radix, f = 1, s = c + r;
      while (c < g) {
        f *= radix;
        c *= sqrdx;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) *= 1.0 / f;
        a.col(i) *= f;
      }
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues();
}

int svd_rank(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++rank;
  return rank;
}

double kth_singular_value(const Eigen::MatrixXcd& m, int k) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  if (k < 1 || k > svd.singularValues().size())
    throw ValidationError("singular value index out of range");
  return svd.singularValues()(k - 1);
}

Eigen::MatrixXd controllability_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index n = a.rows(), m = b.cols();
  Eigen::MatrixXd ctrb(n, n * m);
  Eigen::MatrixXd block = b;
  for (Eigen::Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * m, m) = block;
    block = a * block;
  }
  return ctrb;
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

double poly_eval(const std::vector<double>& p, double x) {
  double acc = 0;
  for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
  return acc;
}

std::complex<double> poly_eval(const std::vector<double>& p, std::complex<double> x) {
  std::complex<double> acc = 0;
  for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
  return acc;
}

Eigen::MatrixXd poly_eval(const std::vector<double>& p, const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = p.size(); i-- > 0;)
    acc = acc * m + p[i] * Eigen::MatrixXd::Identity(n, n);
  return acc;
}

std::vector<double> poly_from_real_roots(const std::vector<double>& real_roots) {
  std::vector<double> p = {1.0};
  for (double r : real_roots) p = poly_mul(p, {-r, 1.0});
  return p;
}

Eigen::RowVectorXd ackermann_place(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                   const std::vector<double>& desired) {
  const Eigen::Index n = a.rows();
  if (static_cast<Eigen::Index>(desired.size()) != n + 1 || desired.back() != 1.0)
    throw ValidationError("desired polynomial must be monic of degree n");
  Eigen::MatrixXd ctrb = controllability_matrix(a, b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctrb);
  if (svd.singularValues()(n - 1) <= kRankTol)
    throw HypothesisError("controllability", "pair (A, B) is not controllable");
  Eigen::RowVectorXd e_n = Eigen::RowVectorXd::Zero(n);
  e_n(n - 1) = 1.0;
  // k = e_n^T Ctrb^{-1} p(A)
  Eigen::RowVectorXd row = ctrb.transpose().fullPivLu().solve(e_n.transpose()).transpose();
  return row * poly_eval(desired, a);
}

}  // namespace regulab
