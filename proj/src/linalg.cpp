#include "vnreg/linalg.hpp"

#include <lapacke.h>

#include <vector>

#include <Eigen/Eigenvalues>

#include "vnreg/error.hpp"

namespace vnreg {

SymmetricEigen DecomposeSymmetric(const Eigen::MatrixXd& a) {
  const auto n = static_cast<lapack_int>(a.rows());
  if (a.rows() != a.cols()) throw Error(ErrorKind::kDimension, "matrix is not square");
  SymmetricEigen out;
  if (n == 0) return out;
  Eigen::MatrixXd work = a;
  out.values.resize(n);
  out.vectors.resize(n, n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'A', 'L', n, work.data(), n, 0.0, 0.0, 0, 0, 0.0,
                     &found, out.values.data(), out.vectors.data(), n, support.data());
  if (info != 0 || found != n) {
    throw Error(ErrorKind::kConvergence,
                "symmetric eigensolver failed (LAPACK info " + std::to_string(info) + ")");
  }
  return out;
}

Eigen::MatrixXd SymmetricPseudoInverse(const Eigen::MatrixXd& a, double rel_cutoff) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd& w = es.eigenvalues();
  const double largest = w.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (std::abs(w(i)) > rel_cutoff * largest) inv(i) = 1.0 / w(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd SignatureDiagonal(int p, int q) {
  Eigen::VectorXd d(p + q);
  d.head(p).setOnes();
  d.tail(q).setConstant(-1.0);
  return d;
}

}  // namespace vnreg
