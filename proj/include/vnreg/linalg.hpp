#pragma once

#include <Eigen/Core>

namespace vnreg {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column i pairs with values(i)
};

// Full eigendecomposition of a symmetric matrix (LAPACK dsyevr).
SymmetricEigen DecomposeSymmetric(const Eigen::MatrixXd& a);

// Moore-Penrose pseudoinverse of a symmetric matrix; eigenvalues with
// |value| <= rel_cutoff * max|value| are treated as zero.
Eigen::MatrixXd SymmetricPseudoInverse(const Eigen::MatrixXd& a, double rel_cutoff = 1e-10);

// Diagonal of I_{p,q}: p entries +1 followed by q entries -1.
Eigen::VectorXd SignatureDiagonal(int p, int q);

}  // namespace vnreg
