#pragma once

#include <span>
#include <vector>

namespace lgts {

// Small dense row-major matrix. Sized for prior kernels over window grids,
// not for large-scale linear algebra.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static Mat identity(int n);
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

// Lower-triangular L with L*L^T = A. A must be square and symmetric within
// sym_tol; throws CholeskyError carrying the failing pivot index otherwise.
Mat cholesky(const Mat& A, double sym_tol = 1e-10);

// Solves T*x = b for triangular T. Throws NumericError on a zero diagonal.
std::vector<double> tri_solve(const Mat& T, std::span<const double> b, bool lower);
Mat tri_solve_mat(const Mat& T, const Mat& B, bool lower);  // column-wise

// log det(L*L^T) given the Cholesky factor.
double logdet_from_chol(const Mat& L);

// (L*L^T)^{-1} given the Cholesky factor.
Mat chol_inverse(const Mat& L);

}  // namespace lgts
