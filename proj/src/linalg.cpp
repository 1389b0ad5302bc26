#include "lgts/linalg.hpp"

#include <cmath>
#include <string>

#include "lgts/errors.hpp"

namespace lgts {

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ValidationError("matmul: inner dims differ");
  Mat out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int l = 0; l < a.cols; ++l) {
      double ail = a(i, l);
      if (ail == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out(i, j) += ail * b(l, j);
    }
  return out;
}

Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

Mat cholesky(const Mat& A, double sym_tol) {
  if (A.rows != A.cols) throw ValidationError("cholesky: matrix not square");
  int n = A.rows;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(A(i, j) - A(j, i)) > sym_tol)
        throw ValidationError("cholesky: matrix not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
  Mat L(n, n);
  for (int j = 0; j < n; ++j) {
    double d = A(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0)) {
      throw CholeskyError("cholesky: non-positive pivot " + std::to_string(d) + " at index " +
                              std::to_string(j),
                          j);
    }
    L(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

std::vector<double> tri_solve(const Mat& T, std::span<const double> b, bool lower) {
  if (T.rows != T.cols) throw ValidationError("tri_solve: matrix not square");
  int n = T.rows;
  if (static_cast<int>(b.size()) != n) throw ValidationError("tri_solve: rhs length mismatch");
  for (int i = 0; i < n; ++i)
    if (T(i, i) == 0.0)
      throw NumericError("tri_solve: zero diagonal at index " + std::to_string(i));
  std::vector<double> x(n);
  if (lower) {
    for (int i = 0; i < n; ++i) {
      double s = b[i];
      for (int k = 0; k < i; ++k) s -= T(i, k) * x[k];
      x[i] = s / T(i, i);
    }
  } else {
    for (int i = n - 1; i >= 0; --i) {
      double s = b[i];
      for (int k = i + 1; k < n; ++k) s -= T(i, k) * x[k];
      x[i] = s / T(i, i);
    }
  }
  return x;
}

Mat tri_solve_mat(const Mat& T, const Mat& B, bool lower) {
  if (T.cols != B.rows) throw ValidationError("tri_solve_mat: dims differ");
  Mat X(B.rows, B.cols);
  std::vector<double> col(B.rows);
  for (int j = 0; j < B.cols; ++j) {
    for (int i = 0; i < B.rows; ++i) col[i] = B(i, j);
    auto x = tri_solve(T, col, lower);
    for (int i = 0; i < B.rows; ++i) X(i, j) = x[i];
  }
  return X;
}

double logdet_from_chol(const Mat& L) {
  double s = 0.0;
  for (int i = 0; i < L.rows; ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

Mat chol_inverse(const Mat& L) {
  int n = L.rows;
  Mat inv(n, n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    auto y = tri_solve(L, e, /*lower=*/true);
    auto x = tri_solve(transpose(L), y, /*lower=*/false);
    for (int i = 0; i < n; ++i) inv(i, j) = x[i];
    e[j] = 0.0;
  }
  // Symmetrize against round-off.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = inv(j, i) = v;
    }
  return inv;
}

}  // namespace lgts
