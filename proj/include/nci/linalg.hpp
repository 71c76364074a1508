#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace nci {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rvec = Eigen::VectorXd;
using rmat = Eigen::MatrixXd;

inline constexpr cplx I_unit{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LinalgError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline cmat kron(const cmat& a, const cmat& b) {
  cmat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline cmat kron(std::initializer_list<cmat> factors) {
  cmat out = cmat::Identity(1, 1);
  for (const auto& f : factors) out = kron(out, f);
  return out;
}

inline cmat kron_identity_left(Eigen::Index n, const cmat& b) { return kron(cmat::Identity(n, n), b); }

// max-entry norm
inline double max_abs(const cmat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double hermiticity_residual(const cmat& m) { return max_abs(m - m.adjoint()); }

inline void require_square(const cmat& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + ": matrix is not square");
}

// Ascending eigenvalues and (optionally) orthonormal eigenvectors of a Hermitian matrix.
// Only the lower triangle is read.
inline rvec eigvalsh(cmat a) {
  require_square(a, "eigvalsh");
  const auto n = static_cast<lapack_int>(a.rows());
  rvec w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n,
                                         reinterpret_cast<lapack_complex_double*>(a.data()), n, w.data());
  if (info != 0) throw LinalgError("zheevd failed with info=" + std::to_string(info));
  return w;
}

inline std::pair<rvec, cmat> eigh(cmat a) {
  require_square(a, "eigh");
  const auto n = static_cast<lapack_int>(a.rows());
  rvec w(n);
  if (n == 0) return {w, a};
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                         reinterpret_cast<lapack_complex_double*>(a.data()), n, w.data());
  if (info != 0) throw LinalgError("zheevd failed with info=" + std::to_string(info));
  return {w, std::move(a)};
}

// Largest singular value.
inline double op_norm(cmat a) {
  if (a.size() == 0) return 0.0;
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  rvec s(std::min(m, n));
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n,
                                         reinterpret_cast<lapack_complex_double*>(a.data()), m, s.data(),
                                         nullptr, 1, nullptr, 1);
  if (info != 0) throw LinalgError("zgesdd failed with info=" + std::to_string(info));
  return s(0);
}

// Operator norm of a Hermitian matrix via its spectrum.
inline double op_norm_hermitian(const cmat& a) {
  if (a.size() == 0) return 0.0;
  const rvec w = eigvalsh(a);
  return std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
}

inline cmat matrix_power(const cmat& a, int p) {
  cmat out = cmat::Identity(a.rows(), a.cols());
  cmat base = a;
  while (p > 0) {
    if (p & 1) out = out * base;
    p >>= 1;
    if (p > 0) base = base * base;
  }
  return out;
}

// Submatrix m[rows, cols] for index lists.
inline cmat take(const cmat& m, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
  cmat out(rows.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows.size(); ++i) out(i, j) = m(rows[i], cols[j]);
  return out;
}

inline cmat take_rows(const cmat& m, const std::vector<Eigen::Index>& rows) {
  cmat out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

// Sign of the permutation (entries 0..k-1).
inline int permutation_sign(std::vector<int> p) {
  int sign = 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (p[i] != static_cast<int>(i)) {
      std::swap(p[i], p[p[i]]);
      sign = -sign;
    }
  }
  return sign;
}

// All permutations of 0..k-1 with their signs, lexicographic order.
inline std::vector<std::pair<std::vector<int>, int>> signed_permutations(int k) {
  std::vector<int> p(k);
  for (int i = 0; i < k; ++i) p[i] = i;
  std::vector<std::pair<std::vector<int>, int>> out;
  do {
    out.emplace_back(p, permutation_sign(p));
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double double_factorial(int k) {
  double r = 1.0;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

inline double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

}  // namespace nci
