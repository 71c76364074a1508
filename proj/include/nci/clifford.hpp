#pragma once

#include "nci/linalg.hpp"

#include <array>
#include <span>

namespace nci {

struct DimensionError : std::domain_error {
  using std::domain_error::domain_error;
};

namespace pauli {
inline cmat s0() { return cmat::Identity(2, 2); }
inline cmat s1() {
  cmat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline cmat s2() {
  cmat m(2, 2);
  m << 0, -I_unit, I_unit, 0;
  return m;
}
inline cmat s3() {
  cmat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

/// Anti-unitary map v -> U conj(v). Never materialized as a matrix.
class AntiUnitary {
 public:
  AntiUnitary() = default;
  explicit AntiUnitary(cmat u) : u_(std::move(u)) {}

  const cmat& unitary() const { return u_; }
  Eigen::Index dim() const { return u_.rows(); }

  cvec operator()(const cvec& v) const { return u_ * v.conjugate(); }
  cmat apply_columns(const cmat& v) const { return u_ * v.conjugate(); }

  // Image of a linear operator under conjugation by the map: U conj(X) U^dagger.
  cmat conjugate(const cmat& x) const { return u_ * x.conjugate() * u_.adjoint(); }

  // Sign s with (UK)^2 = s, evaluated by applying the map twice to every basis vector.
  int square_sign(double tol = 1e-12) const {
    const Eigen::Index n = dim();
    cmat twice(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      cvec e = cvec::Zero(n);
      e(j) = 1.0;
      twice.col(j) = (*this)((*this)(e));
    }
    const cmat id = cmat::Identity(n, n);
    if (max_abs(twice - id) < tol) return 1;
    if (max_abs(twice + id) < tol) return -1;
    throw std::domain_error("anti-unitary does not square to +-1");
  }

  // Lift to a block-diagonal map over `copies` identical blocks (site-major ordering).
  AntiUnitary lifted(Eigen::Index copies) const { return AntiUnitary(kron_identity_left(copies, u_)); }

 private:
  cmat u_;
};

struct GammaSet {
  int n = 0;
  Eigen::Index dim = 1;
  std::vector<cmat> gammas;  // gammas[i] holds gamma^(i+1)
  cmat c_plus;
  cmat c_minus;

  const cmat& gamma(int one_based) const { return gammas.at(static_cast<std::size_t>(one_based - 1)); }
  const cmat& last() const { return gammas.back(); }
  int count() const { return static_cast<int>(gammas.size()); }
};

inline constexpr int default_max_half_dim = 4;

namespace detail {
inline cmat alternating_string(int n, bool starts_with_s1) {
  cmat out = cmat::Identity(1, 1);
  for (int i = 0; i < n; ++i) {
    const bool s1_here = (i % 2 == 0) == starts_with_s1;
    out = kron(out, s1_here ? pauli::s1() : pauli::s2());
  }
  return out;
}

inline cmat pauli_string(int leading_identities, const cmat& middle, int trailing_s3) {
  cmat out = cmat::Identity(1, 1);
  for (int i = 0; i < leading_identities; ++i) out = kron(out, pauli::s0());
  out = kron(out, middle);
  for (int i = 0; i < trailing_s3; ++i) out = kron(out, pauli::s3());
  return out;
}
}  // namespace detail

inline GammaSet build_gamma_set(int n, int max_n = default_max_half_dim) {
  if (n < 1 || n > max_n)
    throw DimensionError("gamma set half-dimension " + std::to_string(n) + " outside [1, " +
                         std::to_string(max_n) + "]");
  GammaSet gs;
  gs.n = n;
  gs.dim = Eigen::Index{1} << n;
  gs.gammas.reserve(2 * n + 1);
  for (int m = 1; m <= n; ++m) {
    gs.gammas.push_back(detail::pauli_string(m - 1, pauli::s1(), n - m));
    gs.gammas.push_back(detail::pauli_string(m - 1, pauli::s2(), n - m));
  }
  cmat last = cmat::Identity(1, 1);
  for (int i = 0; i < n; ++i) last = kron(last, pauli::s3());
  gs.gammas.push_back(last);
  gs.c_plus = detail::alternating_string(n, true);
  gs.c_minus = detail::alternating_string(n, false);
  return gs;
}

// One-dimensional Clifford module with the single generator [1]. Used for the d=1 Dirac operator.
inline GammaSet scalar_gamma_set() {
  GammaSet gs;
  gs.n = 0;
  gs.dim = 1;
  gs.gammas = {cmat::Identity(1, 1)};
  gs.c_plus = cmat::Identity(1, 1);
  gs.c_minus = cmat::Identity(1, 1);
  return gs;
}

inline double anticommutator_residual(const GammaSet& gs) {
  double worst = 0.0;
  const cmat id = cmat::Identity(gs.dim, gs.dim);
  for (int i = 0; i < gs.count(); ++i)
    for (int j = 0; j < gs.count(); ++j) {
      const cmat ac = gs.gammas[i] * gs.gammas[j] + gs.gammas[j] * gs.gammas[i];
      worst = std::max(worst, max_abs(ac - (i == j ? 2.0 : 0.0) * id));
    }
  return worst;
}

inline cplx gamma_trace_product(const GammaSet& gs, std::span<const int> indices) {
  if (indices.empty()) throw std::domain_error("gamma_trace_product: empty index list");
  cmat prod = cmat::Identity(gs.dim, gs.dim);
  for (int i : indices) {
    if (i < 1 || i > gs.count())
      throw std::domain_error("gamma index " + std::to_string(i) + " outside [1, " + std::to_string(gs.count()) +
                              "]");
    prod = prod * gs.gammas[i - 1];
  }
  return prod.trace();
}

inline cplx gamma_trace_product(const GammaSet& gs, std::initializer_list<int> indices) {
  const std::vector<int> v(indices);
  return gamma_trace_product(gs, std::span<const int>(v));
}

struct SignatureRow {
  int d = 0;
  int sgn_cpk2 = 0;
  int sgn_cmk2 = 0;
  int sgn_gamma_last = 0;
  int sgn_plus_D = 0;
  int sgn_minus_D = 0;

  std::array<int, 5> entries() const { return {sgn_cpk2, sgn_cmk2, sgn_gamma_last, sgn_plus_D, sgn_minus_D}; }
  bool operator==(const SignatureRow&) const = default;
};

inline int parity_sign(int k) { return (k % 2 == 0) ? 1 : -1; }

inline SignatureRow real_structure_signs(int d_even) {
  if (d_even < 2 || d_even % 2 != 0)
    throw std::domain_error("real_structure_signs needs a positive even dimension, got " + std::to_string(d_even));
  const int n = d_even / 2;
  SignatureRow row;
  row.d = d_even;
  // n = 2l -> (-1)^l ; n = 2l-1 -> (-1)^(l-1)
  row.sgn_cpk2 = (n % 2 == 0) ? parity_sign(n / 2) : parity_sign((n + 1) / 2 - 1);
  // n in {2l-1, 2l} -> (-1)^l
  row.sgn_cmk2 = parity_sign((n + 1) / 2);
  row.sgn_gamma_last = parity_sign(n);
  row.sgn_plus_D = parity_sign(n + 1);
  row.sgn_minus_D = parity_sign(n);
  return row;
}

// Same row evaluated from explicit matrices. Only meaningful while the gamma set can be built.
inline SignatureRow real_structure_signs_from_matrices(int d_even, int max_n = default_max_half_dim) {
  const GammaSet gs = build_gamma_set(d_even / 2, max_n);
  const AntiUnitary cp(gs.c_plus), cm(gs.c_minus);
  SignatureRow row;
  row.d = d_even;
  row.sgn_cpk2 = cp.square_sign();
  row.sgn_cmk2 = cm.square_sign();

  auto commutation_sign = [](const AntiUnitary& t, const cmat& x) {
    // t X t^{-1} = s X
    const cmat img = t.conjugate(x);
    if (max_abs(img - x) < 1e-12) return 1;
    if (max_abs(img + x) < 1e-12) return -1;
    throw std::domain_error("operator neither commutes nor anticommutes");
  };
  row.sgn_gamma_last = commutation_sign(cp, gs.last());
  if (commutation_sign(cm, gs.last()) != row.sgn_gamma_last)
    throw std::domain_error("C+ and C- disagree on the grading signature");
  // Any real combination of the spatial gammas behaves like D; check each generator.
  int sp = 0, sm = 0;
  for (int j = 0; j < 2 * gs.n; ++j) {
    const int a = commutation_sign(cp, gs.gammas[j]);
    const int b = commutation_sign(cm, gs.gammas[j]);
    if (j == 0) {
      sp = a;
      sm = b;
    } else if (a != sp || b != sm) {
      throw std::domain_error("spatial gammas carry inconsistent signatures");
    }
  }
  row.sgn_plus_D = sp;
  row.sgn_minus_D = sm;
  return row;
}

}  // namespace nci
