#pragma once

#include "nci/models.hpp"
#include "nci/spectral.hpp"

#include <sstream>

namespace nci {

enum class IndexKind { even, odd_nochiral, odd_chiral };

inline std::string_view to_string(IndexKind k) {
  switch (k) {
    case IndexKind::even: return "even";
    case IndexKind::odd_nochiral: return "odd-nochiral";
    default: return "odd-chiral";
  }
}

struct UnresolvedIndex : std::runtime_error {
  std::vector<double> offending;
  UnresolvedIndex(const std::string& what, std::vector<double> ev) : std::runtime_error(what), offending(std::move(ev)) {}
};

struct IndexOperatorPair {
  cmat A;
  cmat B;
  IndexKind kind = IndexKind::even;
  int d = 0;
  struct Provenance {
    std::string model_id;
    KinkPoint kink;
    double e_fermi = 0.0;
  } provenance;

  // Exponent 2n+1 of the finite-volume trace witness.
  int trace_power() const { return d % 2 == 0 ? d + 1 : d; }
};

inline IndexKind default_kind(int d, bool has_chiral) {
  if (d % 2 == 0) return IndexKind::even;
  return has_chiral ? IndexKind::odd_chiral : IndexKind::odd_nochiral;
}

namespace detail {
inline void check_kind(IndexKind kind, const DiracOperator& D, bool has_s) {
  const int d = static_cast<int>(D.unit_components.size());
  if (kind == IndexKind::even && d % 2 != 0) throw ConfigError("even index operators need even dimension");
  if (kind != IndexKind::even && d % 2 == 0) throw ConfigError("odd index operators need odd dimension");
  if (kind == IndexKind::odd_chiral && !has_s) throw ConfigError("chiral index operators need a chiral operator S");
}
}  // namespace detail

/// A and B on gamma x site x orbital. `chiral` is the site x orbital operator S when kind is odd-chiral.
inline IndexOperatorPair build_index_operators(const cmat& P, const DiracOperator& D, IndexKind kind,
                                               const std::optional<cmat>& chiral = std::nullopt) {
  detail::check_kind(kind, D, chiral.has_value());
  if (P.rows() != D.space_dim) throw ShapeError("projection and Dirac operator act on different spaces");
  if (D.D.rows() != D.dim()) throw ShapeError("Dirac operator was not materialized");
  const Eigen::Index n = D.dim();
  const cmat id = cmat::Identity(n, n);
  const cmat Pl = lift_to_gamma(P, D.gamma_dim);
  IndexOperatorPair pair;
  pair.kind = kind;
  pair.d = static_cast<int>(D.unit_components.size());
  pair.provenance.kink = D.kink;
  if (kind == IndexKind::odd_chiral) {
    const cmat Sl = lift_to_gamma(*chiral, D.gamma_dim);
    const cmat Ul = id - 2.0 * Pl;
    const cmat PD = dirac_projection(D.D);
    const cmat UPDU = Ul * PD * Ul;
    pair.A = Sl * (PD - UPDU);
    pair.B = Sl * (id - PD - UPDU);
    return pair;
  }
  const cmat DPD = D.D * Pl * D.D;
  pair.A = Pl - DPD;
  pair.B = id - Pl - DPD;
  if (kind == IndexKind::even) {
    const cmat G = grading_operator(D);
    pair.A = G * pair.A;
    pair.B = G * pair.B;
  }
  return pair;
}

inline IndexOperatorPair build_index_operators(const FermiProjection& fp, const DiracOperator& D, IndexKind kind,
                                               const std::optional<cmat>& chiral = std::nullopt) {
  auto pair = build_index_operators(fp.P, D, kind, chiral);
  pair.provenance.e_fermi = fp.e_fermi;
  return pair;
}

struct SusyResiduals {
  double sum_of_squares = 0.0;  // ||A^2 + B^2 - I||
  double anticommutator = 0.0;  // ||AB + BA||
};

inline SusyResiduals susy_residuals(const IndexOperatorPair& p) {
  const cmat id = cmat::Identity(p.A.rows(), p.A.cols());
  return {max_abs(p.A * p.A + p.B * p.B - id), max_abs(p.A * p.B + p.B * p.A)};
}

struct Window {
  std::vector<Eigen::Index> space;  // site x orbital indices inside the ball
  Eigen::Index gamma_dim = 1;
  Eigen::Index space_dim = 0;
  double radius = 0.0;

  // Indices in the full gamma x site x orbital space.
  std::vector<Eigen::Index> full() const {
    std::vector<Eigen::Index> out;
    out.reserve(space.size() * gamma_dim);
    for (Eigen::Index g = 0; g < gamma_dim; ++g)
      for (auto i : space) out.push_back(g * space_dim + i);
    return out;
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(space.size()) * gamma_dim; }
};

inline Window make_window(const LatticeSpec& spec, const DiracOperator& D, double R) {
  if (spec.boundary == Boundary::periodic && R > 0.25 * spec.min_length() + 1e-12)
    throw GeometryError("window radius " + std::to_string(R) + " reaches the periodic seam (limit L/4 = " +
                        std::to_string(0.25 * spec.min_length()) + ")");
  Window w;
  w.gamma_dim = D.gamma_dim;
  w.space_dim = D.space_dim;
  w.radius = R;
  for (Eigen::Index i = 0; i < D.space_dim; ++i)
    if (D.distance(i) <= R) w.space.push_back(i);
  return w;
}

// Window covering everything.
inline Window full_window(const DiracOperator& D) {
  Window w;
  w.gamma_dim = D.gamma_dim;
  w.space_dim = D.space_dim;
  w.radius = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < D.space_dim; ++i) w.space.push_back(i);
  return w;
}

inline cmat compress(const IndexOperatorPair& pair, const Window& w) {
  const auto idx = w.full();
  return take(pair.A, idx, idx);
}

// Compression by a 0/1 indicator on the full space.
inline cmat compress(const IndexOperatorPair& pair, const rvec& indicator) {
  if (indicator.size() != pair.A.rows()) throw ShapeError("window indicator has wrong length");
  const auto idx = support(indicator);
  return take(pair.A, idx, idx);
}

namespace detail {
// D restricted to the window, assembled from its unit-vector components.
inline cmat dirac_window_block(const DiracOperator& D, const Window& w) {
  const Eigen::Index nw = static_cast<Eigen::Index>(w.space.size());
  cmat out = cmat::Zero(w.size(), w.size());
  for (std::size_t j = 0; j < D.unit_components.size(); ++j) {
    rvec nj(nw);
    for (Eigen::Index i = 0; i < nw; ++i) nj(i) = D.unit_components[j](w.space[i]);
    out += kron(D.gammas.gammas[j], cmat(nj.cast<cplx>().asDiagonal()));
  }
  return out;
}
}  // namespace detail

/// Compressed A built directly on the window without forming the full-space operators.
/// Uses that D is site-diagonal and, for the chiral kind, that U^2 = I.
inline cmat compressed_index_operator(const cmat& P, const DiracOperator& D, IndexKind kind, const Window& w,
                                      const std::optional<cmat>& chiral = std::nullopt) {
  detail::check_kind(kind, D, chiral.has_value());
  if (P.rows() != D.space_dim) throw ShapeError("projection and Dirac operator act on different spaces");
  const Eigen::Index nw = static_cast<Eigen::Index>(w.space.size());
  const Eigen::Index g = D.gamma_dim;
  const cmat Dw = detail::dirac_window_block(D, w);
  const cmat id = cmat::Identity(w.size(), w.size());
  if (kind == IndexKind::odd_chiral) {
    const cmat U = cmat::Identity(P.rows(), P.cols()) - 2.0 * P;
    const cmat Uw = take_rows(U, w.space);  // rows of U in the window
    cmat UDU = cmat::Zero(w.size(), w.size());
    for (std::size_t j = 0; j < D.unit_components.size(); ++j) {
      const cmat blk = Uw * D.unit_components[j].cast<cplx>().asDiagonal() * Uw.adjoint();
      UDU += kron(D.gammas.gammas[j], blk);
    }
    const cmat PD = 0.5 * (id + Dw);
    const cmat UPDU = 0.5 * (id + UDU);
    const cmat Sw = kron(cmat::Identity(g, g), take(*chiral, w.space, w.space));
    return Sw * (PD - UPDU);
  }
  const cmat Pw = kron(cmat::Identity(g, g), take(P, w.space, w.space));
  cmat A = Pw - Dw * Pw * Dw;
  if (kind == IndexKind::even) {
    const cmat& last = D.gammas.last();
    A = kron(last, cmat::Identity(nw, nw)) * A;
  }
  return A;
}

struct IndexReport {
  std::vector<double> eigenvalues_near_plus;
  std::vector<double> eigenvalues_near_minus;
  std::vector<double> buffer_eigenvalues;
  int n_plus = 0;
  int n_minus = 0;
  double delta = 0.2;
  bool buffer_violation = false;
  IndexKind kind = IndexKind::even;
  double max_interior = 0.0;  // largest |lambda| outside both clusters
  Eigen::Index window_dim = 0;

  bool certified() const { return !buffer_violation; }
};

inline IndexReport near_kernel_counts(const rvec& eigs, double delta, IndexKind kind = IndexKind::even) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::domain_error("kernel tolerance must lie in (0, 0.5)");
  IndexReport r;
  r.delta = delta;
  r.kind = kind;
  r.window_dim = eigs.size();
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const double l = eigs(i);
    if (l >= 1.0 - delta) {
      r.eigenvalues_near_plus.push_back(l);
    } else if (l <= -1.0 + delta) {
      r.eigenvalues_near_minus.push_back(l);
    } else {
      r.max_interior = std::max(r.max_interior, std::abs(l));
      if (std::abs(l) > 1.0 - 2.0 * delta) r.buffer_eigenvalues.push_back(l);
    }
  }
  r.n_plus = static_cast<int>(r.eigenvalues_near_plus.size());
  r.n_minus = static_cast<int>(r.eigenvalues_near_minus.size());
  r.buffer_violation = !r.buffer_eigenvalues.empty();
  return r;
}

namespace detail {
inline void require_certified(const IndexReport& r) {
  if (r.buffer_violation) {
    std::ostringstream os;
    os << "index not certified: " << r.buffer_eigenvalues.size() << " eigenvalue(s) in the buffer zone";
    throw UnresolvedIndex(os.str(), r.buffer_eigenvalues);
  }
}
}  // namespace detail

inline int integer_index(const IndexReport& r) {
  detail::require_certified(r);
  if (r.kind == IndexKind::odd_nochiral) return 0;
  const int diff = r.n_plus - r.n_minus;
  if (diff % 2 != 0)
    throw UnresolvedIndex("near-kernel counts have odd difference", r.eigenvalues_near_plus);
  return diff / 2;
}

inline int z2_index(const IndexReport& r) {
  detail::require_certified(r);
  if (r.kind == IndexKind::odd_nochiral) return r.n_plus % 2;
  if (r.n_plus % 2 != 0) throw UnresolvedIndex("near-kernel count is odd", r.eigenvalues_near_plus);
  return (r.n_plus / 2) % 2;
}

struct VanishingResiduals {
  double trace_power = 0.0;        // |tr A^(2n+1)| or |tr S X^(2n+1)|
  double spectrum_asymmetry = 0.0; // max_i min_j |lambda_i + lambda_j|
  int fredholm_kernel_difference = 0;
};

/// Finite-dimensional witnesses that the uncompressed index vanishes.
inline VanishingResiduals exact_finite_volume_vanishing_check(const IndexOperatorPair& pair,
                                                              const std::optional<cmat>& lifted_chiral = std::nullopt) {
  VanishingResiduals v;
  const int p = pair.trace_power();
  if (pair.kind == IndexKind::odd_chiral) {
    if (!lifted_chiral) throw ConfigError("chiral vanishing check needs the lifted S");
    // A = S X with S^2 = I
    const cmat X = (*lifted_chiral) * pair.A;
    v.trace_power = std::abs(((*lifted_chiral) * matrix_power(X, p)).trace());
  } else {
    v.trace_power = std::abs(matrix_power(pair.A, p).trace());
  }
  v.spectrum_asymmetry = pairing_mismatch(eigvalsh(pair.A));
  return v;
}

/// Fredholm witness for the even kind: T = P Dodd P + (1 - P) on the grading's -1 sector.
/// Returns nullity(T) - nullity(T^dagger), which is zero for every square matrix.
inline int fredholm_kernel_difference(const cmat& P, const DiracOperator& D, double tol = 1e-8) {
  const cmat Dodd = dirac_offdiagonal_block(D);
  const Eigen::Index half = D.gamma_dim / 2;
  const cmat Pl = lift_to_gamma(P, half);
  const cmat id = cmat::Identity(Pl.rows(), Pl.cols());
  const cmat T = Pl * Dodd * Pl + (id - Pl);
  auto nullity = [&](cmat m) {
    const auto n = static_cast<lapack_int>(m.rows());
    rvec s(n);
    const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', n, n, reinterpret_cast<lapack_complex_double*>(m.data()),
                                           n, s.data(), nullptr, 1, nullptr, 1);
    if (info != 0) throw LinalgError("zgesdd failed");
    return static_cast<int>((s.array() < tol).count());
  };
  return nullity(T) - nullity(T.adjoint());
}

struct DualityCounts {
  int count_pep = 0;  // eigenvalues of 1-2PEP within delta of 0
  int count_epe = 0;
  bool equal() const { return count_pep == count_epe; }
};

inline double projection_residual(const cmat& P) {
  return std::max(max_abs(P * P - P), hermiticity_residual(P));
}

// One pair of eigendecompositions serves every tolerance in the list.
inline std::vector<DualityCounts> kernel_duality_check(const cmat& P, const cmat& E, const std::vector<double>& deltas) {
  if (P.rows() != E.rows()) throw ShapeError("projections act on different spaces");
  if (projection_residual(P) > 1e-10 || projection_residual(E) > 1e-10)
    throw std::domain_error("kernel duality needs orthogonal projections");
  const cmat id = cmat::Identity(P.rows(), P.cols());
  const rvec pep = eigvalsh(id - 2.0 * P * E * P);
  const rvec epe = eigvalsh(id - 2.0 * E * P * E);
  std::vector<DualityCounts> out;
  for (double delta : deltas)
    out.push_back({static_cast<int>((pep.array().abs() <= delta).count()),
                   static_cast<int>((epe.array().abs() <= delta).count())});
  return out;
}

inline DualityCounts kernel_duality_check(const cmat& P, const cmat& E, double delta) {
  return kernel_duality_check(P, E, std::vector<double>{delta}).front();
}

struct IndexParams {
  double e_fermi = 0.0;
  double delta = 0.2;
  double radius = 4.0;
  std::optional<KinkPoint> kink;
  std::optional<IndexKind> kind;
  double gap_tol = default_gap_tol;
};

struct IndexResult {
  IndexReport report;
  std::optional<int> integer;
  std::optional<int> z2;
  double gap = 0.0;
  Eigen::Index hilbert_dim = 0;
  std::vector<double> window_spectrum;
};

inline IndexResult finish_index(const rvec& eigs, const IndexParams& params, IndexKind kind) {
  IndexResult res;
  res.report = near_kernel_counts(eigs, params.delta, kind);
  res.window_spectrum.assign(eigs.data(), eigs.data() + eigs.size());
  if (res.report.certified()) {
    try {
      res.integer = integer_index(res.report);
    } catch (const UnresolvedIndex&) {
    }
    try {
      res.z2 = z2_index(res.report);
    } catch (const UnresolvedIndex&) {
    }
  }
  return res;
}

/// Fermi projection -> Dirac operator -> windowed A -> near-kernel counts.
inline IndexResult compressed_index(const TightBindingModel& model, const FermiProjection& fp, const IndexParams& params) {
  const KinkPoint k = params.kink.value_or(default_kink(model.spec));
  const IndexKind kind = params.kind.value_or(default_kind(model.spec.d, model.syms.s.has_value()));
  const DiracOperator D = dirac_operator(model.spec, dirac_gamma_set(model.spec.d), k, default_image_rule(model.spec), false);
  const Window w = make_window(model.spec, D, params.radius);
  std::optional<cmat> S;
  if (kind == IndexKind::odd_chiral) {
    if (!model.syms.s) throw ConfigError("chiral index requested for a model without S");
    S = lift_local(*model.syms.s, model.spec.n_sites());
  }
  const cmat AR = compressed_index_operator(fp.P, D, kind, w, S);
  auto res = finish_index(eigvalsh(AR), params, kind);
  res.gap = fp.gap;
  res.hilbert_dim = model.spec.dim();
  return res;
}

inline IndexResult compressed_index(const TightBindingModel& model, const IndexParams& params) {
  const FermiProjection fp = fermi_projection(model.H, params.e_fermi, params.gap_tol);
  return compressed_index(model, fp, params);
}

struct ScanPoint {
  double g = 0.0;
  double diff_norm = 0.0;  // ||A(g) - A(0)||_op
  double gap = 0.0;
  std::optional<IndexResult> index;
  bool gap_closed = false;
};

/// Operator-norm response of the uncompressed A to H + g dH, with the compressed index at every g.
/// The scan stops at the first g where the Fermi level meets the spectrum.
inline std::vector<ScanPoint> perturbation_norm_scan(const TightBindingModel& model, const cmat& dH,
                                                     const std::vector<double>& g_list, const IndexParams& params) {
  if (dH.rows() != model.H.rows()) throw ShapeError("perturbation has wrong shape");
  const KinkPoint k = params.kink.value_or(default_kink(model.spec));
  const IndexKind kind = params.kind.value_or(default_kind(model.spec.d, model.syms.s.has_value()));
  const DiracOperator D = dirac_operator(model.spec, dirac_gamma_set(model.spec.d), k, default_image_rule(model.spec));
  std::optional<cmat> S;
  if (model.syms.s) S = lift_local(*model.syms.s, model.spec.n_sites());
  std::optional<cmat> A0;
  std::vector<ScanPoint> out;
  for (double g : g_list) {
    ScanPoint pt;
    pt.g = g;
    TightBindingModel m = model;
    m.H = model.H + g * dH;
    FermiProjection fp;
    try {
      fp = fermi_projection(m.H, params.e_fermi, 2.0 * params.gap_tol);
    } catch (const FermiLevelOnSpectrum&) {
      pt.gap_closed = true;
      out.push_back(pt);
      break;
    }
    pt.gap = fp.gap;
    const auto pair = build_index_operators(fp, D, kind, S);
    if (!A0) A0 = pair.A;
    pt.diff_norm = op_norm_hermitian(pair.A - *A0);
    pt.index = compressed_index(m, fp, params);
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace nci
