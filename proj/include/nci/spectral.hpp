#pragma once

#include "nci/linalg.hpp"

namespace nci {

struct FermiLevelOnSpectrum : std::runtime_error {
  double eigenvalue;
  FermiLevelOnSpectrum(double e_fermi, double ev)
      : std::runtime_error("Fermi level " + std::to_string(e_fermi) + " collides with eigenvalue " +
                           std::to_string(ev)),
        eigenvalue(ev) {}
};

struct EigDecomp {
  rvec eigenvalues;  // ascending
  cmat eigenvectors;

  Eigen::Index dim() const { return eigenvalues.size(); }
};

inline EigDecomp eig(const cmat& H) {
  auto [w, v] = eigh(H);
  return {std::move(w), std::move(v)};
}

inline double reconstruction_residual(const cmat& H, const EigDecomp& e) {
  return max_abs(H - e.eigenvectors * e.eigenvalues.cast<cplx>().asDiagonal() * e.eigenvectors.adjoint());
}

inline double orthonormality_residual(const EigDecomp& e) {
  return max_abs(e.eigenvectors.adjoint() * e.eigenvectors - cmat::Identity(e.dim(), e.dim()));
}

struct FermiProjection {
  cmat P;
  double e_fermi = 0.0;
  double gap = 0.0;  // min |eps - e_fermi|
  Eigen::Index n_occupied = 0;
  double highest_occupied = -std::numeric_limits<double>::infinity();
  double lowest_empty = std::numeric_limits<double>::infinity();
};

inline constexpr double default_gap_tol = 1e-8;

inline FermiProjection fermi_projection(const EigDecomp& e, double e_fermi, double gap_tol = default_gap_tol) {
  FermiProjection fp;
  fp.e_fermi = e_fermi;
  fp.gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < e.dim(); ++i) {
    const double ev = e.eigenvalues(i);
    if (std::abs(ev - e_fermi) <= gap_tol) throw FermiLevelOnSpectrum(e_fermi, ev);
    fp.gap = std::min(fp.gap, std::abs(ev - e_fermi));
    if (ev < e_fermi) {
      ++fp.n_occupied;
      fp.highest_occupied = ev;
    } else if (!std::isfinite(fp.lowest_empty)) {
      fp.lowest_empty = ev;
    }
  }
  const auto occ = e.eigenvectors.leftCols(fp.n_occupied);
  fp.P = occ * occ.adjoint();
  return fp;
}

inline FermiProjection fermi_projection(const cmat& H, double e_fermi, double gap_tol = default_gap_tol) {
  return fermi_projection(eig(H), e_fermi, gap_tol);
}

inline cmat flat_band_unitary(const FermiProjection& fp) {
  return cmat::Identity(fp.P.rows(), fp.P.cols()) - 2.0 * fp.P;
}

struct GapPair {
  double below = std::numeric_limits<double>::infinity();
  double above = std::numeric_limits<double>::infinity();
};

inline GapPair spectral_gap(const EigDecomp& e, double e_fermi) {
  GapPair g;
  for (Eigen::Index i = 0; i < e.dim(); ++i) {
    const double ev = e.eigenvalues(i);
    if (ev < e_fermi)
      g.below = std::min(g.below, e_fermi - ev);
    else
      g.above = std::min(g.above, ev - e_fermi);
  }
  return g;
}

// max_i min_j |eps_i + eps_j| over an ascending spectrum
inline double pairing_mismatch(const rvec& ascending) {
  double worst = 0.0;
  const double* begin = ascending.data();
  const double* end = begin + ascending.size();
  for (const double* p = begin; p != end; ++p) {
    const double* hit = std::lower_bound(begin, end, -*p);
    double best = std::numeric_limits<double>::infinity();
    if (hit != end) best = std::abs(*hit + *p);
    if (hit != begin) best = std::min(best, std::abs(*(hit - 1) + *p));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace nci
