#pragma once

#include "nci/lattice.hpp"
#include "nci/spectral.hpp"

#include <functional>

namespace nci {

struct GapClosed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BZGrid {
  int d = 2;
  int n_k = 64;

  void validate() const {
    if (d < 1 || d > 4) throw std::domain_error("grid dimension must be in 1..4");
    if (n_k < 8) throw std::domain_error("grid needs at least 8 points per axis");
  }
  double spacing() const { return 2.0 * pi / n_k; }
  long long size() const {
    long long s = 1;
    for (int j = 0; j < d; ++j) s *= n_k;
    return s;
  }
  std::vector<double> point(long long flat) const {
    std::vector<double> k(static_cast<std::size_t>(d));
    for (int j = d - 1; j >= 0; --j) {
      k[j] = spacing() * static_cast<double>(flat % n_k);
      flat /= n_k;
    }
    return k;
  }
};

using BlochFamily = std::function<cmat(std::span<const double>)>;
using VectorField = std::function<std::vector<double>(std::span<const double>)>;

inline double sphere_area(int m) {
  if (m < 1) throw std::domain_error("sphere dimension must be at least 1");
  if (m % 2 == 0) {
    const int n = m / 2;
    return factorial(n) * std::pow(2.0, 2 * n + 1) * std::pow(pi, n) / factorial(2 * n);
  }
  const int n = (m - 1) / 2;
  return 2.0 * std::pow(pi, n + 1) / factorial(n);
}

namespace detail {

struct BandProjector {
  cmat P;
  double gap;  // min |eps - e_fermi|
};

inline BandProjector lower_projector(const BlochFamily& h, std::span<const double> k, double e_fermi = 0.0) {
  const auto [w, v] = eigh(h(k));
  Eigen::Index n_occ = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) < e_fermi) ++n_occ;
    gap = std::min(gap, std::abs(w(i) - e_fermi));
  }
  const auto occ = v.leftCols(n_occ);
  return {occ * occ.adjoint(), gap};
}

inline constexpr double fd_step = 1e-3;

// Fourth-order central difference of the band projector along one axis.
inline cmat projector_derivative(const BlochFamily& h, std::vector<double> k, int axis) {
  const double k0 = k[axis];
  auto at = [&](double shift) {
    k[axis] = k0 + shift;
    return lower_projector(h, k).P;
  };
  const double s = fd_step;
  return (-at(2 * s) + 8.0 * at(s) - 8.0 * at(-s) + at(-2 * s)) / (12.0 * s);
}

inline std::vector<double> unit(const std::vector<double>& e) {
  double r = 0.0;
  for (double c : e) r += c * c;
  r = std::sqrt(r);
  std::vector<double> n(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) n[i] = e[i] / r;
  return n;
}

inline void require_gap(double gap, double floor) {
  if (gap <= floor) throw GapClosed("spectral gap closes on the momentum grid (" + std::to_string(gap) + ")");
}

}  // namespace detail

/// Plaquette link-phase Chern number of the bands below e_fermi for d=2.
/// Oriented to agree with the projector-trace formula in chern_projector_quadrature.
inline double chern_links(const BlochFamily& h, const BZGrid& grid, double gap_floor = 1e-6) {
  grid.validate();
  if (grid.d != 2) throw std::domain_error("link method is implemented for d=2");
  const int N = grid.n_k;
  std::vector<cmat> frames(static_cast<std::size_t>(N) * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double k[2] = {grid.spacing() * i, grid.spacing() * j};
      const auto [w, v] = eigh(h(k));
      Eigen::Index n_occ = 0;
      double gap = std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < w.size(); ++a) {
        if (w(a) < 0.0) ++n_occ;
        gap = std::min(gap, std::abs(w(a)));
      }
      detail::require_gap(gap, gap_floor);
      frames[static_cast<std::size_t>(i) * N + j] = v.leftCols(n_occ);
    }
  auto frame = [&](int i, int j) -> const cmat& {
    return frames[static_cast<std::size_t>((i + N) % N) * N + (j + N) % N];
  };
  auto link = [](const cmat& a, const cmat& b) { return (a.adjoint() * b).determinant(); };
  double total = 0.0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const cplx loop = link(frame(i, j), frame(i + 1, j)) * link(frame(i + 1, j), frame(i + 1, j + 1)) *
                        link(frame(i + 1, j + 1), frame(i, j + 1)) * link(frame(i, j + 1), frame(i, j));
      total += std::arg(loop);
    }
  return -total / (2.0 * pi);
}

/// ((-1)^(n-1) i^n / (n! (2pi)^n)) sum_sigma sgn(sigma) int tr P dP ... dP over the BZ, d = 2n.
inline cplx chern_projector_quadrature(const BlochFamily& h, const BZGrid& grid, double gap_floor = 1e-6) {
  grid.validate();
  if (grid.d % 2 != 0) throw std::domain_error("Chern quadrature needs even dimension");
  const int n = grid.d / 2;
  const auto perms = signed_permutations(grid.d);
  cplx total = 0.0;
  for (long long f = 0; f < grid.size(); ++f) {
    const auto k = grid.point(f);
    const auto bp = detail::lower_projector(h, k);
    detail::require_gap(bp.gap, gap_floor);
    std::vector<cmat> dP;
    for (int j = 0; j < grid.d; ++j) dP.push_back(detail::projector_derivative(h, k, j));
    for (const auto& [p, sgn] : perms) {
      cmat prod = bp.P;
      for (int j : p) prod = prod * dP[j];
      total += static_cast<double>(sgn) * prod.trace();
    }
  }
  total *= std::pow(grid.spacing(), grid.d);
  const cplx pref = static_cast<double>(parity_sign(n - 1)) * std::pow(I_unit, n) / (factorial(n) * std::pow(2.0 * pi, n));
  return pref * total;
}

inline double chern_momentum(const BlochFamily& h, const BZGrid& grid, double gap_floor = 1e-6) {
  if (grid.d == 2) return chern_links(h, grid, gap_floor);
  if (grid.d == 4) return chern_projector_quadrature(h, grid, gap_floor).real();
  throw std::domain_error("Chern number needs d = 2 or 4");
}

/// Degree of the normalized field k -> E(k)/|E(k)| from T^d to S^d.
inline double winding_unitvector(const VectorField& field, const BZGrid& grid, double gap_floor = 1e-8) {
  grid.validate();
  const int d = grid.d;
  const double s = detail::fd_step;
  double total = 0.0;
  Eigen::MatrixXd frame(d + 1, d + 1);
  for (long long f = 0; f < grid.size(); ++f) {
    auto k = grid.point(f);
    const auto e = field(k);
    if (static_cast<int>(e.size()) != d + 1) throw ShapeError("field must have d+1 components");
    double r = 0.0;
    for (double c : e) r += c * c;
    detail::require_gap(std::sqrt(r), gap_floor);
    const auto n0 = detail::unit(e);
    for (int i = 0; i <= d; ++i) frame(i, 0) = n0[i];
    for (int j = 0; j < d; ++j) {
      const double k0 = k[j];
      auto at = [&](double shift) {
        k[j] = k0 + shift;
        return detail::unit(field(k));
      };
      const auto p2 = at(2 * s), p1 = at(s), m1 = at(-s), m2 = at(-2 * s);
      k[j] = k0;
      for (int i = 0; i <= d; ++i) frame(i, j + 1) = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * s);
    }
    total += frame.determinant();
  }
  return total * std::pow(grid.spacing(), d) / sphere_area(d);
}

/// (-i^(3n+1) / ((2n+1)!! 2 pi^(n+1))) sum_sigma sgn(sigma) int tr S (1-2P) dP ... dP, d = 2n+1.
inline cplx chiral_winding_momentum(const BlochFamily& h, const cmat& S, const BZGrid& grid,
                                    const std::function<cmat(std::span<const double>)>& projector_override = {},
                                    double gap_floor = 1e-6) {
  grid.validate();
  if (grid.d % 2 != 1) throw std::domain_error("chiral winding needs odd dimension");
  const int n = (grid.d - 1) / 2;
  const auto perms = signed_permutations(grid.d);
  auto projector = [&](std::span<const double> k) -> cmat {
    if (projector_override) return projector_override(k);
    const auto bp = detail::lower_projector(h, k);
    detail::require_gap(bp.gap, gap_floor);
    return bp.P;
  };
  auto derivative = [&](std::vector<double> k, int axis) -> cmat {
    const double k0 = k[axis];
    const double s = detail::fd_step;
    auto at = [&](double shift) {
      k[axis] = k0 + shift;
      return projector(k);
    };
    return (-at(2 * s) + 8.0 * at(s) - 8.0 * at(-s) + at(-2 * s)) / (12.0 * s);
  };
  cplx total = 0.0;
  for (long long f = 0; f < grid.size(); ++f) {
    const auto k = grid.point(f);
    const cmat P = projector(k);
    const cmat SU = S * (cmat::Identity(P.rows(), P.cols()) - 2.0 * P);
    std::vector<cmat> dP;
    for (int j = 0; j < grid.d; ++j) dP.push_back(derivative(k, j));
    for (const auto& [p, sgn] : perms) {
      cmat prod = SU;
      for (int j : p) prod = prod * dP[j];
      total += static_cast<double>(sgn) * prod.trace();
    }
  }
  total *= std::pow(grid.spacing(), grid.d);
  const cplx pref = -std::pow(I_unit, 3 * n + 1) / (double_factorial(2 * n + 1) * 2.0 * std::pow(pi, n + 1));
  return pref * total;
}

namespace detail {
// sum_sigma sgn(sigma) tr[ chi L [theta_s1, P] ... [theta_sk, P] ] with chi restricting the trace.
inline cplx step_commutator_trace(const cmat& left, const cmat& P, const std::vector<rvec>& steps,
                                  const std::optional<rvec>& cutoff) {
  const Eigen::Index N = P.rows();
  for (const auto& t : steps)
    if (t.size() != N) throw ShapeError("step function has wrong length");
  std::vector<Eigen::Index> rows;
  if (cutoff) {
    if (cutoff->size() != N) throw ShapeError("cutoff has wrong length");
    rows = support(*cutoff);
  } else {
    rows.resize(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) rows[i] = i;
  }
  std::vector<cmat> comm;
  for (const auto& t : steps) comm.push_back(t.cast<cplx>().asDiagonal() * P - P * t.cast<cplx>().asDiagonal());
  const cmat start = take_rows(left, rows);
  cplx total = 0.0;
  for (const auto& [p, sgn] : signed_permutations(static_cast<int>(steps.size()))) {
    cmat prod = start;
    for (int j : p) prod = prod * comm[j];
    cplx tr = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) tr += prod(static_cast<Eigen::Index>(i), rows[i]);
    total += static_cast<double>(sgn) * tr;
  }
  return total;
}
}  // namespace detail

/// -((2 pi i)^n / n!) sum_sigma sgn(sigma) tr P [theta_s1, P] ... [theta_s2n, P].
/// Without a cutoff the trace runs over the whole finite lattice.
inline cplx chern_realspace_step(const cmat& P, const std::vector<rvec>& steps,
                                 const std::optional<rvec>& cutoff = std::nullopt) {
  const int d = static_cast<int>(steps.size());
  if (d % 2 != 0 || d == 0) throw std::domain_error("step Chern needs an even number of step functions");
  const int n = d / 2;
  const cplx pref = -std::pow(2.0 * pi * I_unit, n) / factorial(n);
  return pref * detail::step_commutator_trace(P, P, steps, cutoff);
}

/// (2^(2n) (pi i)^n / (2n+1)!!) sum_sigma sgn(sigma) tr S U [theta_s1, P] ... [theta_s(2n+1), P].
inline cplx chiral_realspace_step(const cmat& P, const cmat& S, const cmat& U, const std::vector<rvec>& steps,
                                  const std::optional<rvec>& cutoff = std::nullopt) {
  const int d = static_cast<int>(steps.size());
  if (d % 2 != 1) throw std::domain_error("chiral step formula needs an odd number of step functions");
  const int n = (d - 1) / 2;
  const cplx pref = std::pow(2.0, 2 * n) * std::pow(pi * I_unit, n) / double_factorial(2 * n + 1);
  return pref * detail::step_commutator_trace(S * U, P, steps, cutoff);
}

}  // namespace nci
