#pragma once

#include "nci/lattice.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace nci {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SymmetryViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassificationError : std::domain_error {
  using std::domain_error::domain_error;
};

// Anti-unitary acting identically on every site: (I_sites (x) u) K.
struct LocalAntiUnitary {
  cmat u;
  int parity = 0;  // declared sign of the square

  AntiUnitary local() const { return AntiUnitary(u); }
  int evaluated_parity() const { return local().square_sign(); }
};

struct SymmetrySet {
  std::optional<LocalAntiUnitary> theta;
  std::optional<LocalAntiUnitary> xi;
  std::optional<cmat> s;  // local chiral operator

  bool empty() const { return !theta && !xi && !s; }
};

struct DiracModelParams {
  int d = 2;
  std::vector<double> t_s;
  std::vector<double> t_c;
  double m0 = 1.0;

  static DiracModelParams uniform(int d, double m0, double ts = 1.0, double tc = 1.0) {
    return {d, std::vector<double>(static_cast<std::size_t>(d), ts), std::vector<double>(static_cast<std::size_t>(d), tc),
            m0};
  }
};

struct TightBindingModel {
  LatticeSpec spec;
  cmat H;
  std::string family;
  DiracModelParams base;
  SymmetrySet syms;
  int hopping_range = 1;
  double hopping_bound = 0.0;
  double disorder_W = 0.0;
  std::uint64_t disorder_seed = 0;
};

inline Eigen::Index dirac_model_internal_dim(int d) { return Eigen::Index{1} << ((d + 1) / 2); }

// Gamma set used by the Hamiltonian: spatial generators 1..d, mass generator d+1,
// and for odd d the chiral generator d+2.
inline GammaSet model_gamma_set(int d) {
  if (d < 1 || d > 4) throw DimensionError("model dimension must be in 1..4");
  return build_gamma_set((d + 1) / 2);
}

namespace detail {

inline void check_params(const DiracModelParams& p) {
  if (p.d < 1 || p.d > 4) throw DimensionError("model dimension must be in 1..4");
  if (static_cast<int>(p.t_s.size()) != p.d || static_cast<int>(p.t_c.size()) != p.d)
    throw ShapeError("hopping vectors must have one entry per axis");
}

inline void add_block(cmat& H, Eigen::Index row_site, Eigen::Index col_site, const cmat& blk) {
  const Eigen::Index M = blk.rows();
  H.block(row_site * M, col_site * M, M, M) += blk;
}

// Translation-invariant nearest-neighbour Hamiltonian from an onsite block and forward hoppings.
inline cmat assemble(const LatticeSpec& spec, const cmat& onsite, const std::vector<cmat>& forward) {
  cmat H = cmat::Zero(spec.dim(), spec.dim());
  for (Eigen::Index s = 0; s < spec.n_sites(); ++s) {
    add_block(H, s, s, onsite);
    for (int j = 0; j < spec.d; ++j) {
      const auto t = spec.forward_neighbor(s, j);
      if (!t) continue;
      add_block(H, s, *t, forward[j]);
      add_block(H, *t, s, forward[j].adjoint());
    }
  }
  return H;
}

inline double block_bound(const cmat& onsite, const std::vector<cmat>& forward) {
  double b = max_abs(onsite);
  for (const auto& f : forward) b = std::max(b, max_abs(f));
  return b;
}

}  // namespace detail

inline cmat lift_local(const cmat& local, Eigen::Index n_sites) { return kron_identity_left(n_sites, local); }

struct DiracBlocks {
  cmat onsite;
  std::vector<cmat> forward;  // H[x, x+e_j]
};

inline DiracBlocks dirac_model_blocks(const DiracModelParams& p) {
  detail::check_params(p);
  const GammaSet gs = model_gamma_set(p.d);
  const cmat& mass = gs.gamma(p.d + 1);
  DiracBlocks b;
  b.onsite = p.m0 * mass;
  for (int j = 0; j < p.d; ++j)
    b.forward.push_back(p.t_s[j] / (2.0 * I_unit) * gs.gammas[j] + 0.5 * p.t_c[j] * mass);
  return b;
}

inline TightBindingModel build_dirac_lattice_model(const DiracModelParams& p, const LatticeSpec& spec) {
  detail::check_params(p);
  spec.validate();
  if (spec.d != p.d) throw ShapeError("lattice and model dimensions differ");
  if (spec.internal_dim != dirac_model_internal_dim(p.d))
    throw ShapeError("internal dimension " + std::to_string(spec.internal_dim) + " does not match gamma dimension " +
                     std::to_string(dirac_model_internal_dim(p.d)));
  const auto blocks = dirac_model_blocks(p);
  TightBindingModel m;
  m.spec = spec;
  m.H = detail::assemble(spec, blocks.onsite, blocks.forward);
  m.family = "dirac";
  m.base = p;
  m.hopping_bound = detail::block_bound(blocks.onsite, blocks.forward);
  if (p.d % 2 == 1) m.syms.s = model_gamma_set(p.d).gamma(p.d + 2);
  return m;
}

// Odd time reversal of the d=3 model: gamma^(2) K.
inline LocalAntiUnitary dirac_time_reversal_3d() { return {model_gamma_set(3).gamma(2), -1}; }

// Even particle-hole map of the d=2 model: sigma_1 K.
inline LocalAntiUnitary dirac_particle_hole_2d() { return {pauli::s1(), +1}; }

inline cmat bloch_hamiltonian(const DiracModelParams& p, std::span<const double> k) {
  detail::check_params(p);
  if (static_cast<int>(k.size()) != p.d) throw ShapeError("momentum has wrong dimension");
  const GammaSet gs = model_gamma_set(p.d);
  double mass = p.m0;
  cmat H = cmat::Zero(gs.dim, gs.dim);
  for (int j = 0; j < p.d; ++j) {
    H += p.t_s[j] * std::sin(k[j]) * gs.gammas[j];
    mass += p.t_c[j] * std::cos(k[j]);
  }
  H += mass * gs.gamma(p.d + 1);
  return H;
}

// Components of the vector E(k) with H(k) = gamma . E(k).
inline std::vector<double> bloch_vector(const DiracModelParams& p, std::span<const double> k) {
  detail::check_params(p);
  std::vector<double> e(static_cast<std::size_t>(p.d + 1));
  double mass = p.m0;
  for (int j = 0; j < p.d; ++j) {
    e[j] = p.t_s[j] * std::sin(k[j]);
    mass += p.t_c[j] * std::cos(k[j]);
  }
  e[p.d] = mass;
  return e;
}

enum class TrsParity { odd, even };

namespace detail {
inline cmat default_trs_coupling(Eigen::Index base_dim, TrsParity parity) {
  const cmat id = cmat::Identity(base_dim / 2, base_dim / 2);
  return parity == TrsParity::odd ? kron(pauli::s2(), id) : kron(pauli::s1(), id);
}
}  // namespace detail

/// Two copies H and conj(H) coupled onsite by lambda*X, with time reversal exchanging the copies.
/// Odd parity uses (i sigma_y (x) I)K and needs X^T = -X; even parity uses (sigma_x (x) I)K and needs X^T = X.
inline TightBindingModel build_doubled_trs_model(const DiracModelParams& p, double lambda, const LatticeSpec& spec,
                                                 TrsParity parity = TrsParity::odd,
                                                 std::optional<cmat> coupling = std::nullopt) {
  detail::check_params(p);
  if (p.d % 2 != 0) throw DimensionError("doubled time-reversal model needs even dimension");
  const Eigen::Index Mb = dirac_model_internal_dim(p.d);
  if (spec.internal_dim != 2 * Mb) throw ShapeError("doubled model needs twice the base internal dimension");
  const cmat X = coupling.value_or(detail::default_trs_coupling(Mb, parity));
  if (X.rows() != Mb || X.cols() != Mb) throw ShapeError("coupling must act on one copy");
  const double sym_res = parity == TrsParity::odd ? max_abs(X.transpose() + X) : max_abs(X.transpose() - X);
  if (sym_res > 1e-12) throw SymmetryViolation("coupling breaks the requested time reversal");

  const auto b = dirac_model_blocks(p);
  auto doubled = [&](const cmat& h, const cmat& off) {
    cmat out = cmat::Zero(2 * Mb, 2 * Mb);
    out.topLeftCorner(Mb, Mb) = h;
    out.bottomRightCorner(Mb, Mb) = h.conjugate();
    out.topRightCorner(Mb, Mb) = off;
    out.bottomLeftCorner(Mb, Mb) = off.adjoint();
    return out;
  };
  const cmat zero = cmat::Zero(Mb, Mb);
  const cmat onsite = doubled(b.onsite, lambda * X);
  std::vector<cmat> fwd;
  for (const auto& f : b.forward) fwd.push_back(doubled(f, zero));

  TightBindingModel m;
  m.spec = spec;
  m.spec.validate();
  m.H = detail::assemble(m.spec, onsite, fwd);
  m.family = parity == TrsParity::odd ? "doubled-trs-odd" : "doubled-trs-even";
  m.base = p;
  m.hopping_bound = detail::block_bound(onsite, fwd);
  const cmat idb = cmat::Identity(Mb, Mb);
  cmat isy(2, 2);
  isy << 0, 1, -1, 0;
  m.syms.theta = parity == TrsParity::odd ? LocalAntiUnitary{kron(isy, idb), -1}
                                          : LocalAntiUnitary{kron(pauli::s1(), idb), +1};
  const double res = max_abs(lift_local(m.syms.theta->u, spec.n_sites()) * m.H.conjugate() *
                                 lift_local(m.syms.theta->u, spec.n_sites()).adjoint() -
                             m.H);
  if (res > 1e-12) throw SymmetryViolation("doubled model is not time-reversal symmetric");
  return m;
}

/// Two copies of the d=2 model coupled onsite by lambda*Y, with the odd particle-hole map
/// (i sigma_y (x) sigma_1)K. Requires Y = sigma_1 Y^T sigma_1.
inline TightBindingModel build_doubled_phs_model(const DiracModelParams& p, double lambda, const LatticeSpec& spec,
                                                 std::optional<cmat> coupling = std::nullopt) {
  detail::check_params(p);
  if (p.d != 2) throw DimensionError("odd particle-hole doubling is provided for d=2");
  const Eigen::Index Mb = 2;
  if (spec.internal_dim != 2 * Mb) throw ShapeError("doubled model needs twice the base internal dimension");
  const cmat ub = dirac_particle_hole_2d().u;
  const cmat Y = coupling.value_or(pauli::s1());
  if (max_abs(ub * Y.transpose() * ub.adjoint() - Y) > 1e-12)
    throw SymmetryViolation("coupling breaks the odd particle-hole map");
  const auto b = dirac_model_blocks(p);
  auto doubled = [&](const cmat& h, const cmat& off) {
    cmat out = cmat::Zero(2 * Mb, 2 * Mb);
    out.topLeftCorner(Mb, Mb) = h;
    out.bottomRightCorner(Mb, Mb) = h;
    out.topRightCorner(Mb, Mb) = off;
    out.bottomLeftCorner(Mb, Mb) = off.adjoint();
    return out;
  };
  const cmat onsite = doubled(b.onsite, lambda * Y);
  std::vector<cmat> fwd;
  for (const auto& f : b.forward) fwd.push_back(doubled(f, cmat::Zero(Mb, Mb)));

  TightBindingModel m;
  m.spec = spec;
  m.spec.validate();
  m.H = detail::assemble(m.spec, onsite, fwd);
  m.family = "doubled-phs-odd";
  m.base = p;
  m.hopping_bound = detail::block_bound(onsite, fwd);
  cmat isy(2, 2);
  isy << 0, 1, -1, 0;
  m.syms.xi = LocalAntiUnitary{kron(isy, ub), -1};
  const cmat U = lift_local(m.syms.xi->u, spec.n_sites());
  if (max_abs(U * m.H.conjugate() * U.adjoint() + m.H) > 1e-12)
    throw SymmetryViolation("doubled model is not particle-hole symmetric");
  return m;
}

struct SymmetryReport {
  std::optional<double> trs_residual;
  std::optional<double> phs_residual;
  std::optional<double> chiral_residual;
  std::optional<int> trs_parity;
  std::optional<int> phs_parity;
  double hermiticity = 0.0;
  bool parity_mismatch = false;
  double tol = 1e-10;

  bool pass() const {
    auto ok = [&](const std::optional<double>& r) { return !r || *r < tol; };
    return !parity_mismatch && hermiticity < tol && ok(trs_residual) && ok(phs_residual) && ok(chiral_residual);
  }
};

inline SymmetryReport check_symmetry(const cmat& H, Eigen::Index n_sites, const SymmetrySet& syms, double tol = 1e-10) {
  SymmetryReport r;
  r.tol = tol;
  r.hermiticity = hermiticity_residual(H);
  const Eigen::Index M = H.rows() / n_sites;
  auto check_local = [&](const cmat& u) {
    if (u.rows() != M || u.cols() != M) throw ShapeError("symmetry operator does not match internal dimension");
  };
  if (syms.theta) {
    check_local(syms.theta->u);
    const cmat U = lift_local(syms.theta->u, n_sites);
    r.trs_residual = max_abs(U * H.conjugate() * U.adjoint() - H);
    r.trs_parity = syms.theta->evaluated_parity();
    r.parity_mismatch |= *r.trs_parity != syms.theta->parity;
  }
  if (syms.xi) {
    check_local(syms.xi->u);
    const cmat U = lift_local(syms.xi->u, n_sites);
    r.phs_residual = max_abs(U * H.conjugate() * U.adjoint() + H);
    r.phs_parity = syms.xi->evaluated_parity();
    r.parity_mismatch |= *r.phs_parity != syms.xi->parity;
  }
  if (syms.s) {
    check_local(*syms.s);
    // S is site-local, so S H S is a blockwise product
    cmat SHS = H;
    for (Eigen::Index a = 0; a < n_sites; ++a)
      for (Eigen::Index b = 0; b < n_sites; ++b)
        SHS.block(a * M, b * M, M, M) = (*syms.s) * H.block(a * M, b * M, M, M) * (*syms.s);
    r.chiral_residual = max_abs(SHS + H);
  }
  return r;
}

inline SymmetryReport check_symmetry(const TightBindingModel& m, const SymmetrySet& syms, double tol = 1e-10) {
  return check_symmetry(m.H, m.spec.n_sites(), syms, tol);
}

enum class DisorderKind { onsite_scalar, onsite_matrix };

namespace detail {
inline cmat project_local_block(cmat v, const SymmetrySet& preserve) {
  for (int it = 0; it < 200; ++it) {
    if (preserve.theta) v = 0.5 * (v + preserve.theta->local().conjugate(v));
    if (preserve.xi) v = 0.5 * (v - preserve.xi->local().conjugate(v));
    if (preserve.s) v = 0.5 * (v - (*preserve.s) * v * (*preserve.s));
    double res = 0.0;
    if (preserve.theta) res = std::max(res, max_abs(preserve.theta->local().conjugate(v) - v));
    if (preserve.xi) res = std::max(res, max_abs(preserve.xi->local().conjugate(v) + v));
    if (preserve.s) res = std::max(res, max_abs((*preserve.s) * v * (*preserve.s) + v));
    if (res < 1e-14) break;
  }
  return 0.5 * (v + v.adjoint());
}
}  // namespace detail

/// Block-diagonal random potential, i.i.d. per site, uniform in [-W/2, W/2] per real degree of freedom,
/// projected onto the blocks compatible with `preserve`.
inline cmat disorder_potential(const LatticeSpec& spec, DisorderKind kind, double W, std::uint64_t seed,
                               const SymmetrySet& preserve) {
  if (W < 0.0) throw ConfigError("disorder strength must be non-negative");
  const Eigen::Index M = spec.internal_dim;
  cmat V = cmat::Zero(spec.dim(), spec.dim());
  if (W == 0.0) return V;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-0.5 * W, 0.5 * W);
  for (Eigen::Index s = 0; s < spec.n_sites(); ++s) {
    cmat v = cmat::Zero(M, M);
    if (kind == DisorderKind::onsite_scalar) {
      v = box(rng) * cmat::Identity(M, M);
    } else {
      for (Eigen::Index i = 0; i < M; ++i) {
        v(i, i) = box(rng);
        for (Eigen::Index j = i + 1; j < M; ++j) {
          const double re = box(rng);
          const double im = box(rng);
          v(i, j) = cplx(re, im);
          v(j, i) = cplx(re, -im);
        }
      }
    }
    V.block(s * M, s * M, M, M) = detail::project_local_block(v, preserve);
  }
  return V;
}

inline TightBindingModel apply_disorder(const TightBindingModel& model, DisorderKind kind, double W,
                                        std::uint64_t seed, const SymmetrySet& preserve) {
  if (W < 0.0) throw ConfigError("disorder strength must be non-negative");
  if (W == 0.0) return model;
  if (preserve.empty() && !model.syms.empty())
    throw ConfigError("disorder on a symmetric model needs an explicit set of preserved symmetries");
  TightBindingModel out = model;
  out.H += disorder_potential(model.spec, kind, W, seed, preserve);
  out.syms = preserve;
  out.disorder_W = W;
  out.disorder_seed = seed;
  const auto rep = check_symmetry(out, preserve);
  if (!rep.pass()) throw SymmetryViolation("disordered model failed its symmetry check");
  return out;
}

enum class IndexGroup { none, Z, Z2, twoZ };

inline std::string_view to_string(IndexGroup g) {
  switch (g) {
    case IndexGroup::Z: return "Z";
    case IndexGroup::Z2: return "Z2";
    case IndexGroup::twoZ: return "2Z";
    default: return "-";
  }
}

struct CAZClass {
  std::string_view name;
  int trs = 0;
  int phs = 0;
  int chs = 0;
  std::array<IndexGroup, 8> groups{};  // d = 1..8
};

inline const std::array<CAZClass, 10>& caz_table() {
  using enum IndexGroup;
  static const std::array<CAZClass, 10> table{{
      {"A", 0, 0, 0, {none, Z, none, Z, none, Z, none, Z}},
      {"AIII", 0, 0, 1, {Z, none, Z, none, Z, none, Z, none}},
      {"AI", 1, 0, 0, {none, none, none, twoZ, none, Z2, Z2, Z}},
      {"BDI", 1, 1, 1, {Z, none, none, none, twoZ, none, Z2, Z2}},
      {"D", 0, 1, 0, {Z2, Z, none, none, none, twoZ, none, Z2}},
      {"DIII", -1, 1, 1, {Z2, Z2, Z, none, none, none, twoZ, none}},
      {"AII", -1, 0, 0, {none, Z2, Z2, Z, none, none, none, twoZ}},
      {"CII", -1, -1, 1, {twoZ, none, Z2, Z2, Z, none, none, none}},
      {"C", 0, -1, 0, {none, twoZ, none, Z2, Z2, Z, none, none}},
      {"CI", 1, -1, 1, {none, none, twoZ, none, Z2, Z2, Z, none}},
  }};
  return table;
}

inline const CAZClass& classify(int trs, int phs, int chs) {
  for (const auto& c : caz_table())
    if (c.trs == trs && c.phs == phs && c.chs == chs) return c;
  throw ClassificationError("symmetry triple (" + std::to_string(trs) + "," + std::to_string(phs) + "," +
                            std::to_string(chs) + ") is not a CAZ class");
}

inline const CAZClass& caz_class(std::string_view name) {
  for (const auto& c : caz_table())
    if (c.name == name) return c;
  throw ClassificationError("unknown CAZ class " + std::string(name));
}

// Parities are evaluated from the matrices, not read from the declarations.
inline const CAZClass& classify(const SymmetrySet& syms) {
  const int trs = syms.theta ? syms.theta->evaluated_parity() : 0;
  const int phs = syms.xi ? syms.xi->evaluated_parity() : 0;
  const int chs = syms.s ? 1 : 0;
  return classify(trs, phs, chs);
}

inline IndexGroup expected_index_group(const CAZClass& c, int d) {
  if (d < 1) throw std::domain_error("dimension must be positive");
  return c.groups[static_cast<std::size_t>((d - 1) % 8)];
}

}  // namespace nci
