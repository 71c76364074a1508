#pragma once

#include "nci/clifford.hpp"

#include <optional>

namespace nci {

enum class Boundary { periodic, open };
enum class ImageRule { direct, minimum_image };

struct GeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LatticeSpec {
  int d = 1;
  std::vector<int> lengths;
  Boundary boundary = Boundary::periodic;
  Eigen::Index internal_dim = 1;

  static LatticeSpec cube(int d, int L, Boundary b, Eigen::Index m) {
    return LatticeSpec{d, std::vector<int>(static_cast<std::size_t>(d), L), b, m};
  }

  void validate() const {
    if (d < 1 || d > 4) throw GeometryError("lattice dimension must be in 1..4");
    if (static_cast<int>(lengths.size()) != d) throw GeometryError("lengths do not match dimension");
    for (int L : lengths)
      if (L < 2) throw GeometryError("every lattice length must be at least 2");
    if (internal_dim < 1) throw GeometryError("internal dimension must be positive");
  }

  Eigen::Index n_sites() const {
    Eigen::Index n = 1;
    for (int L : lengths) n *= L;
    return n;
  }
  Eigen::Index dim() const { return n_sites() * internal_dim; }
  int min_length() const { return *std::min_element(lengths.begin(), lengths.end()); }

  // Last axis runs fastest.
  std::vector<int> coords(Eigen::Index site) const {
    std::vector<int> x(static_cast<std::size_t>(d));
    for (int j = d - 1; j >= 0; --j) {
      x[j] = static_cast<int>(site % lengths[j]);
      site /= lengths[j];
    }
    return x;
  }

  Eigen::Index site_index(std::span<const int> x) const {
    Eigen::Index s = 0;
    for (int j = 0; j < d; ++j) s = s * lengths[j] + x[j];
    return s;
  }

  // Site reached by one step along +axis; empty when it leaves an open lattice.
  std::optional<Eigen::Index> forward_neighbor(Eigen::Index site, int axis) const {
    auto x = coords(site);
    x[axis] += 1;
    if (x[axis] >= lengths[axis]) {
      if (boundary == Boundary::open) return std::nullopt;
      x[axis] -= lengths[axis];
    }
    return site_index(x);
  }
};

struct KinkPoint {
  std::vector<double> a;

  void validate(const LatticeSpec& spec) const {
    if (static_cast<int>(a.size()) != spec.d) throw ShapeError("kink dimension does not match lattice");
    for (double c : a) {
      const double frac = std::abs(c - std::round(c));
      if (frac < 1e-12) throw GeometryError("kink point lies on a lattice site coordinate");
    }
  }
};

inline KinkPoint default_kink(const LatticeSpec& spec) {
  KinkPoint k;
  for (int L : spec.lengths) k.a.push_back(0.5 * L - 0.5);
  return k;
}

inline ImageRule default_image_rule(const LatticeSpec& spec) {
  return spec.boundary == Boundary::periodic ? ImageRule::minimum_image : ImageRule::direct;
}

inline std::vector<double> displacement(const LatticeSpec& spec, std::span<const int> x, const KinkPoint& k,
                                        ImageRule rule) {
  std::vector<double> v(static_cast<std::size_t>(spec.d));
  for (int j = 0; j < spec.d; ++j) {
    double dx = x[j] - k.a[j];
    if (rule == ImageRule::minimum_image) {
      const double L = spec.lengths[j];
      dx -= L * std::floor(dx / L + 0.5);
    }
    v[j] = dx;
  }
  return v;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

// Generators used by the Dirac operator: the first d matrices of the set with 2^floor(d/2) rows.
inline GammaSet dirac_gamma_set(int d) {
  if (d == 1) return scalar_gamma_set();
  return build_gamma_set(d / 2);
}

struct DiracOperator {
  cmat D;
  KinkPoint kink;
  ImageRule rule = ImageRule::direct;
  GammaSet gammas;
  Eigen::Index gamma_dim = 1;
  Eigen::Index space_dim = 0;       // site x orbital
  std::vector<rvec> unit_components;  // (x-a)_j/|x-a| per site x orbital index
  rvec distance;                     // |x-a| per site x orbital index

  Eigen::Index dim() const { return gamma_dim * space_dim; }
};

// With materialize=false only the per-site components are filled; D stays empty.
inline DiracOperator dirac_operator(const LatticeSpec& spec, const GammaSet& gs, const KinkPoint& k,
                                    ImageRule rule, bool materialize = true) {
  spec.validate();
  k.validate(spec);
  const int d = spec.d;
  if (gs.count() < d || (d % 2 == 0 && gs.count() != d + 1) || (d % 2 == 1 && gs.count() != d))
    throw ShapeError("gamma set does not match lattice dimension " + std::to_string(d));
  if (rule == ImageRule::minimum_image) {
    for (int j = 0; j < d; ++j)
      if (k.a[j] < 0.0 || k.a[j] >= spec.lengths[j])
        throw GeometryError("minimum-image kink must lie in the fundamental domain");
  }

  DiracOperator op;
  op.kink = k;
  op.rule = rule;
  op.gammas = gs;
  op.gamma_dim = gs.dim;
  op.space_dim = spec.dim();
  const Eigen::Index M = spec.internal_dim;
  op.unit_components.assign(static_cast<std::size_t>(d), rvec(op.space_dim));
  op.distance.resize(op.space_dim);
  for (Eigen::Index s = 0; s < spec.n_sites(); ++s) {
    const auto x = spec.coords(s);
    const auto v = displacement(spec, x, k, rule);
    const double r = norm(v);
    for (int j = 0; j < d; ++j) op.unit_components[j].segment(s * M, M).setConstant(v[j] / r);
    op.distance.segment(s * M, M).setConstant(r);
  }
  if (!materialize) return op;
  op.D = cmat::Zero(op.dim(), op.dim());
  for (int j = 0; j < d; ++j) {
    const cmat& g = gs.gammas[j];
    for (Eigen::Index b = 0; b < gs.dim; ++b)
      for (Eigen::Index c = 0; c < gs.dim; ++c) {
        if (g(b, c) == 0.0) continue;
        op.D.block(b * op.space_dim, c * op.space_dim, op.space_dim, op.space_dim).diagonal() +=
            g(b, c) * op.unit_components[j].cast<cplx>();
      }
  }
  return op;
}

inline DiracOperator dirac_operator(const LatticeSpec& spec, const KinkPoint& k) {
  return dirac_operator(spec, dirac_gamma_set(spec.d), k, default_image_rule(spec));
}

// Lift a site x orbital operator to gamma x site x orbital as I_gamma (x) X.
inline cmat lift_to_gamma(const cmat& x, Eigen::Index gamma_dim) { return kron_identity_left(gamma_dim, x); }

// gamma^(2n+1) (x) I for even d.
inline cmat grading_operator(const DiracOperator& op) {
  if (op.gammas.count() % 2 == 0 || op.gammas.count() < 3)
    throw ShapeError("grading operator exists only for even dimension");
  return kron(op.gammas.last(), cmat::Identity(op.space_dim, op.space_dim));
}

// Block of D mapping the -1 eigenspace of the grading into the +1 eigenspace.
inline cmat dirac_offdiagonal_block(const DiracOperator& op) {
  const cmat& g = op.gammas.last();
  std::vector<Eigen::Index> plus, minus;
  for (Eigen::Index b = 0; b < op.gamma_dim; ++b)
    for (Eigen::Index i = 0; i < op.space_dim; ++i)
      (g(b, b).real() > 0 ? plus : minus).push_back(b * op.space_dim + i);
  return take(op.D, plus, minus);
}

inline rvec step_function(const LatticeSpec& spec, const KinkPoint& k, int axis_one_based,
                          Eigen::Index gamma_dim = 1) {
  if (axis_one_based < 1 || axis_one_based > spec.d) throw ShapeError("step axis out of range");
  const int j = axis_one_based - 1;
  const Eigen::Index M = spec.internal_dim;
  rvec site_part(spec.dim());
  for (Eigen::Index s = 0; s < spec.n_sites(); ++s) {
    const auto x = spec.coords(s);
    site_part.segment(s * M, M).setConstant(x[j] >= k.a[j] ? 1.0 : 0.0);
  }
  return site_part.replicate(gamma_dim, 1);
}

inline rvec ball_cutoff(const LatticeSpec& spec, const KinkPoint& k, double R, ImageRule rule,
                        Eigen::Index gamma_dim = 1) {
  if (!(R > 0.0)) throw std::domain_error("ball radius must be positive");
  const Eigen::Index M = spec.internal_dim;
  rvec site_part(spec.dim());
  for (Eigen::Index s = 0; s < spec.n_sites(); ++s) {
    const auto x = spec.coords(s);
    site_part.segment(s * M, M).setConstant(norm(displacement(spec, x, k, rule)) <= R ? 1.0 : 0.0);
  }
  return site_part.replicate(gamma_dim, 1);
}

inline std::vector<Eigen::Index> support(const rvec& indicator) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < indicator.size(); ++i)
    if (indicator(i) != 0.0) idx.push_back(i);
  return idx;
}

inline cmat dirac_projection(const cmat& D) {
  return 0.5 * (cmat::Identity(D.rows(), D.cols()) + D);
}

inline cmat dirac_projection(const DiracOperator& op) { return dirac_projection(op.D); }

}  // namespace nci
