#include "nci/kinvariants.hpp"
#include "nci/models.hpp"

#include <gtest/gtest.h>

using namespace nci;

namespace {

BlochFamily family(const DiracModelParams& p) {
  return [p](std::span<const double> k) { return bloch_hamiltonian(p, k); };
}
VectorField field(const DiracModelParams& p) {
  return [p](std::span<const double> k) { return bloch_vector(p, k); };
}

}  // namespace

TEST(Sphere, Areas) {
  EXPECT_NEAR(sphere_area(1), 2.0 * pi, 1e-15);
  EXPECT_NEAR(sphere_area(2), 4.0 * pi, 1e-14);
  EXPECT_NEAR(sphere_area(3), 2.0 * pi * pi, 1e-14);
  EXPECT_NEAR(sphere_area(4), 8.0 * pi * pi / 3.0, 1e-13);
  // 2 pi^((m+1)/2) / Gamma((m+1)/2)
  for (int m = 1; m <= 9; ++m)
    EXPECT_NEAR(sphere_area(m), 2.0 * std::pow(pi, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1)), 1e-12) << m;
  EXPECT_THROW(sphere_area(0), std::domain_error);
}

TEST(Grid, Validation) {
  EXPECT_THROW((BZGrid{2, 4}.validate()), std::domain_error);
  EXPECT_THROW((BZGrid{5, 16}.validate()), std::domain_error);
  EXPECT_EQ((BZGrid{3, 10}.size()), 1000);
}

TEST(Winding, ConstantFieldIsZero) {
  const VectorField e1 = [](std::span<const double> k) {
    std::vector<double> v(k.size() + 1, 0.0);
    v[0] = 1.0;
    return v;
  };
  for (int d = 1; d <= 3; ++d) EXPECT_NEAR(winding_unitvector(e1, BZGrid{d, 8}), 0.0, 1e-12);
}

TEST(Winding, OneDimensionalIntegers) {
  EXPECT_NEAR(std::abs(winding_unitvector(field(DiracModelParams::uniform(1, 0.0)), BZGrid{1, 256})), 1.0, 1e-8);
  EXPECT_NEAR(winding_unitvector(field(DiracModelParams::uniform(1, 2.5)), BZGrid{1, 256}), 0.0, 1e-8);
  EXPECT_NEAR(winding_unitvector(field(DiracModelParams::uniform(1, -2.5)), BZGrid{1, 256}), 0.0, 1e-8);
}

TEST(Chern, LinksAgreeWithProjectorQuadratureAndDegree) {
  for (double m0 : {-1.0, 1.0, 3.0, -3.0}) {
    const auto p = DiracModelParams::uniform(2, m0);
    const double links = chern_links(family(p), BZGrid{2, 64});
    const cplx quad = chern_projector_quadrature(family(p), BZGrid{2, 32});
    const double nu = winding_unitvector(field(p), BZGrid{2, 64});
    EXPECT_NEAR(links, std::round(links), 1e-10) << m0;
    EXPECT_NEAR(quad.real(), links, 1e-3) << m0;
    EXPECT_NEAR(quad.imag(), 0.0, 1e-8) << m0;
    EXPECT_NEAR(links, nu, 1e-3) << m0;
    EXPECT_EQ(std::lround(std::abs(links)), std::abs(m0) < 2.0 ? 1 : 0) << m0;
  }
}

TEST(Chern, RejectsGapClosure) {
  EXPECT_THROW(chern_links(family(DiracModelParams::uniform(2, 2.0)), BZGrid{2, 16}), GapClosed);
}

TEST(Chern, FourDimensionalQuadratureMatchesDegree) {
  const auto p = DiracModelParams::uniform(4, -3.0);
  const double nu = winding_unitvector(field(p), BZGrid{4, 12});
  const cplx c = chern_momentum(family(p), BZGrid{4, 12});
  EXPECT_NEAR(std::abs(nu), 1.0, 2e-2);
  EXPECT_NEAR(c.real(), nu, 2e-2);
}

// The chiral formula and the unit-vector degree differ by a sign in both d=1 and d=3.
TEST(ChiralWinding, RelationToDegree) {
  const auto p1 = DiracModelParams::uniform(1, 0.0);
  const cmat S1 = model_gamma_set(1).gamma(3);
  const cplx w1 = chiral_winding_momentum(family(p1), S1, BZGrid{1, 512});
  const double nu1 = winding_unitvector(field(p1), BZGrid{1, 512});
  EXPECT_NEAR(w1.real(), -nu1, 1e-6);
  EXPECT_NEAR(w1.imag(), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(w1.real()), 1.0, 1e-6);

  const auto p3 = DiracModelParams::uniform(3, 2.0);
  const cmat S3 = model_gamma_set(3).gamma(5);
  const cplx w3 = chiral_winding_momentum(family(p3), S3, BZGrid{3, 16});
  const double nu3 = winding_unitvector(field(p3), BZGrid{3, 24});
  EXPECT_NEAR(std::abs(nu3), 1.0, 1e-3);
  EXPECT_NEAR(w3.real(), -nu3, 1e-2);

  EXPECT_NEAR(std::abs(chiral_winding_momentum(family(DiracModelParams::uniform(1, 2.5)), S1, BZGrid{1, 512})), 0.0,
              1e-8);
  EXPECT_THROW(chiral_winding_momentum(family(p1), S1, BZGrid{2, 16}), std::domain_error);
}

TEST(RealSpace, FullTraceVanishesOnFiniteLattice) {
  const auto p = DiracModelParams::uniform(2, 1.0);
  const auto spec = LatticeSpec::cube(2, 10, Boundary::open, 2);
  const auto m = build_dirac_lattice_model(p, spec);
  const auto fp = fermi_projection(m.H, 0.0);
  const auto k = default_kink(spec);
  const std::vector<rvec> steps{step_function(spec, k, 1), step_function(spec, k, 2)};
  EXPECT_LT(std::abs(chern_realspace_step(fp.P, steps)), 1e-10);
}

TEST(RealSpace, StepChernWithCutoffMatchesMomentum) {
  for (double m0 : {-1.0, 1.0}) {
    const auto p = DiracModelParams::uniform(2, m0);
    const auto spec = LatticeSpec::cube(2, 16, Boundary::open, 2);
    const auto m = build_dirac_lattice_model(p, spec);
    const auto fp = fermi_projection(m.H, 0.0);
    const auto k = default_kink(spec);
    const std::vector<rvec> steps{step_function(spec, k, 1), step_function(spec, k, 2)};
    const cplx c = chern_realspace_step(fp.P, steps, ball_cutoff(spec, k, 4.0, ImageRule::direct));
    const double ref = chern_links(family(p), BZGrid{2, 64});
    EXPECT_NEAR(c.real(), ref, 0.05) << m0;
    EXPECT_NEAR(c.imag(), 0.0, 1e-8) << m0;
  }
}

TEST(RealSpace, ChiralStepWithCutoff) {
  const auto p = DiracModelParams::uniform(1, 0.0);
  // periodic: the open chain carries end modes at zero energy
  const auto spec = LatticeSpec::cube(1, 40, Boundary::periodic, 2);
  const auto m = build_dirac_lattice_model(p, spec);
  const auto fp = fermi_projection(m.H, 0.0);
  const auto k = default_kink(spec);
  const cmat S = lift_local(*m.syms.s, spec.n_sites());
  const cplx w = chiral_realspace_step(fp.P, S, flat_band_unitary(fp), {step_function(spec, k, 1)},
                                       ball_cutoff(spec, k, 8.0, ImageRule::minimum_image));
  const cplx ref = chiral_winding_momentum(family(p), model_gamma_set(1).gamma(3), BZGrid{1, 256});
  const double nu = winding_unitvector(field(p), BZGrid{1, 256});
  EXPECT_NEAR(w.real(), nu, 0.05);
  EXPECT_NEAR(w.imag(), 0.0, 1e-8);
  // the momentum chiral formula carries the opposite sign
  EXPECT_NEAR(w.real(), -ref.real(), 0.05);
}
