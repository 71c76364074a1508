#include "nci/lattice.hpp"

#include <gtest/gtest.h>

using namespace nci;

TEST(Lattice, CoordsRoundTripLastAxisFastest) {
  const auto spec = LatticeSpec{3, {3, 4, 5}, Boundary::periodic, 2};
  EXPECT_EQ(spec.n_sites(), 60);
  EXPECT_EQ(spec.dim(), 120);
  EXPECT_EQ(spec.coords(1), (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(spec.coords(5), (std::vector<int>{0, 1, 0}));
  for (Eigen::Index s = 0; s < spec.n_sites(); ++s) EXPECT_EQ(spec.site_index(spec.coords(s)), s);
}

TEST(Lattice, NeighborsRespectBoundary) {
  const auto per = LatticeSpec::cube(2, 4, Boundary::periodic, 1);
  const auto opn = LatticeSpec::cube(2, 4, Boundary::open, 1);
  const std::vector<int> edge{3, 1};
  const auto s = per.site_index(edge);
  EXPECT_EQ(*per.forward_neighbor(s, 0), per.site_index(std::vector<int>{0, 1}));
  EXPECT_FALSE(opn.forward_neighbor(s, 0).has_value());
  EXPECT_EQ(*opn.forward_neighbor(s, 1), opn.site_index(std::vector<int>{3, 2}));
}

TEST(Lattice, ValidationErrors) {
  EXPECT_THROW((LatticeSpec{5, {2, 2, 2, 2, 2}, Boundary::open, 1}.validate()), GeometryError);
  EXPECT_THROW((LatticeSpec{2, {2}, Boundary::open, 1}.validate()), GeometryError);
  EXPECT_THROW((LatticeSpec{1, {1}, Boundary::open, 1}.validate()), GeometryError);
  const auto spec = LatticeSpec::cube(2, 8, Boundary::periodic, 1);
  EXPECT_THROW((KinkPoint{{3.0, 3.5}}.validate(spec)), GeometryError);
  EXPECT_THROW((KinkPoint{{3.5}}.validate(spec)), ShapeError);
}

TEST(Lattice, MinimumImageDisplacement) {
  const auto spec = LatticeSpec::cube(1, 10, Boundary::periodic, 1);
  const KinkPoint k{{0.5}};
  const std::vector<int> x{9};
  EXPECT_DOUBLE_EQ(displacement(spec, x, k, ImageRule::direct)[0], 8.5);
  EXPECT_DOUBLE_EQ(displacement(spec, x, k, ImageRule::minimum_image)[0], -1.5);
  // centred kink: both rules agree
  const auto c = default_kink(spec);
  for (int xi = 0; xi < 10; ++xi) {
    const std::vector<int> p{xi};
    EXPECT_DOUBLE_EQ(displacement(spec, p, c, ImageRule::direct)[0],
                     displacement(spec, p, c, ImageRule::minimum_image)[0]);
  }
}

class DiracByDim : public ::testing::TestWithParam<int> {};

TEST_P(DiracByDim, SquaresToIdentityAndIsHermitian) {
  const int d = GetParam();
  const int L = d == 3 ? 4 : 6;
  for (auto b : {Boundary::periodic, Boundary::open}) {
    const auto spec = LatticeSpec::cube(d, L, b, 2);
    const auto op = dirac_operator(spec, default_kink(spec));
    const cmat id = cmat::Identity(op.dim(), op.dim());
    EXPECT_LT(max_abs(op.D * op.D - id), 1e-13);
    EXPECT_LT(hermiticity_residual(op.D), 1e-15);
    const cmat E = dirac_projection(op);
    EXPECT_LT(max_abs(E * E - E), 1e-13);
  }
}

INSTANTIATE_TEST_SUITE_P(D, DiracByDim, ::testing::Values(1, 2, 3));

TEST(Dirac, EvenDimensionGradingAndUnitaryBlock) {
  for (int d : {2, 4}) {
    const auto spec = LatticeSpec::cube(d, d == 2 ? 6 : 3, Boundary::periodic, 1);
    const auto op = dirac_operator(spec, KinkPoint{std::vector<double>(d, d == 2 ? 2.5 : 1.5)});
    const cmat G = grading_operator(op);
    EXPECT_LT(max_abs(G * op.D + op.D * G), 1e-14);
    const cmat Dodd = dirac_offdiagonal_block(op);
    EXPECT_EQ(Dodd.rows(), op.dim() / 2);
    EXPECT_LT(max_abs(Dodd * Dodd.adjoint() - cmat::Identity(Dodd.rows(), Dodd.rows())), 1e-13);
  }
}

TEST(Dirac, OneDimensionalIsSignFunction) {
  const auto spec = LatticeSpec::cube(1, 8, Boundary::open, 1);
  const auto op = dirac_operator(spec, KinkPoint{{3.5}});
  for (int x = 0; x < 8; ++x) EXPECT_DOUBLE_EQ(op.D(x, x).real(), x > 3.5 ? 1.0 : -1.0);
}

TEST(Dirac, RejectsMismatchedGammasAndOutsideKink) {
  const auto spec = LatticeSpec::cube(2, 6, Boundary::periodic, 1);
  EXPECT_THROW(dirac_operator(spec, build_gamma_set(2), default_kink(spec), ImageRule::direct), ShapeError);
  EXPECT_THROW(dirac_operator(spec, build_gamma_set(1), KinkPoint{{7.5, 2.5}}, ImageRule::minimum_image),
               GeometryError);
  EXPECT_NO_THROW(dirac_operator(spec, build_gamma_set(1), KinkPoint{{7.5, 2.5}}, ImageRule::direct));
}

TEST(Dirac, UnmaterializedKeepsComponents) {
  const auto spec = LatticeSpec::cube(2, 6, Boundary::periodic, 1);
  const auto full = dirac_operator(spec, build_gamma_set(1), default_kink(spec), ImageRule::minimum_image, true);
  const auto lite = dirac_operator(spec, build_gamma_set(1), default_kink(spec), ImageRule::minimum_image, false);
  EXPECT_EQ(lite.D.size(), 0);
  EXPECT_EQ((full.unit_components[0] - lite.unit_components[0]).norm(), 0.0);
  for (Eigen::Index i = 0; i < full.space_dim; ++i) {
    const double n2 = std::pow(full.unit_components[0](i), 2) + std::pow(full.unit_components[1](i), 2);
    EXPECT_NEAR(n2, 1.0, 1e-14);
  }
}

TEST(Cutoffs, BallCountsAndStepTrace) {
  const auto spec = LatticeSpec::cube(2, 8, Boundary::periodic, 1);
  const auto k = default_kink(spec);
  // |x - a| <= 2 with a = (3.5, 3.5): offsets (+-0.5, +-0.5), (+-1.5, +-0.5), (+-0.5, +-1.5)
  EXPECT_EQ(support(ball_cutoff(spec, k, 2.0, ImageRule::minimum_image)).size(), 12u);
  EXPECT_EQ(support(ball_cutoff(spec, k, 1.0, ImageRule::minimum_image)).size(), 4u);
  EXPECT_THROW(ball_cutoff(spec, k, 0.0, ImageRule::direct), std::domain_error);

  const auto spec2 = LatticeSpec::cube(2, 8, Boundary::open, 4);
  const rvec t = step_function(spec2, default_kink(spec2), 1, 2);
  EXPECT_EQ(t.size(), 2 * spec2.dim());
  EXPECT_DOUBLE_EQ(t.sum(), 4.0 * 2.0 * 8.0 * 4.0);
  EXPECT_THROW(step_function(spec2, default_kink(spec2), 3), ShapeError);
}
