#include <gtest/gtest.h>

#include <numbers>

#include "epistemic/hilbert.hpp"
#include "epistemic/statespace.hpp"
#include "oracles.hpp"

using namespace epistemic;
using oracle::h;
using oracle::layer;

namespace {

constexpr auto L1 = KnowabilityLevel::unknowable;
constexpr auto L3 = KnowabilityLevel::decided;

ContextNetwork decided_pair(AmplitudeMatrix a) {
  ContextNetwork n;
  n.layers = {layer("P", L3, {1, -1}), layer("Q", L3, {1, -1})};
  n.initial = {h(), h()};
  n.transitions = {std::move(a)};
  return n;
}

JointVolumeTable table(std::vector<std::vector<double>> v) { return JointVolumeTable{std::move(v), std::nullopt, PairClass::unspecified}; }

// 2x2 oracle: [diag(1,-1), R diag(1,-1) R^T] with R the 45-degree rotation
// equals [[0, 2], [-2, 0]], whose operator norm is 2.
constexpr double kRotatedCommutatorNorm = 2.0;

}  // namespace

TEST(Space, TypeAFromAmplitudeRows) {
  auto space = build_space(oracle::interferometer(L1));
  EXPECT_EQ(space.type, ContextType::unknowable_then_decided);
  EXPECT_EQ(space.dimension, 2);
  const auto& p = space.bases[0];
  const auto& q = space.bases[1];
  // <P_j, Q_k> reproduces a_jk
  EXPECT_NEAR(std::abs(inner(p.subspaces[0].col(0), q.subspaces[0].col(0)) - std::sqrt(0.5)), 0.0, 1e-15);
  EXPECT_NEAR(std::real(inner(p.subspaces[1].col(0), q.subspaces[1].col(0))), -std::sqrt(0.5), 1e-15);
  EXPECT_LE(unitarity_defect(space.changes[0].matrix), 1e-12);
}

TEST(Space, TypeAMoreFinalValues) {
  ContextNetwork n;
  n.layers = {layer("p", L1, {1, 2}), layer("q", L3, {1, 2, 3})};
  n.initial = {h(), h()};
  const ExactComplex half(QSqrt2(Rational(1, 2)));
  n.transitions = {{{half, h(), half}, {half, -h(), half}}};
  auto space = build_space(n);
  EXPECT_EQ(space.dimension, 3);
  auto q = principle4_probabilities(space);
  auto prop = propagate(n);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(q[k], prop.distribution[k], 1e-12);
}

TEST(Space, TypeCFortyFiveDegrees) {
  auto n = decided_pair({{h(), h()}, {h(), -h()}});
  auto space = build_space(n, table({{0.25, 0.25}, {0.25, 0.25}}));
  EXPECT_EQ(space.type, ContextType::non_simultaneous);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k)
      EXPECT_NEAR(std::norm(inner(space.bases[0].subspaces[j].col(0), space.bases[1].subspaces[k].col(0))), 0.5, 1e-12);
  EXPECT_NEAR(basis_angle(space), std::numbers::pi / 4, 1e-12);
}

TEST(Space, TypeCCoincidingBases) {
  auto n = decided_pair({{ExactComplex(1), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1)}});
  auto space = build_space(n, table({{0.5, 0.0}, {0.0, 0.5}}));
  EXPECT_NEAR((space.bases[0].vectors() - space.bases[1].vectors()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(basis_angle(space), 0.0, 1e-12);
}

TEST(Space, TypeCNotNeutral) {
  auto n = decided_pair({{ExactComplex(1), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1)}});
  try {
    build_space(n, table({{0.25, 0.25}, {0.25, 0.25}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "context not neutral");
  }
}

TEST(Space, TypeCAsymmetricVolumes) {
  const double a = std::sqrt(0.6), b = std::sqrt(0.4);
  auto n = decided_pair({{Complex(a, 0), Complex(b, 0)}, {Complex(b, 0), Complex(a, 0)}});
  auto space = build_space(n, table({{0.3, 0.2}, {0.2, 0.3}}));
  EXPECT_LE(unitarity_defect(space.changes[0].matrix), 1e-12);
  n = decided_pair({{h(), h()}, {h(), -h()}});
  try {
    build_space(n, table({{0.1, 0.4}, {0.3, 0.2}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no orthonormal second basis exists");
  }
}

TEST(Space, TypeCUnequalCounts) {
  ContextNetwork n;
  n.layers = {layer("P", L3, {1, 2}), layer("Q", L3, {1, 2, 3})};
  n.initial = {h(), h()};
  n.transitions = {{{ExactComplex(1), ExactComplex(0), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1), ExactComplex(0)}}};
  try {
    build_space(n, table({{0.5, 0, 0}, {0, 0.5, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no reciprocal basis");
  }
}

TEST(Space, TypeCUnsupportedPairClass) {
  ContextNetwork n;
  n.layers = {layer("P", L3, {1, 2, 3}), layer("Q", L3, {1, 2, 3})};
  const ExactComplex half(QSqrt2(Rational(1, 2)));
  n.initial = {ExactComplex(1), ExactComplex(0), ExactComplex(0)};
  n.transitions = {{{half, half, h()}, {half, half, -h()}, {h(), -h(), ExactComplex(0)}}};
  const double s = 1.0 / 3.0;
  try {
    build_space(n, table({{s / 4, s / 4, s / 2}, {s / 4, s / 4, s / 2}, {s / 2, s / 2, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "unsupported pair class");
  }
}

TEST(Space, TypeBProductBasis) {
  ContextNetwork n;
  n.layers = {layer("P", L3, {1, 2}), layer("Q", L3, {1, 2, 3})};
  n.initial = {h(), h()};
  n.transitions = {{{ExactComplex(1), ExactComplex(0), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1), ExactComplex(0)}}};
  auto space = build_space(n, std::nullopt, true);
  EXPECT_EQ(space.dimension, 6);
  EXPECT_EQ(space.bases[0].subspace_dimensions(), (std::vector<Eigen::Index>{3, 3}));
  EXPECT_EQ(space.bases[1].subspace_dimensions(), (std::vector<Eigen::Index>{2, 2, 2}));
}

TEST(Space, InnerProductsMatchCountedRegions) {
  // Joint property space as a 4x4 grid; P splits columns, Q splits along a
  // boundary rotated by phi in {0, pi/2}.
  auto reg = make_registry({{"x", AttributeKind::ordered, {"0", "1", "2", "3"}}, {"y", AttributeKind::ordered, {"0", "1", "2", "3"}}},
                           {{"o", {"x", "y"}}});
  auto all = EpistemicState::universe(reg);
  auto p0 = EpistemicState::where(reg, [](const ExactState& z) { return z.values[0] < 2; });
  auto p1 = set_difference(all, p0);
  for (double phi : {0.0, std::numbers::pi / 2}) {
    auto q0 = EpistemicState::where(reg, [&](const ExactState& z) { return phi == 0.0 ? z.values[0] < 2 : z.values[1] < 2; });
    auto q1 = set_difference(all, q0);
    std::vector<EpistemicState> ps{p0, p1}, qs{q0, q1};
    std::vector<std::vector<double>> v(2, std::vector<double>(2));
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) v[j][k] = static_cast<double>(set_intersection(ps[j], qs[k]).size()) / 16.0;
    AmplitudeMatrix a(2);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) a[j].push_back(Complex(std::sqrt(2 * v[j][k]), 0));
    auto space = build_space(decided_pair(a), table(v));
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double counted = static_cast<double>(set_intersection(ps[j], qs[k]).size()) / static_cast<double>(ps[j].size());
        EXPECT_NEAR(std::norm(inner(space.bases[0].subspaces[j].col(0), space.bases[1].subspaces[k].col(0))), counted, 1e-12);
      }
    EXPECT_NEAR(basis_angle(space), state_space_angle_map(phi), 1e-12);
  }
}

TEST(AngleMap, Halves) {
  EXPECT_DOUBLE_EQ(state_space_angle_map(std::numbers::pi / 2), std::numbers::pi / 4);
  EXPECT_DOUBLE_EQ(state_space_angle_map(0), 0);
  EXPECT_DOUBLE_EQ(state_space_angle_map(std::numbers::pi / 3), std::numbers::pi / 6);
  EXPECT_THROW(state_space_angle_map(4.0), Error);
}

TEST(Principle4, TypeCMatchesPropagate) {
  auto n = decided_pair({{h(), h()}, {h(), -h()}});
  n.initial = {Complex(0.6, 0), Complex(0, 0.8)};
  auto space = build_space(n, table({{0.25, 0.25}, {0.25, 0.25}}));
  auto q = principle4_probabilities(space);
  auto r = propagate(n);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(q[k], r.distribution[k], 1e-12);
}

TEST(Reciprocal, Identity) {
  ContextNetwork n = oracle::interferometer(L1);
  n.transitions = {{{ExactComplex(1), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1)}}};
  auto r = reciprocal(n);
  EXPECT_EQ(*r.transitions[0][0][0].exact, ExactComplex(1));
  EXPECT_EQ(*r.transitions[0][0][1].exact, ExactComplex(0));
  EXPECT_EQ(*r.initial[0].exact, h());
}

TEST(Reciprocal, HadamardIsSelfInverse) {
  auto n = oracle::interferometer(L1);
  auto r = reciprocal(n);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) EXPECT_EQ(*r.transitions[0][j][k].exact, *n.transitions[0][j][k].exact);
  EXPECT_EQ(*r.initial[0].exact, ExactComplex(1));
  EXPECT_EQ(*r.initial[1].exact, ExactComplex(0));
  auto back = reciprocal(r);
  EXPECT_EQ(*back.initial[0].exact, h());
}

TEST(Reciprocal, Singular) {
  auto n = oracle::interferometer(L1);
  n.transitions = {{{h(), h()}, {h(), h()}}};
  try {
    reciprocal(n);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "reciprocal undefined");
  }
}

TEST(Reciprocal, NeedsEqualCounts) {
  ContextNetwork n;
  n.layers = {layer("p", L1, {1, 2}), layer("q", L3, {1, 2, 3})};
  n.initial = {h(), h()};
  n.transitions = {{{ExactComplex(1), ExactComplex(0), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1), ExactComplex(0)}}};
  try {
    reciprocal(n);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "reciprocal context exists if and only if M = M'");
  }
}

TEST(Reciprocal, RandomUnitaryRoundTrip) {
  for (std::uint64_t t = 0; t < 100; ++t) {
    Stream rng(314, t);
    auto u = oracle::random_unitary2(rng);
    auto n = oracle::interferometer(L1);
    n.initial = {Complex(0.6, 0), Complex(0, 0.8)};
    n.transitions = {{{u[0][0], u[0][1]}, {u[1][0], u[1][1]}}};
    auto r = reciprocal(n);
    auto back = reciprocal(r);
    const CMatrix a = detail::to_matrix(n.transitions[0]);
    const CMatrix ai = detail::to_matrix(r.transitions[0]);
    EXPECT_LE((ai * a - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    for (int j = 0; j < 2; ++j) {
      EXPECT_LE(std::abs(back.initial[j].value - n.initial[j].value), 1e-12);
      for (int k = 0; k < 2; ++k) EXPECT_LE(std::abs(back.transitions[0][j][k].value - n.transitions[0][j][k].value), 1e-12);
    }
  }
}

TEST(Operator, DiagonalInOwnBasis) {
  auto n = oracle::interferometer(L1);
  n.layers[1].labels = {1, -1};
  auto space = build_space(n);
  auto op = make_operator(space, "detector");
  EXPECT_NEAR(std::abs(op.matrix(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(op.matrix(1, 1) + 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(op.matrix(0, 1)), 0.0, 1e-15);
}

TEST(Operator, SpectralReconstruction) {
  auto space = build_space(oracle::interferometer(L1));
  auto op = make_operator(space, "path");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(op.matrix);
  CMatrix back = es.eigenvectors() * es.eigenvalues().cast<std::complex<double>>().asDiagonal() * es.eigenvectors().adjoint();
  EXPECT_LE((back - op.matrix).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Operator, ValueContractionGivesRankTwoProjector) {
  ContextNetwork n;
  n.layers = {layer("p", L1, {1, 2, 3}), layer("x", L3, {1, 2, 3})};
  n.initial = {ExactComplex(1), ExactComplex(0), ExactComplex(0)};
  n.transitions = {{{ExactComplex(1), ExactComplex(0), ExactComplex(0)},
                    {ExactComplex(0), ExactComplex(1), ExactComplex(0)},
                    {ExactComplex(0), ExactComplex(0), ExactComplex(1)}}};
  auto space = build_space(n);
  auto op = make_operator(space, "x", {{{1, 2}, 5.0}});
  ASSERT_EQ(op.eigenspaces.size(), 2u);
  EXPECT_EQ(op.eigenspaces[0].cols(), 2);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(op.matrix);
  EXPECT_NEAR(es.eigenvalues()(1), 5.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()(2), 5.0, 1e-12);
}

TEST(Operator, DistinctLabels) {
  auto n = oracle::interferometer(L1);
  n.layers[1].labels = {1, 2};
  auto space = build_space(n);
  EXPECT_THROW(make_operator(space, "detector", {{{0}, 2.0}}), Error);
}

TEST(Commutator, ProductBasisCommutes) {
  ContextNetwork n;
  n.layers = {layer("P", L3, {1, -1}), layer("Q", L3, {1, 0, -1})};
  n.initial = {h(), h()};
  n.transitions = {{{ExactComplex(1), ExactComplex(0), ExactComplex(0)}, {ExactComplex(0), ExactComplex(1), ExactComplex(0)}}};
  auto space = build_space(n, std::nullopt, true);
  auto c = commutator(make_operator(space, "P"), make_operator(space, "Q"));
  EXPECT_LT(c.norm, 1e-12);
  EXPECT_TRUE(c.commuting);
}

TEST(Commutator, RotatedBasesDoNotCommute) {
  auto space = build_space(decided_pair({{h(), h()}, {h(), -h()}}), table({{0.25, 0.25}, {0.25, 0.25}}));
  auto c = commutator(make_operator(space, "P"), make_operator(space, "Q"));
  EXPECT_NEAR(c.norm, kRotatedCommutatorNorm, 1e-12);
  EXPECT_FALSE(c.commuting);
}

TEST(Commutator, SelfCommutes) {
  auto space = build_space(oracle::interferometer(L1));
  auto a = make_operator(space, "path");
  EXPECT_LT(commutator(a, a).norm, 1e-12);
}

TEST(BackConstruction, DiagonalOperatorReproducesProperty) {
  auto n = oracle::interferometer(L1);
  auto space = build_space(n);
  CMatrix op = CMatrix::Zero(2, 2);
  op(0, 0) = 3.0;
  op(1, 1) = -2.0;
  auto r = operator_to_property(op, space, n);
  EXPECT_NEAR(r.volumes.v[0][0], 0.5, 1e-12);
  EXPECT_NEAR(r.volumes.v[1][1], 0.5, 1e-12);
  EXPECT_NEAR(r.volumes.v[0][1], 0.0, 1e-12);
  EXPECT_EQ(r.labels, (std::vector<double>{3.0, -2.0}));
  EXPECT_EQ(r.network.layers.size(), 3u);
}

TEST(BackConstruction, RotatedOperatorQuarterVolumes) {
  auto n = oracle::interferometer(L1);
  auto space = build_space(n);
  CMatrix op(2, 2);
  op << 0, 1, 1, 0;
  auto r = operator_to_property(op, space, n);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(r.volumes.v[j][k], 0.25, 1e-12);
  EXPECT_EQ(r.notes, std::vector<std::string>{"regions not uniquely determined"});
}

TEST(BackConstruction, DegenerateEigenvalues) {
  auto n = oracle::interferometer(L1);
  auto space = build_space(n);
  CMatrix op = CMatrix::Identity(2, 2);
  try {
    operator_to_property(op, space, n);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "cannot define distinct property values");
  }
}
