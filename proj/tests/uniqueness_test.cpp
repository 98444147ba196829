#include <gtest/gtest.h>

#include "epistemic/uniqueness.hpp"

using namespace epistemic;

namespace {

constexpr auto L1 = KnowabilityLevel::unknowable;
constexpr auto L3 = KnowabilityLevel::decided;

DofReport run(const CandidateMap& f, std::size_t m, std::size_t mp, bool padded = false) {
  return evaluate_candidate(f, m, mp, padded, 30, 7);
}

}  // namespace

TEST(Dual, ProductRule) {
  auto x = Dual::variable(3.0, 0, 2);
  auto y = Dual::variable(2.0, 1, 2);
  auto z = x * x * y - y;
  EXPECT_DOUBLE_EQ(z.v, 16.0);
  EXPECT_DOUBLE_EQ(z.d[0], 12.0);
  EXPECT_DOUBLE_EQ(z.d[1], 8.0);
}

TEST(Candidate, Names) {
  EXPECT_EQ(CandidateMap::modulus_power(1).name(), "|a|^2");
  EXPECT_EQ(CandidateMap::real_square().name(), "real-square");
  EXPECT_THROW(CandidateMap::modulus_power(0), Error);
}

TEST(Constraints, TwoByTwoCounts) {
  auto s = build_constraints(2, 2, L1, CandidateMap::modulus_power(1));
  EXPECT_EQ(s.variables, 12);
  EXPECT_EQ(s.equations.size(), 4u);
  EXPECT_EQ(s.required_total(), 3);
}

TEST(Constraints, ClassicalClosureIsDependent) {
  auto s = build_constraints(2, 2, L3, CandidateMap::modulus_power(1));
  EXPECT_TRUE(s.equations.back().dependent);
  Stream rng(3, 0);
  // Any point satisfying the normalisation rows satisfies the classical closure.
  std::vector<double> x(12);
  for (auto& v : x) v = rng.uniform(-1, 1);
  auto unit = [&](std::size_t i0, std::size_t n) {
    double s2 = 0;
    for (std::size_t i = i0; i < i0 + n; ++i) s2 += x[i] * x[i];
    for (std::size_t i = i0; i < i0 + n; ++i) x[i] /= std::sqrt(s2);
  };
  unit(0, 4);
  unit(4, 4);
  unit(8, 4);
  for (double r : evaluate(s, x)) EXPECT_NEAR(r, 0.0, 1e-14);
}

TEST(Constraints, IndependenceRowsForBorn) {
  auto s = property_independence_conditions(build_constraints(2, 2, L1, CandidateMap::modulus_power(1)));
  int nontrivial = 0;
  for (const auto& e : s.equations) nontrivial += !e.trivial && !e.dependent;
  EXPECT_EQ(nontrivial, 5);  // 3 normalisations + Re/Im of the cross term
}

TEST(Constraints, FourthPowerHasTenConditions) {
  auto s = property_independence_conditions(build_constraints(2, 2, L1, CandidateMap::modulus_power(2)));
  int nontrivial = 0;
  for (const auto& e : s.equations) nontrivial += !e.trivial && !e.dependent;
  EXPECT_EQ(nontrivial, 10);
}

TEST(Constraints, PropertyIndependenceNeedsUnknowable) {
  EXPECT_THROW(property_independence_conditions(build_constraints(2, 2, L3, CandidateMap::modulus_power(1))), Error);
}

TEST(Dof, BornTwoByTwo) {
  auto r = run(CandidateMap::modulus_power(1), 2, 2);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.dof.p, 3);
  EXPECT_EQ(r.dof.pp, 4);
  EXPECT_EQ(r.dof_pp_seen.size(), 1u);
  EXPECT_TRUE(r.pass);
}

TEST(Dof, FourthPowerInfeasible) {
  auto r = run(CandidateMap::modulus_power(2), 2, 2);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.pass);
}

TEST(Dof, RealSquareTooFewParameters) {
  auto r = run(CandidateMap::real_square(), 2, 2);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.dof.p, 1);
  EXPECT_EQ(r.dof.pp, 1);
  EXPECT_EQ(r.dof.total, 2);
  EXPECT_FALSE(r.pass);
}

TEST(Dof, RealIdentityCannotDistinguishLevels) {
  auto r = run(CandidateMap::real_identity(), 2, 2);
  EXPECT_FALSE(r.levels_distinguished);
  EXPECT_FALSE(r.pass);
}

TEST(Dof, BornTwoByThree) {
  auto r = run(CandidateMap::modulus_power(1), 2, 3);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.dof.pp, 8);
}

TEST(Dof, ThreeByTwoNeedsPadding) {
  EXPECT_FALSE(run(CandidateMap::modulus_power(1), 3, 2).feasible);
  auto padded = run(CandidateMap::modulus_power(1), 3, 2, true);
  EXPECT_TRUE(padded.padded);
  EXPECT_EQ(padded.columns, 3u);
  EXPECT_TRUE(padded.pass);
}

TEST(Dof, FourByTwoPadded) {
  EXPECT_FALSE(run(CandidateMap::modulus_power(1), 4, 2).pass);
  EXPECT_TRUE(run(CandidateMap::modulus_power(1), 4, 2, true).pass);
}

TEST(Multiplicativity, ModulusPowers) {
  for (int g = 1; g <= 3; ++g) EXPECT_LE(verify_multiplicativity(CandidateMap::modulus_power(g)).max_deviation, 1e-12);
}

TEST(Multiplicativity, Witness) {
  auto r = verify_multiplicativity(CandidateMap::polynomial({{0, 0, 0, 0, 1}, {0}, {1}}));
  EXPECT_GE(r.max_deviation, 12.0 - 1e-12);
}

TEST(Polynomial, RecognisesModulusPower) {
  EXPECT_EQ(as_modulus_power(CandidateMap::polynomial({{0, 0, 1}, {0}, {1}})), 1);
  EXPECT_EQ(as_modulus_power(CandidateMap::polynomial({{0, 0, 0, 0, 1}, {0}, {0, 0, 2}, {0}, {1}})), 2);
  EXPECT_FALSE(as_modulus_power(CandidateMap::polynomial({{0, 0, 0, 0, 1}, {0}, {1}})));
}

TEST(Polynomial, ReplicatedClosureMatchesExplicitRoute) {
  auto g = CandidateMap::polynomial({{0, 0, 1}, {0}, {1}});
  auto r = run(g, 2, 2);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.dof.pp, 4);
}

TEST(Report, OnlyBornSurvives) {
  auto rep = uniqueness_report({{2, 2}, {3, 2}}, default_candidates(), 20, 3);
  EXPECT_TRUE(rep.passes_everywhere.at("|a|^2"));
  EXPECT_FALSE(rep.passes_everywhere.at("|a|^4"));
  EXPECT_FALSE(rep.passes_everywhere.at("real-square"));
  EXPECT_TRUE(rep.born_only);
}
