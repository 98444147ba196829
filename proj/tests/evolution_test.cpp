#include <gtest/gtest.h>

#include <numeric>

#include "epistemic/evolution.hpp"

using namespace epistemic;

namespace {

RegistryPtr bits(int n) {
  std::vector<AttributeDef> attrs;
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    attrs.push_back({"b" + std::to_string(i), AttributeKind::binary, {"0", "1"}});
    names.push_back(attrs.back().id);
  }
  return make_registry(attrs, {{"o", names}});
}

PropertySpec low_bit(const RegistryPtr&) {
  return PropertySpec("low", {0.0, 1.0}, [](const ExactState& z) -> std::optional<std::size_t> { return z.values[0]; });
}

std::vector<std::uint64_t> cyclic(std::uint64_t n, std::uint64_t shift) {
  std::vector<std::uint64_t> p(n);
  for (std::uint64_t c = 0; c < n; ++c) p[c] = (c + shift) % n;
  return p;
}

}  // namespace

TEST(Evolve, CyclicShiftImage) {
  auto r = bits(2);
  auto rule = EvolutionRule::permutation(r, cyclic(4, 2));
  EXPECT_EQ(evolve(EpistemicState(r, {0, 1}), rule), EpistemicState(r, {2, 3}));
}

TEST(Evolve, LinearOverUnions) {
  auto r = bits(3);
  auto rule = EvolutionRule::permutation(r, cyclic(8, 3));
  EpistemicState a(r, {0, 1}), b(r, {5});
  EXPECT_EQ(rule.apply(set_union(a, b)), set_union(rule.apply(a), rule.apply(b)));
}

TEST(Evolve, IdentityOverlapsFuture) {
  auto r = bits(2);
  auto rule = EvolutionRule::permutation(r, cyclic(4, 0));
  try {
    evolve(EpistemicState::physical(r, {0, 1}), rule);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "state overlaps its own future");
  }
}

TEST(Evolve, OverlapPreservationTracked) {
  auto r = bits(3);
  // 0,1 -> 4 ; 2 -> 5 ; 3 -> 6 : disjoint {0} and {1} acquire overlapping images
  EvolutionRule rule(r, {{0, {4}}, {1, {4}}, {2, {5}}, {3, {6}}});
  EpistemicState s(r, {0, 1, 2, 3});
  std::vector<std::pair<EpistemicState, EpistemicState>> tracked{{EpistemicState(r, {0}), EpistemicState(r, {1})}};
  try {
    evolve(s, rule, tracked);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "evolution not subjectively invertible");
  }
}

TEST(Alternatives, BinarySplit) {
  auto r = bits(3);
  auto u = EpistemicState::universe(r);
  auto set = make_alternatives(u, low_bit(r));
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.alternatives[0].region.size(), 4u);
}

TEST(Alternatives, Incomplete) {
  auto r = bits(3);
  auto u = EpistemicState::universe(r);
  auto p = PropertySpec("x", {0.0, 1.0}, nullptr);
  std::map<std::size_t, EpistemicState> pre{{0, EpistemicState(r, {0, 1, 2})}, {1, EpistemicState(r, {3, 4, 5})}};
  try {
    make_alternatives(u, p, pre, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "alternative set incomplete");
  }
}

TEST(Alternatives, Overlapping) {
  auto r = bits(2);
  auto u = EpistemicState::universe(r);
  auto p = PropertySpec("x", {0.0, 1.0}, nullptr);
  std::map<std::size_t, EpistemicState> pre{{0, EpistemicState(r, {0, 1, 2})}, {1, EpistemicState(r, {2, 3})}};
  EXPECT_THROW(make_alternatives(u, p, pre, {}), Error);
}

TEST(Alternatives, SingleIsNotGenuine) {
  auto r = bits(2);
  auto u = EpistemicState::universe(r);
  auto p = PropertySpec("x", {0.0, 1.0}, nullptr);
  std::map<std::size_t, EpistemicState> pre{{0, u}, {1, EpistemicState(r, {})}};
  try {
    make_alternatives(u, p, pre, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no genuine alternatives");
  }
}

TEST(Alternatives, TrashBinCompletion) {
  auto r = make_registry({{"species", AttributeKind::ordered, {"golden", "white-tailed", "buzzard", "kite"}},
                          {"height", AttributeKind::ordered, {"low", "high"}}},
                         {{"raptor", {"species", "height"}}});
  PropertySpec p("kind", {1.0, 2.0, 3.0}, [](const ExactState& z) -> std::optional<std::size_t> {
    return z.values[0] < 2 ? z.values[0] : 2;
  });
  auto set = make_alternatives(EpistemicState::universe(r), p);
  EXPECT_EQ(set.size(), 3u);
  auto q = probabilities(set);
  EXPECT_EQ(q[2], Rational(1, 2));
}

TEST(Probability, CountRatio) {
  auto r = bits(3);
  auto set = make_alternatives(EpistemicState::universe(r), low_bit(r));
  EXPECT_EQ(probability(set.alternatives[0], set.parent), Rational(1, 2));
}

TEST(Probability, ThreeFiveSplit) {
  auto r = bits(3);
  auto u = EpistemicState::universe(r);
  PropertySpec p("x", {0.0, 1.0}, [&](const ExactState& z) -> std::optional<std::size_t> {
    return r->encode(z) < 3 ? 0 : 1;
  });
  auto q = probabilities(make_alternatives(u, p));
  EXPECT_EQ(q[0], Rational(3, 8));
  EXPECT_EQ(q[1], Rational(5, 8));
  EXPECT_EQ(q[0] + q[1], Rational(1));
}

TEST(Probability, UndefinedBelowLevelThree) {
  auto r = bits(3);
  auto set = make_alternatives(EpistemicState::universe(r), low_bit(r), KnowabilityLevel::unknowable);
  try {
    probability(set.alternatives[0], set.parent);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "probability undefined at this knowability level");
  }
}

TEST(Invariance, PermutationPreservesRatios) {
  auto r = bits(4);
  auto rule = EvolutionRule::permutation(r, cyclic(16, 8));
  std::vector<std::uint64_t> codes{0, 1, 2, 3, 4, 5, 6, 7};
  EpistemicState parent(r, codes);
  auto set = make_alternatives(parent, low_bit(r));
  auto rep = check_invariance(parent, set, rule, 2);
  EXPECT_EQ(rep.max_deviation, Rational(0));
  EXPECT_EQ(rep.ratios[2][0], Rational(1, 2));
}

TEST(Invariance, CollisionBreaksInvariance) {
  auto r = bits(3);
  EvolutionRule rule(r, {{0, {4}}, {1, {4}}, {2, {6}}, {3, {7}}});
  EpistemicState parent(r, {0, 1, 2, 3});
  auto p = PropertySpec("x", {0.0, 1.0}, nullptr);
  std::map<std::size_t, EpistemicState> pre{{0, EpistemicState(r, {0, 1})}, {1, EpistemicState(r, {2, 3})}};
  auto set = make_alternatives(parent, p, pre, {});
  try {
    check_invariance(parent, set, rule, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "evolution rule breaks volume invariance");
  }
}

TEST(Borel, Degenerate) {
  auto r = borel_trial({1.0, 0.0}, 100, 3);
  EXPECT_EQ(r.frequencies[0], 1.0);
  EXPECT_EQ(r.frequencies[1], 0.0);
}

TEST(Borel, FairCoinWithinBand) {
  auto r = borel_trial({0.5, 0.5}, 100000, 42);
  const double band = 3.0 * std::sqrt(0.25 / 1e5);
  EXPECT_NEAR(r.frequencies[0], 0.5, band);
  EXPECT_NEAR(r.frequencies[1], 0.5, band);
}

TEST(Borel, UnbalancedWithinBand) {
  auto r = borel_trial({0.375, 0.625}, 100000, 9);
  EXPECT_TRUE(r.all_within_band());
}

TEST(Borel, Deterministic) {
  auto a = borel_trial({0.2, 0.3, 0.5}, 50000, 77);
  auto b = borel_trial({0.2, 0.3, 0.5}, 50000, 77);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(Borel, RejectsUnnormalized) { EXPECT_THROW(borel_trial({0.5, 0.4}, 10, 1), Error); }

TEST(Borel, CsvRows) {
  auto r = borel_trial({1.0, 0.0}, 10, 5);
  EXPECT_EQ(frequency_csv({"a", "b"}, r), "label,probability,frequency,band,within_band,n,seed\na,1,1,0,true,10,5\nb,0,0,0,true,10,5\n");
}

TEST(Property, RandomEvolutionInvariantsHold) {
  auto r = bits(4);
  for (std::uint64_t t = 0; t < 100; ++t) {
    Stream rng(1234, t);
    std::vector<std::uint64_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto rule = EvolutionRule::permutation(r, perm);
    std::vector<std::uint64_t> a, b;
    for (std::uint64_t c = 0; c < 16; ++c) {
      if (rng.below(2)) a.push_back(c);
      if (rng.below(2)) b.push_back(c);
    }
    EpistemicState sa(r, a), sb(r, b);
    EXPECT_EQ(rule.apply(set_union(sa, sb)), set_union(rule.apply(sa), rule.apply(sb)));
  }
}
