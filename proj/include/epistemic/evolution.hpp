#pragma once

// Evolution rules as per-exact-state image relations, future alternatives,
// complete sets, probabilities as relative volumes and seeded frequency trials.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "epistemic/error.hpp"
#include "epistemic/exact.hpp"
#include "epistemic/rng.hpp"
#include "epistemic/statespace.hpp"

namespace epistemic {

enum class KnowabilityLevel : int { unknowable = 1, contingent = 2, decided = 3 };

inline KnowabilityLevel knowability_from_int(int level) {
  if (level < 1 || level > 3) throw SchemaError("knowability level must be 1, 2 or 3");
  return static_cast<KnowabilityLevel>(level);
}

inline int to_int(KnowabilityLevel l) { return static_cast<int>(l); }

class EvolutionRule {
 public:
  EvolutionRule(RegistryPtr registry, std::map<std::uint64_t, std::vector<std::uint64_t>> image_of)
      : registry_(std::move(registry)), image_of_(std::move(image_of)) {
    for (auto& [from, to] : image_of_) {
      if (from >= registry_->state_count()) throw Error("evolution rule references an unknown exact state");
      if (to.empty()) throw Error("evolution rule maps an exact state to nothing");
      for (auto c : to)
        if (c >= registry_->state_count()) throw Error("evolution rule references an unknown exact state");
    }
  }

  // Rule from a permutation of state codes: code c goes to perm[c].
  static EvolutionRule permutation(RegistryPtr registry, const std::vector<std::uint64_t>& perm) {
    std::map<std::uint64_t, std::vector<std::uint64_t>> m;
    for (std::uint64_t c = 0; c < perm.size(); ++c) m[c] = {perm[c]};
    return {std::move(registry), std::move(m)};
  }

  const RegistryPtr& registry() const { return registry_; }
  const std::map<std::uint64_t, std::vector<std::uint64_t>>& image_of() const { return image_of_; }

  // u(S) = union of member images.
  EpistemicState apply(const EpistemicState& s) const {
    if (s.registry() != registry_) throw Error("state and rule belong to different registries");
    std::vector<std::uint64_t> out;
    for (auto c : s.codes()) {
      auto it = image_of_.find(c);
      if (it == image_of_.end()) throw Error("evolution rule undefined on exact state " + std::to_string(c));
      out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return {registry_, std::move(out)};
  }

 private:
  RegistryPtr registry_;
  std::map<std::uint64_t, std::vector<std::uint64_t>> image_of_;
};

// Evolves a physical state and checks the contracts on it and on the
// tracked pairs.
inline EpistemicState evolve(const EpistemicState& s, const EvolutionRule& rule,
                             const std::vector<std::pair<EpistemicState, EpistemicState>>& tracked = {}) {
  auto next = rule.apply(s);
  if (!s.disjoint_from(next)) throw Error("state overlaps its own future");
  for (const auto& [a, b] : tracked) {
    const bool before = !a.disjoint_from(b);
    const bool after = !rule.apply(a).disjoint_from(rule.apply(b));
    if (before != after) throw Error("evolution not subjectively invertible");
  }
  return next;
}

struct FutureAlternative {
  EpistemicState region;
  std::string property;
  std::size_t value = 0;
  KnowabilityLevel level = KnowabilityLevel::decided;
};

struct CompleteAlternativeSet {
  EpistemicState parent;
  std::vector<FutureAlternative> alternatives;
  std::size_t size() const { return alternatives.size(); }
};

// Alternatives are parent ∩ preimage(j). Values whose region is empty are
// not alternatives and are dropped.
inline CompleteAlternativeSet make_alternatives(const EpistemicState& parent, const PropertySpec& p,
                                                const std::map<std::size_t, EpistemicState>& future_preimages,
                                                const std::map<std::size_t, KnowabilityLevel>& levels) {
  CompleteAlternativeSet set{parent, {}};
  for (const auto& [j, pre] : future_preimages) {
    if (j >= p.value_count()) throw Error("property '" + p.id() + "' has no value index " + std::to_string(j));
    auto region = set_intersection(parent, pre);
    if (region.empty()) continue;
    auto lv = levels.find(j);
    set.alternatives.push_back({std::move(region), p.id(), j, lv == levels.end() ? KnowabilityLevel::decided : lv->second});
  }
  const auto& alts = set.alternatives;
  for (std::size_t i = 0; i < alts.size(); ++i)
    for (std::size_t k = i + 1; k < alts.size(); ++k)
      if (!alts[i].region.disjoint_from(alts[k].region)) throw Error("alternatives not mutually exclusive");
  std::size_t covered = 0;
  for (const auto& a : alts) covered += a.region.size();
  if (covered != parent.size()) throw Error("alternative set incomplete");
  if (alts.size() < 2) throw Error("no genuine alternatives");
  return set;
}

// Alternatives from the property's own valuation of the parent's members.
inline CompleteAlternativeSet make_alternatives(const EpistemicState& parent, const PropertySpec& p,
                                                KnowabilityLevel level = KnowabilityLevel::decided) {
  std::map<std::size_t, EpistemicState> pre;
  std::map<std::size_t, KnowabilityLevel> lv;
  for (std::size_t j = 0; j < p.value_count(); ++j) {
    pre.emplace(j, p.value_space(parent, j));
    lv.emplace(j, level);
  }
  return make_alternatives(parent, p, pre, lv);
}

inline Rational probability(const FutureAlternative& alt, const EpistemicState& parent) {
  if (alt.level != KnowabilityLevel::decided) throw Error("probability undefined at this knowability level");
  return relative_volume(alt.region, parent);
}

inline std::vector<Rational> probabilities(const CompleteAlternativeSet& set) {
  std::vector<Rational> out;
  for (const auto& a : set.alternatives) out.push_back(probability(a, set.parent));
  return out;
}

struct InvarianceReport {
  // ratios[step][alternative], step 0 is the initial set
  std::vector<std::vector<Rational>> ratios;
  Rational max_deviation{0};
};

inline InvarianceReport check_invariance(const EpistemicState& parent, const CompleteAlternativeSet& set,
                                         const EvolutionRule& rule, int steps) {
  if (steps < 1) throw Error("invariance check needs at least one step");
  InvarianceReport report;
  EpistemicState whole = parent;
  std::vector<EpistemicState> regions;
  std::vector<Rational> initial;
  for (const auto& a : set.alternatives) {
    regions.push_back(a.region);
    initial.push_back(relative_volume(a.region, whole));
  }
  report.ratios.push_back(initial);
  for (int s = 0; s < steps; ++s) {
    whole = evolve(whole, rule);
    std::vector<Rational> row;
    for (auto& r : regions) {
      r = rule.apply(r);
      row.push_back(relative_volume(r, whole));
      Rational d = row.back() - initial[row.size() - 1];
      if (d < 0) d = -d;
      if (d > report.max_deviation) report.max_deviation = d;
    }
    report.ratios.push_back(std::move(row));
  }
  if (report.max_deviation != 0) throw Error("evolution rule breaks volume invariance");
  return report;
}

struct BorelResult {
  std::vector<double> probabilities;
  std::vector<std::uint64_t> counts;
  std::vector<double> frequencies;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;

  double band(std::size_t j) const {
    const double q = probabilities[j];
    return 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(n));
  }
  bool within_band(std::size_t j) const { return std::abs(frequencies[j] - probabilities[j]) <= band(j); }
  bool all_within_band() const {
    for (std::size_t j = 0; j < probabilities.size(); ++j)
      if (!within_band(j)) return false;
    return true;
  }
};

inline constexpr std::uint64_t kTrialChunk = 1 << 14;

// Draws n outcomes. Draw i uses stream (seed, i / kTrialChunk); chunks are
// independent and are merged in index order.
inline BorelResult borel_trial(const std::vector<double>& probs, std::uint64_t n, std::uint64_t seed) {
  if (probs.empty()) throw Error("distribution is empty");
  if (n == 0) throw Error("number of trials must be positive");
  double sum = 0;
  for (double q : probs) {
    if (!(q >= 0.0)) throw Error("probabilities must be nonnegative");
    sum += q;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error("probabilities do not sum to 1");
  std::vector<double> cum(probs.size());
  double acc = 0;
  std::size_t last_nonzero = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    cum[j] = acc;
    if (probs[j] > 0) last_nonzero = j;
  }
  BorelResult r{probs, std::vector<std::uint64_t>(probs.size(), 0), {}, n, seed};
  const std::uint64_t chunks = (n + kTrialChunk - 1) / kTrialChunk;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    Stream rng(seed, c);
    const std::uint64_t begin = c * kTrialChunk;
    const std::uint64_t end = std::min(n, begin + kTrialChunk);
    for (std::uint64_t i = begin; i < end; ++i) {
      const double u = rng.uniform();
      std::size_t j = 0;
      while (j < last_nonzero && !(u < cum[j] && probs[j] > 0)) ++j;
      ++r.counts[j];
    }
  }
  for (auto k : r.counts) r.frequencies.push_back(static_cast<double>(k) / static_cast<double>(n));
  return r;
}

// CSV: label,probability,frequency,band,within_band,n,seed
inline std::string frequency_csv(const std::vector<std::string>& labels, const BorelResult& r) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "label,probability,frequency,band,within_band,n,seed\n";
  for (std::size_t j = 0; j < r.probabilities.size(); ++j)
    os << (j < labels.size() ? labels[j] : std::to_string(j)) << ',' << r.probabilities[j] << ','
       << r.frequencies[j] << ',' << r.band(j) << ',' << (r.within_band(j) ? "true" : "false") << ',' << r.n << ','
       << r.seed << '\n';
  return os.str();
}

}  // namespace epistemic
