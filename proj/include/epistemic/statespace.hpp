#pragma once

// Finite epistemic state space: attributes, exact states, epistemic states as
// sets of exact states, the counting volume measure and property value spaces.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epistemic/error.hpp"
#include "epistemic/exact.hpp"

namespace epistemic {

enum class AttributeKind { ordered, directed, binary, circular };

inline std::string to_string(AttributeKind k) {
  switch (k) {
    case AttributeKind::ordered: return "ordered";
    case AttributeKind::directed: return "directed";
    case AttributeKind::binary: return "binary";
    case AttributeKind::circular: return "circular";
  }
  return "?";
}

inline AttributeKind parse_attribute_kind(const std::string& s) {
  if (s == "ordered") return AttributeKind::ordered;
  if (s == "directed") return AttributeKind::directed;
  if (s == "binary") return AttributeKind::binary;
  if (s == "circular") return AttributeKind::circular;
  throw SchemaError("unknown attribute kind '" + s + "'");
}

struct AttributeDef {
  std::string id;
  AttributeKind kind = AttributeKind::ordered;
  std::vector<std::string> values;

  void validate() const {
    if (id.empty()) throw Error("attribute id must not be empty");
    if (values.empty()) throw Error("attribute '" + id + "' has no values");
    std::set<std::string> seen(values.begin(), values.end());
    if (seen.size() != values.size()) throw Error("attribute '" + id + "' has duplicate values");
    if (kind == AttributeKind::binary && values.size() != 2)
      throw Error("binary attribute '" + id + "' must have exactly 2 values");
    if (kind == AttributeKind::circular && values.size() < 3)
      throw Error("circular attribute '" + id + "' needs at least 3 values");
  }

  // True if value `middle` lies between `outer1` and `outer2`. Defined for
  // three distinct values of ordered, directed and circular attributes; the
  // value list order is the geometric order for ordered/directed kinds.
  bool between(std::size_t outer1, std::size_t middle, std::size_t outer2) const {
    if (kind == AttributeKind::binary) throw Error("betweenness is undefined for binary attribute '" + id + "'");
    if (outer1 == middle || middle == outer2 || outer1 == outer2)
      throw Error("betweenness needs three different values");
    check_index(outer1);
    check_index(middle);
    check_index(outer2);
    if (kind == AttributeKind::circular) return true;
    return (outer1 < middle && middle < outer2) || (outer2 < middle && middle < outer1);
  }

  // True if `later` is a successor of `earlier`. Directed attributes only.
  bool succeeds(std::size_t earlier, std::size_t later) const {
    if (kind != AttributeKind::directed) throw Error("succession is only defined for directed attributes");
    if (earlier == later) throw Error("succession needs two different values");
    check_index(earlier);
    check_index(later);
    return earlier < later;
  }

  std::size_t index_of(const std::string& value) const {
    auto it = std::find(values.begin(), values.end(), value);
    if (it == values.end()) throw Error("attribute '" + id + "' has no value '" + value + "'");
    return static_cast<std::size_t>(it - values.begin());
  }

 private:
  void check_index(std::size_t i) const {
    if (i >= values.size()) throw Error("value index out of range for attribute '" + id + "'");
  }
};

struct ObjectDef {
  std::string id;
  std::vector<std::string> attributes;
};

// One complete value assignment: values[slot] indexes the attribute's value
// list, slots enumerated by ObjectRegistry.
struct ExactState {
  std::vector<std::uint32_t> values;
  friend bool operator==(const ExactState&, const ExactState&) = default;
};

class ObjectRegistry {
 public:
  struct Slot {
    std::size_t object;
    std::size_t attribute;
  };

  static constexpr std::uint64_t kMaxStates = std::uint64_t{1} << 32;

  ObjectRegistry(std::vector<AttributeDef> attributes, std::vector<ObjectDef> objects)
      : attributes_(std::move(attributes)), objects_(std::move(objects)) {
    std::set<std::string> attr_ids;
    for (const auto& a : attributes_) {
      a.validate();
      if (!attr_ids.insert(a.id).second) throw Error("duplicate attribute id '" + a.id + "'");
    }
    if (objects_.empty()) throw Error("registry has no objects");
    std::set<std::string> obj_ids;
    state_count_ = 1;
    for (std::size_t o = 0; o < objects_.size(); ++o) {
      if (!obj_ids.insert(objects_[o].id).second) throw Error("duplicate object id '" + objects_[o].id + "'");
      std::set<std::string> own;
      for (const auto& attr : objects_[o].attributes) {
        if (!own.insert(attr).second)
          throw Error("object '" + objects_[o].id + "' lists attribute '" + attr + "' twice");
        const std::size_t a = attribute_index(attr);
        slots_.push_back({o, a});
        const auto n = static_cast<std::uint64_t>(attributes_[a].values.size());
        if (state_count_ > kMaxStates / n) throw Error("registry too large to enumerate");
        state_count_ *= n;
      }
    }
    if (slots_.empty()) throw Error("registry has no (object, attribute) pairs");
  }

  const std::vector<AttributeDef>& attributes() const { return attributes_; }
  const std::vector<ObjectDef>& objects() const { return objects_; }
  const std::vector<Slot>& slots() const { return slots_; }
  std::uint64_t state_count() const { return state_count_; }

  std::size_t attribute_index(const std::string& id) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
      if (attributes_[i].id == id) return i;
    throw Error("unknown attribute '" + id + "'");
  }

  std::size_t object_index(const std::string& id) const {
    for (std::size_t i = 0; i < objects_.size(); ++i)
      if (objects_[i].id == id) return i;
    throw Error("unknown object '" + id + "'");
  }

  std::optional<std::size_t> find_slot(std::size_t object, std::size_t attribute) const {
    for (std::size_t s = 0; s < slots_.size(); ++s)
      if (slots_[s].object == object && slots_[s].attribute == attribute) return s;
    return std::nullopt;
  }

  std::size_t slot(const std::string& object, const std::string& attribute) const {
    auto s = find_slot(object_index(object), attribute_index(attribute));
    if (!s) throw Error("object '" + object + "' has no attribute '" + attribute + "'");
    return *s;
  }

  std::size_t value_count(std::size_t slot) const { return attributes_[slots_.at(slot).attribute].values.size(); }

  // Mixed-radix code, slot 0 least significant.
  std::uint64_t encode(const ExactState& z) const {
    if (z.values.size() != slots_.size()) throw Error("exact state is not total over the registry");
    std::uint64_t code = 0;
    for (std::size_t s = slots_.size(); s-- > 0;) {
      const auto n = value_count(s);
      if (z.values[s] >= n) throw Error("exact state assigns an illegal value");
      code = code * n + z.values[s];
    }
    return code;
  }

  ExactState decode(std::uint64_t code) const {
    if (code >= state_count_) throw Error("exact state code out of range");
    ExactState z;
    z.values.resize(slots_.size());
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      const auto n = value_count(s);
      z.values[s] = static_cast<std::uint32_t>(code % n);
      code /= n;
    }
    return z;
  }

 private:
  std::vector<AttributeDef> attributes_;
  std::vector<ObjectDef> objects_;
  std::vector<Slot> slots_;
  std::uint64_t state_count_ = 0;
};

using RegistryPtr = std::shared_ptr<const ObjectRegistry>;

inline RegistryPtr make_registry(std::vector<AttributeDef> attributes, std::vector<ObjectDef> objects) {
  return std::make_shared<const ObjectRegistry>(std::move(attributes), std::move(objects));
}

// A set of exact states over one registry. Intermediate results (differences,
// slices) may be empty; physical states are built with `physical`, which
// demands more than one member.
class EpistemicState {
 public:
  EpistemicState() = default;

  EpistemicState(RegistryPtr registry, std::vector<std::uint64_t> codes) : registry_(std::move(registry)) {
    if (!registry_) throw Error("state needs a registry");
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    if (!codes.empty() && codes.back() >= registry_->state_count()) throw Error("exact state code out of range");
    codes_ = std::move(codes);
  }

  static EpistemicState physical(RegistryPtr registry, std::vector<std::uint64_t> codes) {
    EpistemicState s(std::move(registry), std::move(codes));
    if (s.size() < 2) throw Error("a physical state always contains more than one exact state");
    return s;
  }

  static EpistemicState universe(RegistryPtr registry) {
    std::vector<std::uint64_t> codes(registry->state_count());
    for (std::uint64_t c = 0; c < codes.size(); ++c) codes[c] = c;
    return {std::move(registry), std::move(codes)};
  }

  template <class Pred>
  static EpistemicState where(RegistryPtr registry, Pred&& keep) {
    std::vector<std::uint64_t> codes;
    for (std::uint64_t c = 0; c < registry->state_count(); ++c)
      if (keep(registry->decode(c))) codes.push_back(c);
    return {std::move(registry), std::move(codes)};
  }

  const RegistryPtr& registry() const { return registry_; }
  const std::vector<std::uint64_t>& codes() const { return codes_; }
  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }
  bool contains(std::uint64_t code) const { return std::binary_search(codes_.begin(), codes_.end(), code); }

  bool subset_of(const EpistemicState& other) const {
    return std::includes(other.codes_.begin(), other.codes_.end(), codes_.begin(), codes_.end());
  }

  bool disjoint_from(const EpistemicState& other) const {
    auto a = codes_.begin();
    auto b = other.codes_.begin();
    while (a != codes_.end() && b != other.codes_.end()) {
      if (*a == *b) return false;
      if (*a < *b) ++a; else ++b;
    }
    return true;
  }

  std::vector<ExactState> members() const {
    std::vector<ExactState> out;
    out.reserve(codes_.size());
    for (auto c : codes_) out.push_back(registry_->decode(c));
    return out;
  }

  friend bool operator==(const EpistemicState& a, const EpistemicState& b) {
    return a.registry_ == b.registry_ && a.codes_ == b.codes_;
  }

 private:
  RegistryPtr registry_;
  std::vector<std::uint64_t> codes_;
};

namespace detail {

inline void require_same_registry(const EpistemicState& a, const EpistemicState& b) {
  if (a.registry() != b.registry()) throw Error("states belong to different registries");
}

template <class Op>
EpistemicState set_op(const EpistemicState& a, const EpistemicState& b, Op op) {
  require_same_registry(a, b);
  std::vector<std::uint64_t> out;
  op(a.codes().begin(), a.codes().end(), b.codes().begin(), b.codes().end(), std::back_inserter(out));
  return {a.registry(), std::move(out)};
}

}  // namespace detail

inline EpistemicState set_union(const EpistemicState& a, const EpistemicState& b) {
  return detail::set_op(a, b, [](auto... args) { return std::set_union(args...); });
}
inline EpistemicState set_intersection(const EpistemicState& a, const EpistemicState& b) {
  return detail::set_op(a, b, [](auto... args) { return std::set_intersection(args...); });
}
inline EpistemicState set_difference(const EpistemicState& a, const EpistemicState& b) {
  return detail::set_op(a, b, [](auto... args) { return std::set_difference(args...); });
}

// V[S]: number of exact states; V[Z] = 1.
inline std::uint64_t volume(const EpistemicState& s) {
  if (s.empty()) throw Error("void state has no volume meaning");
  return s.size();
}

// v[part, whole] = V[part] / V[whole], exact.
inline Rational relative_volume(const EpistemicState& part, const EpistemicState& whole) {
  detail::require_same_registry(part, whole);
  if (!part.subset_of(whole)) throw Error("part is not contained in whole");
  if (part.empty()) return Rational(0);
  return Rational(volume(part)) / Rational(volume(whole));
}

enum class Connective { AND, OR, NOT };

// Knowledge connectives in state space: AND intersects, OR unites, NOT removes.
inline EpistemicState combine(const EpistemicState& a, const EpistemicState& b, Connective c) {
  switch (c) {
    case Connective::AND: {
      auto r = set_intersection(a, b);
      if (r.empty()) throw Error("contradictory knowledge");
      return r;
    }
    case Connective::OR: return set_union(a, b);
    case Connective::NOT: return set_difference(a, b);
  }
  throw Error("unknown connective");
}

// The collective state is what no subject can exclude: the intersection.
inline EpistemicState collective_state(std::span<const EpistemicState> subject_states) {
  if (subject_states.empty()) throw Error("collective state needs at least one subject");
  EpistemicState acc = subject_states.front();
  for (const auto& s : subject_states.subspan(1)) acc = set_intersection(acc, s);
  if (acc.empty()) throw Error("subjects' knowledge contradicts");
  return acc;
}

// Product over objects of the number of distinct independent attributes.
inline std::uint64_t knowledge_dimension(std::span<const int> distinct_attribute_counts) {
  if (distinct_attribute_counts.empty()) throw Error("knowledge dimension needs at least one object");
  std::uint64_t d = 1;
  for (int n : distinct_attribute_counts) {
    if (n < 1) throw Error("each object needs at least one distinct attribute");
    d *= static_cast<std::uint64_t>(n);
  }
  return d;
}

// Counts taken from the registry: every registered attribute of an object is
// treated as distinct.
inline std::uint64_t knowledge_dimension(const ObjectRegistry& registry) {
  std::vector<int> counts;
  for (const auto& o : registry.objects()) counts.push_back(static_cast<int>(o.attributes.size()));
  return knowledge_dimension(counts);
}

// S(A, v): exact states in which at least one object carrying A has value v.
inline EpistemicState attribute_slice(const RegistryPtr& registry, const std::string& attribute,
                                      std::size_t value) {
  const std::size_t a = registry->attribute_index(attribute);
  if (value >= registry->attributes()[a].values.size()) throw Error("value index out of range");
  std::vector<std::size_t> slots;
  for (std::size_t s = 0; s < registry->slots().size(); ++s)
    if (registry->slots()[s].attribute == a) slots.push_back(s);
  return EpistemicState::where(registry, [&](const ExactState& z) {
    return std::any_of(slots.begin(), slots.end(), [&](std::size_t s) { return z.values[s] == value; });
  });
}

// S_O(A, v): exact states in which one given object has value v of A.
inline EpistemicState object_slice(const RegistryPtr& registry, const std::string& object,
                                   const std::string& attribute, std::size_t value) {
  const std::size_t s = registry->slot(object, attribute);
  if (value >= registry->value_count(s)) throw Error("value index out of range");
  return EpistemicState::where(registry, [&](const ExactState& z) { return z.values[s] == value; });
}

// The state induced by a body of knowledge, modelled as the set of exact
// states it excludes. More knowledge means a smaller state.
inline EpistemicState induced_state(const RegistryPtr& registry, const std::set<std::uint64_t>& excluded) {
  auto s = EpistemicState::where(registry, [&](const ExactState& z) { return !excluded.contains(registry->encode(z)); });
  if (s.empty()) throw Error("knowledge excludes every exact state");
  return s;
}

// A property as a valuation over exact states. std::nullopt marks exact
// states for which the property is undefined.
class PropertySpec {
 public:
  using Valuation = std::function<std::optional<std::size_t>(const ExactState&)>;

  PropertySpec(std::string id, std::vector<double> labels, Valuation valuation)
      : id_(std::move(id)), labels_(std::move(labels)), valuation_(std::move(valuation)) {
    if (labels_.empty()) throw Error("property '" + id_ + "' has no values");
    std::set<double> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) throw Error("property values must be distinct");
  }

  const std::string& id() const { return id_; }
  const std::vector<double>& labels() const { return labels_; }
  std::size_t value_count() const { return labels_.size(); }

  std::optional<std::size_t> value_at(const ExactState& z) const {
    auto v = valuation_(z);
    if (v && *v >= labels_.size()) throw Error("property '" + id_ + "' valuation out of range");
    return v;
  }

  // The value space P_j inside `within`.
  EpistemicState value_space(const EpistemicState& within, std::size_t j) const {
    std::vector<std::uint64_t> codes;
    for (auto c : within.codes()) {
      auto v = value_at(within.registry()->decode(c));
      if (v && *v == j) codes.push_back(c);
    }
    return {within.registry(), std::move(codes)};
  }

  // Where the property is defined at all.
  EpistemicState domain(const EpistemicState& within) const {
    std::vector<std::uint64_t> codes;
    for (auto c : within.codes())
      if (value_at(within.registry()->decode(c))) codes.push_back(c);
    return {within.registry(), std::move(codes)};
  }

 private:
  std::string id_;
  std::vector<double> labels_;
  Valuation valuation_;
};

}  // namespace epistemic
