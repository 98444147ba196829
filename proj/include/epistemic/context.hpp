#pragma once

// Experimental contexts as layered networks of alternatives. Probabilities
// propagate classically across decided layers and through amplitudes across
// unknowable ones; contextual states reduce by observation or consistency.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "epistemic/error.hpp"
#include "epistemic/evolution.hpp"
#include "epistemic/exact.hpp"

namespace epistemic {

using Complex = std::complex<double>;

inline constexpr double kNormTolerance = 1e-12;

// A complex amplitude, optionally carried exactly as well.
struct Amplitude {
  Complex value{};
  std::optional<ExactComplex> exact;

  Amplitude() = default;
  Amplitude(Complex v) : value(v) {}  // NOLINT(implicit)
  Amplitude(double v) : value(v) {}   // NOLINT(implicit)
  Amplitude(ExactComplex e) : value(e.to_complex()), exact(std::move(e)) {}  // NOLINT(implicit)
  Amplitude(const QSqrt2& e) : Amplitude(ExactComplex(e)) {}                // NOLINT(implicit)

  template <class Cx>
  Cx as() const {
    if constexpr (std::is_same_v<Cx, ExactComplex>) return *exact;
    else return value;
  }
};

using AmplitudeRow = std::vector<Amplitude>;
using AmplitudeMatrix = std::vector<AmplitudeRow>;

struct Layer {
  std::string property;
  KnowabilityLevel level = KnowabilityLevel::decided;
  std::vector<double> labels;
  std::vector<bool> virtual_values;  // empty means none are virtual
  bool forced_reduction = false;

  std::size_t size() const { return labels.size(); }
  bool is_virtual(std::size_t j) const { return j < virtual_values.size() && virtual_values[j]; }
};

struct ContextNetwork {
  std::string name;
  std::vector<Layer> layers;
  AmplitudeRow initial;
  std::vector<AmplitudeMatrix> transitions;  // transitions[i]: layers[i] x layers[i+1]

  bool exact() const {
    auto ok = [](const Amplitude& a) { return a.exact.has_value(); };
    if (!std::all_of(initial.begin(), initial.end(), ok)) return false;
    for (const auto& m : transitions)
      for (const auto& r : m)
        if (!std::all_of(r.begin(), r.end(), ok)) return false;
    return true;
  }
};

inline double born(const Complex& a) { return std::norm(a); }
inline QSqrt2 born(const ExactComplex& a) { return a.norm(); }

namespace detail {

inline bool near_one(double s, double tol) { return std::abs(s - 1.0) <= tol; }
inline bool near_one(const QSqrt2& s, double) { return s == QSqrt2(1); }
inline bool is_zero_weight(double w) { return w == 0.0; }
inline bool is_zero_weight(const QSqrt2& w) { return w.is_zero(); }

template <class Cx>
using Weight = decltype(born_weight(std::declval<Cx>()));

template <class Cx>
Weight<Cx> row_norm(const AmplitudeRow& row) {
  Weight<Cx> s(0);
  for (const auto& a : row) s += born_weight(a.template as<Cx>());
  return s;
}

inline bool row_normalized(const AmplitudeRow& row, double tol) {
  if (std::all_of(row.begin(), row.end(), [](const Amplitude& a) { return a.exact.has_value(); }))
    return row_norm<ExactComplex>(row) == QSqrt2(1);
  return near_one(row_norm<Complex>(row), tol);
}

template <class Cx>
struct Branch {
  Weight<Cx> weight;
  std::vector<Cx> amps;
};

template <class Cx>
std::vector<Cx> row_of(const AmplitudeMatrix& m, std::size_t j) {
  std::vector<Cx> out;
  for (const auto& a : m[j]) out.push_back(a.template as<Cx>());
  return out;
}

// The mixture of amplitude vectors over layer k's values, obtained by folding
// the rules of layers 0..k-1.
template <class Cx>
std::vector<Branch<Cx>> mixture_at(const ContextNetwork& net, std::size_t k, double tol,
                                   std::vector<std::string>* rules) {
  using W = Weight<Cx>;
  std::vector<Branch<Cx>> mix;
  mix.push_back({W(1), {}});
  for (const auto& a : net.initial) mix.back().amps.push_back(a.template as<Cx>());
  for (std::size_t i = 0; i < k; ++i) {
    const auto& layer = net.layers[i];
    const auto& A = net.transitions[i];
    switch (layer.level) {
      case KnowabilityLevel::decided: {
        std::vector<std::optional<Branch<Cx>>> by_value(layer.size());
        for (const auto& b : mix)
          for (std::size_t j = 0; j < layer.size(); ++j) {
            const W w = b.weight * born_weight(b.amps[j]);
            if (is_zero_weight(w)) continue;
            if (!by_value[j]) by_value[j] = Branch<Cx>{W(0), row_of<Cx>(A, j)};
            by_value[j]->weight += w;
          }
        mix.clear();
        for (auto& b : by_value)
          if (b) mix.push_back(std::move(*b));
        if (rules) rules->push_back("classical");
        break;
      }
      case KnowabilityLevel::unknowable: {
        const std::size_t next = net.layers[i + 1].size();
        for (auto& b : mix) {
          std::vector<Cx> out(next);
          for (std::size_t jp = 0; jp < next; ++jp)
            for (std::size_t j = 0; j < layer.size(); ++j) out[jp] += b.amps[j] * A[j][jp].template as<Cx>();
          W s(0);
          for (const auto& z : out) s += born_weight(z);
          if (!near_one(s, tol)) throw Error("amplitude matrix violates unitarity conditions");
          b.amps = std::move(out);
        }
        if (rules) rules->push_back("amplitude");
        break;
      }
      case KnowabilityLevel::contingent:
        throw Error("unresolved contingent knowability");
    }
  }
  return mix;
}

template <class Cx>
std::vector<Weight<Cx>> value_probabilities(const std::vector<Branch<Cx>>& mix, std::size_t m) {
  std::vector<Weight<Cx>> q(m, Weight<Cx>(0));
  for (const auto& b : mix)
    for (std::size_t j = 0; j < m; ++j) q[j] += b.weight * born_weight(b.amps[j]);
  return q;
}

}  // namespace detail

// Full list of violations; empty means valid.
inline std::vector<std::string> validate_context(const ContextNetwork& net, double tol = kNormTolerance) {
  std::vector<std::string> issues;
  if (net.layers.empty()) {
    issues.push_back("context has no layers");
    return issues;
  }
  if (net.layers.back().level != KnowabilityLevel::decided) issues.push_back("final property must be decided");
  bool shapes_ok = true;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const std::string where = "layer " + std::to_string(i) + " ('" + l.property + "')";
    if (l.size() < 2) issues.push_back(where + " needs at least 2 values");
    if (std::set<double>(l.labels.begin(), l.labels.end()).size() != l.labels.size())
      issues.push_back(where + ": property values must be distinct");
    if (!l.virtual_values.empty() && l.virtual_values.size() != l.size())
      issues.push_back(where + ": virtual flags do not match values");
  }
  if (net.initial.size() != net.layers.front().size()) {
    issues.push_back("initial amplitudes do not match the first layer");
    shapes_ok = false;
  }
  if (net.transitions.size() + 1 != net.layers.size()) {
    issues.push_back("expected " + std::to_string(net.layers.size() - 1) + " amplitude matrices");
    shapes_ok = false;
  } else {
    for (std::size_t i = 0; i < net.transitions.size(); ++i) {
      const auto& m = net.transitions[i];
      bool ok = m.size() == net.layers[i].size();
      for (const auto& r : m) ok = ok && r.size() == net.layers[i + 1].size();
      if (!ok) {
        issues.push_back("amplitude matrix " + std::to_string(i) + " has wrong dimensions");
        shapes_ok = false;
      }
    }
  }
  if (shapes_ok) {
    if (!detail::row_normalized(net.initial, tol)) issues.push_back("row not normalized: initial amplitudes");
    for (std::size_t i = 0; i < net.transitions.size(); ++i)
      for (std::size_t j = 0; j < net.transitions[i].size(); ++j)
        if (!detail::row_normalized(net.transitions[i][j], tol))
          issues.push_back("row not normalized: matrix " + std::to_string(i) + " row " + std::to_string(j));
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].level != KnowabilityLevel::unknowable) continue;
    for (std::size_t k = i + 1; k < net.layers.size(); ++k)
      if (net.layers[k].level == KnowabilityLevel::decided) {
        if (net.layers[k].size() < net.layers[i].size())
          issues.push_back("layer " + std::to_string(i) + " requires virtual-value padding");
        break;
      }
  }
  return issues;
}

inline void require_valid(const ContextNetwork& net, double tol = kNormTolerance) {
  auto issues = validate_context(net, tol);
  if (!issues.empty()) throw Error(issues.front());
}

struct Propagation {
  std::vector<double> distribution;
  std::optional<std::vector<QSqrt2>> exact;
  std::vector<std::string> rules;  // one per transition
};

inline Propagation propagate(const ContextNetwork& net, double tol = kNormTolerance) {
  require_valid(net, tol);
  Propagation out;
  const std::size_t f = net.layers.size() - 1;
  const std::size_t m = net.layers.back().size();
  if (net.exact()) {
    auto mix = detail::mixture_at<ExactComplex>(net, f, tol, &out.rules);
    auto q = detail::value_probabilities(mix, m);
    for (const auto& x : q) out.distribution.push_back(x.to_double());
    out.exact = std::move(q);
  } else {
    auto mix = detail::mixture_at<Complex>(net, f, tol, &out.rules);
    out.distribution = detail::value_probabilities(mix, m);
  }
  return out;
}

struct ContextualState {
  enum class Mode { superposed, reduced };
  Mode mode = Mode::superposed;
  AmplitudeRow amplitudes;  // over the cursor layer's values
  std::size_t value = 0;    // meaningful when reduced
  std::size_t cursor = 0;
};

inline ContextualState initial_state(const ContextNetwork& net) {
  return {ContextualState::Mode::superposed, net.initial, 0, 0};
}

inline ContextualState reduce_by_observation(const ContextualState& state, const ContextNetwork& net,
                                             std::size_t outcome) {
  if (state.cursor >= net.layers.size()) throw Error("contextual state is past the last layer");
  const auto& layer = net.layers[state.cursor];
  if (layer.level == KnowabilityLevel::unknowable) throw Error("reduction forbidden at unknowable property");
  if (layer.level == KnowabilityLevel::contingent) throw Error("unresolved contingent knowability");
  if (outcome >= layer.size()) throw Error("outcome index out of range");
  if (state.mode == ContextualState::Mode::reduced) {
    if (state.value != outcome) throw Error("impossible outcome");
    return state;
  }
  const Amplitude& a = state.amplitudes.at(outcome);
  const bool zero = a.exact ? a.exact->is_zero() : born(a.value) == 0.0;
  if (zero) throw Error("impossible outcome");
  AmplitudeRow unit(layer.size(), Amplitude(ExactComplex(0)));
  unit[outcome] = Amplitude(ExactComplex(1));
  return {ContextualState::Mode::reduced, std::move(unit), outcome, state.cursor};
}

// Amplitudes over the next layer once the cursor layer has been decided.
inline AmplitudeRow next_amplitudes(const ContextualState& state, const ContextNetwork& net) {
  if (state.mode != ContextualState::Mode::reduced) throw Error("contextual state is not reduced");
  if (state.cursor + 1 >= net.layers.size()) throw Error("no later layer");
  return net.transitions[state.cursor][state.value];
}

// The network that remains from the state's cursor on, started from the state.
inline ContextNetwork remaining_context(const ContextualState& state, const ContextNetwork& net) {
  ContextNetwork rest;
  rest.name = net.name;
  rest.layers.assign(net.layers.begin() + static_cast<std::ptrdiff_t>(state.cursor), net.layers.end());
  rest.transitions.assign(net.transitions.begin() + static_cast<std::ptrdiff_t>(state.cursor), net.transitions.end());
  rest.initial = state.amplitudes;
  return rest;
}

inline Propagation propagate_from(const ContextualState& state, const ContextNetwork& net,
                                  double tol = kNormTolerance) {
  return propagate(remaining_context(state, net), tol);
}

inline ContextNetwork reduce_by_consistency(ContextNetwork net, bool path_knowledge_reachable) {
  bool any = false;
  for (auto& l : net.layers) {
    if (l.level != KnowabilityLevel::contingent) continue;
    any = true;
    if (path_knowledge_reachable) {
      l.level = KnowabilityLevel::decided;
      l.forced_reduction = true;
    } else {
      l.level = KnowabilityLevel::unknowable;
    }
  }
  if (!any) throw Error("nothing to resolve");
  return net;
}

struct PaddingReport {
  ContextNetwork network;
  std::vector<std::size_t> virtual_values;
  std::vector<double> virtual_probabilities;
  bool constraints_hold = false;
};

// Extends layer+1 to as many values as `layer` by completing the amplitude
// matrix to a unitary. Added values are virtual and must receive probability 0.
inline PaddingReport pad_virtual_values(const ContextNetwork& net, std::size_t layer, double tol = kNormTolerance) {
  if (layer + 1 >= net.layers.size()) throw Error("padding needs a later layer");
  if (net.layers[layer].level != KnowabilityLevel::unknowable)
    throw Error("padding applies only after an unknowable property");
  const std::size_t m = net.layers[layer].size();
  const std::size_t mp = net.layers[layer + 1].size();
  if (m <= mp) throw Error("padding unnecessary");
  const auto& A = net.transitions[layer];
  if (A.size() != m) throw Error("amplitude matrix has wrong dimensions");

  std::vector<std::vector<Complex>> cols(mp, std::vector<Complex>(m));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < mp; ++k) cols[k][j] = A[j].at(k).value;
  auto dot = [&](const std::vector<Complex>& u, const std::vector<Complex>& v) {
    Complex s = 0;
    for (std::size_t j = 0; j < m; ++j) s += std::conj(u[j]) * v[j];
    return s;
  };
  for (std::size_t a = 0; a < mp; ++a)
    for (std::size_t b = 0; b < mp; ++b)
      if (std::abs(dot(cols[a], cols[b]) - Complex(a == b ? 1.0 : 0.0)) > 1e-9)
        throw Error("amplitude columns are not orthonormal; virtual values cannot be added");
  for (std::size_t e = 0; e < m && cols.size() < m; ++e) {
    std::vector<Complex> v(m, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& c : cols) {
        const Complex p = dot(c, v);
        for (std::size_t j = 0; j < m; ++j) v[j] -= p * c[j];
      }
    const double n = std::sqrt(std::real(dot(v, v)));
    if (n < 1e-6) continue;
    for (auto& x : v) x /= n;
    cols.push_back(std::move(v));
  }

  PaddingReport rep;
  rep.network = net;
  auto& out = rep.network;
  auto& next = out.layers[layer + 1];
  if (next.virtual_values.empty()) next.virtual_values.assign(mp, false);
  double top = *std::max_element(next.labels.begin(), next.labels.end());
  for (std::size_t k = mp; k < m; ++k) {
    next.labels.push_back(top + static_cast<double>(k - mp + 1));
    next.virtual_values.push_back(true);
    rep.virtual_values.push_back(k);
  }
  auto& Ap = out.transitions[layer];
  for (std::size_t j = 0; j < m; ++j) {
    Ap[j].resize(m);
    for (std::size_t k = mp; k < m; ++k) Ap[j][k] = Amplitude(cols[k][j]);
  }
  if (layer + 1 < out.transitions.size()) {
    auto& after = out.transitions[layer + 1];
    const std::size_t width = out.layers[layer + 2].size();
    for (std::size_t k = mp; k < m; ++k) {
      AmplitudeRow r(width, Amplitude(ExactComplex(0)));
      r[0] = Amplitude(ExactComplex(1));
      after.push_back(std::move(r));
    }
  }
  auto mix = detail::mixture_at<Complex>(out, layer + 1, tol, nullptr);
  auto q = detail::value_probabilities(mix, m);
  rep.constraints_hold = true;
  for (auto k : rep.virtual_values) {
    rep.virtual_probabilities.push_back(q[k]);
    if (q[k] > tol) rep.constraints_hold = false;
  }
  return rep;
}

struct DistributivityReport {
  std::vector<std::vector<double>> nested;     // v_j * v_jj'
  std::vector<std::vector<double>> flattened;  // |a_j a_jj'|^2
  double max_deviation = 0;
};

inline DistributivityReport distributivity_check(const ContextNetwork& net) {
  require_valid(net);
  if (net.layers.size() < 2 || net.layers[0].level != KnowabilityLevel::decided ||
      net.layers[1].level != KnowabilityLevel::decided)
    throw Error("distributivity check needs two consecutive decided layers");
  DistributivityReport r;
  const auto& A = net.transitions[0];
  for (std::size_t j = 0; j < net.layers[0].size(); ++j) {
    const double vj = born(net.initial[j].value);
    std::vector<double> nrow, frow;
    for (std::size_t k = 0; k < net.layers[1].size(); ++k) {
      nrow.push_back(vj * born(A[j][k].value));
      frow.push_back(born(net.initial[j].value * A[j][k].value));
      r.max_deviation = std::max(r.max_deviation, std::abs(nrow.back() - frow.back()));
    }
    r.nested.push_back(std::move(nrow));
    r.flattened.push_back(std::move(frow));
  }
  return r;
}

}  // namespace epistemic
