#pragma once

// Declarative scenario files: loading, field-level validation and command
// dispatch. Requires nlohmann/json on the include path.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "epistemic/context.hpp"
#include "epistemic/error.hpp"
#include "epistemic/evolution.hpp"
#include "epistemic/exact.hpp"
#include "epistemic/hilbert.hpp"
#include "epistemic/statespace.hpp"
#include "epistemic/uniqueness.hpp"

namespace epistemic::scenario {

using json = nlohmann::json;

// "object.attribute" -> allowed values
using WhereClause = std::map<std::string, std::vector<std::string>>;

struct Selection {
  std::optional<WhereClause> where;
  std::optional<std::vector<std::uint64_t>> codes;
  bool rest = false;
};

struct AlternativeDef {
  std::string label;
  Selection select;
};

struct StatespaceDef {
  std::vector<AttributeDef> attributes;
  std::vector<ObjectDef> objects;
  std::optional<Selection> parent;
};

struct EvolutionDef {
  std::string property = "P";
  KnowabilityLevel level = KnowabilityLevel::decided;
  std::vector<AlternativeDef> alternatives;
  std::optional<std::vector<std::uint64_t>> permutation;
  std::optional<std::int64_t> shift;
  int steps = 1;
};

struct OperatorDef {
  std::string property;
  std::vector<ValueContraction> contractions;
};

struct ContextDef {
  ContextNetwork network;
  std::optional<bool> path_knowledge_reachable;
  bool simultaneous = false;
  std::optional<JointVolumeTable> joint;
  std::vector<OperatorDef> operators;
};

struct UniquenessDef {
  std::vector<std::pair<std::size_t, std::size_t>> shapes{{2, 2}};
  std::vector<CandidateMap> candidates = default_candidates();
  int starts = 50;
};

inline const std::vector<std::string> kCommands{"propagate", "montecarlo", "hilbert", "uniqueness", "validate"};

struct RunDef {
  std::string command = "validate";
  std::uint64_t n = 100000;
  std::uint64_t seed = 1;
  double tolerance = kNormTolerance;
};

struct Scenario {
  std::string name;
  std::string description;
  std::optional<StatespaceDef> statespace;
  std::optional<EvolutionDef> evolution;
  std::optional<ContextDef> context;
  std::optional<UniquenessDef> uniqueness;
  RunDef run;
};

// Shortest decimal text of a double as an exact rational.
inline Rational decimal_to_rational(const std::string& text) {
  std::size_t i = 0;
  bool neg = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) neg = text[i++] == '-';
  boost::multiprecision::cpp_int mant = 0;
  int scale = 0;
  bool digits = false, dot = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c >= '0' && c <= '9') {
      mant = mant * 10 + (c - '0');
      if (dot) --scale;
      digits = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (!digits) throw Error("not a decimal number: " + text);
  if (i < text.size()) {
    if (text[i] != 'e' && text[i] != 'E') throw Error("not a decimal number: " + text);
    scale += std::stoi(text.substr(i + 1));
  }
  Rational r(mant);
  boost::multiprecision::cpp_int ten = 1;
  for (int k = 0; k < std::abs(scale); ++k) ten *= 10;
  r = scale >= 0 ? r * Rational(ten) : r / Rational(ten);
  return neg ? -r : r;
}

namespace detail {

class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  bool object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      fail(path, "expected object");
      return false;
    }
    for (const auto& [k, v] : j.items())
      if (!allowed.contains(k)) fail(path == "$" ? k : path + "." + k, "unknown field");
    return true;
  }

  bool array(const json& j, const std::string& path) {
    if (!j.is_array()) {
      fail(path, "expected array");
      return false;
    }
    return true;
  }

  std::optional<std::string> string(const json& j, const std::string& path) {
    if (!j.is_string()) {
      fail(path, "expected string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::optional<bool> boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) {
      fail(path, "expected boolean");
      return std::nullopt;
    }
    return j.get<bool>();
  }

  std::optional<std::int64_t> integer(const json& j, const std::string& path, std::int64_t lo, std::int64_t hi) {
    if (!j.is_number_integer()) {
      fail(path, "expected integer");
      return std::nullopt;
    }
    const auto v = j.get<std::int64_t>();
    if (v < lo || v > hi) {
      fail(path, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::uint64_t> unsigned_integer(const json& j, const std::string& path) {
    if (!j.is_number_unsigned()) {
      fail(path, "expected nonnegative integer");
      return std::nullopt;
    }
    return j.get<std::uint64_t>();
  }

  std::optional<double> number(const json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected number");
      return std::nullopt;
    }
    return j.get<double>();
  }

  // Number, "1/sqrt2", "-1/sqrt2" or "p/q".
  std::optional<QSqrt2> exact_real(const json& j, const std::string& path) {
    if (j.is_number()) return QSqrt2(decimal_to_rational(j.dump()));
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "1/sqrt2") return QSqrt2::inv_sqrt2();
      if (s == "-1/sqrt2") return -QSqrt2::inv_sqrt2();
      const auto slash = s.find('/');
      if (slash != std::string::npos) {
        try {
          std::size_t used = 0;
          const long long p = std::stoll(s.substr(0, slash), &used);
          const auto den = s.substr(slash + 1);
          std::size_t used2 = 0;
          const long long q = std::stoll(den, &used2);
          if (used == slash && used2 == den.size() && q > 0) return QSqrt2(Rational(p, q));
        } catch (const std::exception&) {
        }
      }
      fail(path, "unknown numeric token '" + s + "'");
      return std::nullopt;
    }
    fail(path, "expected number or numeric token");
    return std::nullopt;
  }

  std::optional<Amplitude> amplitude(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) {
      fail(path, "expected [re, im] pair");
      return std::nullopt;
    }
    auto re = exact_real(j[0], path + "[0]");
    auto im = exact_real(j[1], path + "[1]");
    if (!re || !im) return std::nullopt;
    return Amplitude(ExactComplex(*re, *im));
  }

  std::optional<AmplitudeRow> amplitude_row(const json& j, const std::string& path) {
    if (!array(j, path)) return std::nullopt;
    AmplitudeRow row;
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto a = amplitude(j[i], path + "[" + std::to_string(i) + "]");
      if (a) row.push_back(*a);
      else ok = false;
    }
    return ok ? std::optional(row) : std::nullopt;
  }

  std::optional<std::vector<std::vector<double>>> real_matrix(const json& j, const std::string& path) {
    if (!array(j, path)) return std::nullopt;
    std::vector<std::vector<double>> m;
    bool ok = true;
    for (std::size_t r = 0; r < j.size(); ++r) {
      const auto rp = path + "[" + std::to_string(r) + "]";
      if (!array(j[r], rp)) {
        ok = false;
        continue;
      }
      std::vector<double> row;
      for (std::size_t c = 0; c < j[r].size(); ++c) {
        auto v = number(j[r][c], rp + "[" + std::to_string(c) + "]");
        if (v) row.push_back(*v);
        else ok = false;
      }
      m.push_back(row);
    }
    return ok ? std::optional(m) : std::nullopt;
  }

  std::vector<std::string> strings(const json& j, const std::string& path) {
    std::vector<std::string> out;
    if (!array(j, path)) return out;
    for (std::size_t i = 0; i < j.size(); ++i)
      if (auto s = string(j[i], path + "[" + std::to_string(i) + "]")) out.push_back(*s);
    return out;
  }

  std::vector<std::uint64_t> codes(const json& j, const std::string& path) {
    std::vector<std::uint64_t> out;
    if (!array(j, path)) return out;
    for (std::size_t i = 0; i < j.size(); ++i)
      if (auto c = unsigned_integer(j[i], path + "[" + std::to_string(i) + "]")) out.push_back(*c);
    return out;
  }

  std::optional<Selection> selection(const json& j, const std::string& path, bool allow_rest, bool allow_label) {
    std::set<std::string> allowed{"where", "codes"};
    if (allow_rest) allowed.insert("rest");
    if (allow_label) allowed.insert("label");
    if (!object(j, path, allowed)) return std::nullopt;
    Selection s;
    int kinds = 0;
    if (j.contains("where")) {
      ++kinds;
      const auto wp = path + ".where";
      if (j["where"].is_object()) {
        WhereClause w;
        for (const auto& [k, v] : j["where"].items()) {
          if (k.find('.') == std::string::npos) fail(wp + "." + k, "key must be object.attribute");
          w[k] = strings(v, wp + "." + k);
        }
        s.where = w;
      } else {
        fail(wp, "expected object");
      }
    }
    if (j.contains("codes")) {
      ++kinds;
      s.codes = codes(j["codes"], path + ".codes");
    }
    if (j.contains("rest")) {
      ++kinds;
      s.rest = boolean(j["rest"], path + ".rest").value_or(false);
      if (!s.rest) fail(path + ".rest", "must be true when present");
    }
    if (kinds != 1) fail(path, allow_rest ? "exactly one of where, codes, rest required" : "exactly one of where, codes required");
    return s;
  }
};

inline std::optional<StatespaceDef> read_statespace(Reader& r, const json& j) {
  const std::string p = "statespace";
  if (!r.object(j, p, {"attributes", "objects", "parent"})) return std::nullopt;
  StatespaceDef s;
  if (!j.contains("attributes")) r.fail(p + ".attributes", "required");
  else if (r.array(j["attributes"], p + ".attributes"))
    for (std::size_t i = 0; i < j["attributes"].size(); ++i) {
      const auto ap = p + ".attributes[" + std::to_string(i) + "]";
      const auto& a = j["attributes"][i];
      if (!r.object(a, ap, {"id", "kind", "values"})) continue;
      AttributeDef def;
      for (const char* k : {"id", "kind", "values"})
        if (!a.contains(k)) r.fail(ap + "." + k, "required");
      if (a.contains("id")) def.id = r.string(a["id"], ap + ".id").value_or("");
      if (a.contains("kind"))
        if (auto k = r.string(a["kind"], ap + ".kind")) {
          try {
            def.kind = parse_attribute_kind(*k);
          } catch (const SchemaError& e) {
            r.fail(ap + ".kind", e.what());
          }
        }
      if (a.contains("values")) def.values = r.strings(a["values"], ap + ".values");
      s.attributes.push_back(def);
    }
  if (!j.contains("objects")) r.fail(p + ".objects", "required");
  else if (r.array(j["objects"], p + ".objects"))
    for (std::size_t i = 0; i < j["objects"].size(); ++i) {
      const auto op = p + ".objects[" + std::to_string(i) + "]";
      const auto& o = j["objects"][i];
      if (!r.object(o, op, {"id", "attributes"})) continue;
      ObjectDef def;
      if (!o.contains("id")) r.fail(op + ".id", "required");
      else def.id = r.string(o["id"], op + ".id").value_or("");
      if (!o.contains("attributes")) r.fail(op + ".attributes", "required");
      else def.attributes = r.strings(o["attributes"], op + ".attributes");
      s.objects.push_back(def);
    }
  if (j.contains("parent")) s.parent = r.selection(j["parent"], p + ".parent", false, false);
  return s;
}

inline std::optional<EvolutionDef> read_evolution(Reader& r, const json& j) {
  const std::string p = "evolution";
  if (!r.object(j, p, {"property", "level", "alternatives", "rule", "steps"})) return std::nullopt;
  EvolutionDef e;
  if (j.contains("property")) e.property = r.string(j["property"], p + ".property").value_or("P");
  if (j.contains("level"))
    if (auto l = r.integer(j["level"], p + ".level", 1, 3)) e.level = knowability_from_int(static_cast<int>(*l));
  if (!j.contains("alternatives")) r.fail(p + ".alternatives", "required");
  else if (r.array(j["alternatives"], p + ".alternatives"))
    for (std::size_t i = 0; i < j["alternatives"].size(); ++i) {
      const auto ap = p + ".alternatives[" + std::to_string(i) + "]";
      const auto& a = j["alternatives"][i];
      AlternativeDef def;
      if (a.is_object() && a.contains("label")) def.label = r.string(a["label"], ap + ".label").value_or("");
      else r.fail(ap + ".label", "required");
      if (auto s = r.selection(a, ap, true, true)) def.select = *s;
      e.alternatives.push_back(def);
    }
  if (j.contains("rule")) {
    const auto rp = p + ".rule";
    if (r.object(j["rule"], rp, {"permutation", "shift"})) {
      const auto& rule = j["rule"];
      if (rule.contains("permutation") == rule.contains("shift")) r.fail(rp, "exactly one of permutation, shift required");
      if (rule.contains("permutation")) e.permutation = r.codes(rule["permutation"], rp + ".permutation");
      if (rule.contains("shift")) e.shift = r.integer(rule["shift"], rp + ".shift", -1000000, 1000000);
    }
  }
  if (j.contains("steps")) e.steps = static_cast<int>(r.integer(j["steps"], p + ".steps", 1, 1000).value_or(1));
  return e;
}

inline std::optional<ContextDef> read_context(Reader& r, const json& j) {
  const std::string p = "context";
  if (!r.object(j, p, {"layers", "initial", "transitions", "path_knowledge_reachable", "simultaneous", "joint_volumes",
                       "theta", "pair_class", "operators"}))
    return std::nullopt;
  ContextDef c;
  auto& net = c.network;
  if (!j.contains("layers")) r.fail(p + ".layers", "required");
  else if (r.array(j["layers"], p + ".layers"))
    for (std::size_t i = 0; i < j["layers"].size(); ++i) {
      const auto lp = p + ".layers[" + std::to_string(i) + "]";
      const auto& l = j["layers"][i];
      if (!r.object(l, lp, {"property", "level", "labels"})) continue;
      Layer layer;
      for (const char* k : {"property", "level", "labels"})
        if (!l.contains(k)) r.fail(lp + "." + k, "required");
      if (l.contains("property")) layer.property = r.string(l["property"], lp + ".property").value_or("");
      if (l.contains("level"))
        if (auto v = r.integer(l["level"], lp + ".level", 1, 3)) layer.level = knowability_from_int(static_cast<int>(*v));
      if (l.contains("labels") && r.array(l["labels"], lp + ".labels"))
        for (std::size_t k = 0; k < l["labels"].size(); ++k)
          if (auto v = r.number(l["labels"][k], lp + ".labels[" + std::to_string(k) + "]")) layer.labels.push_back(*v);
      net.layers.push_back(layer);
    }
  if (!j.contains("initial")) r.fail(p + ".initial", "required");
  else if (auto row = r.amplitude_row(j["initial"], p + ".initial")) net.initial = *row;
  if (j.contains("transitions") && r.array(j["transitions"], p + ".transitions"))
    for (std::size_t i = 0; i < j["transitions"].size(); ++i) {
      const auto tp = p + ".transitions[" + std::to_string(i) + "]";
      AmplitudeMatrix m;
      if (r.array(j["transitions"][i], tp))
        for (std::size_t k = 0; k < j["transitions"][i].size(); ++k)
          if (auto row = r.amplitude_row(j["transitions"][i][k], tp + "[" + std::to_string(k) + "]")) m.push_back(*row);
      net.transitions.push_back(m);
    }
  if (j.contains("path_knowledge_reachable"))
    c.path_knowledge_reachable = r.boolean(j["path_knowledge_reachable"], p + ".path_knowledge_reachable");
  if (j.contains("simultaneous")) c.simultaneous = r.boolean(j["simultaneous"], p + ".simultaneous").value_or(false);
  if (j.contains("joint_volumes")) {
    JointVolumeTable t;
    if (auto v = r.real_matrix(j["joint_volumes"], p + ".joint_volumes")) t.v = *v;
    if (j.contains("theta")) t.theta = r.real_matrix(j["theta"], p + ".theta");
    if (j.contains("pair_class")) {
      const auto s = r.string(j["pair_class"], p + ".pair_class").value_or("");
      if (s == "independent") t.pair_class = PairClass::independent;
      else if (s == "mutually_defined") t.pair_class = PairClass::mutually_defined;
      else if (s != "unspecified") r.fail(p + ".pair_class", "expected independent, mutually_defined or unspecified");
    }
    c.joint = t;
  } else {
    if (j.contains("theta")) r.fail(p + ".theta", "requires joint_volumes");
    if (j.contains("pair_class")) r.fail(p + ".pair_class", "requires joint_volumes");
  }
  if (j.contains("operators") && r.array(j["operators"], p + ".operators"))
    for (std::size_t i = 0; i < j["operators"].size(); ++i) {
      const auto op = p + ".operators[" + std::to_string(i) + "]";
      const auto& o = j["operators"][i];
      if (!r.object(o, op, {"property", "contractions"})) continue;
      OperatorDef def;
      if (!o.contains("property")) r.fail(op + ".property", "required");
      else def.property = r.string(o["property"], op + ".property").value_or("");
      if (o.contains("contractions") && r.array(o["contractions"], op + ".contractions"))
        for (std::size_t k = 0; k < o["contractions"].size(); ++k) {
          const auto cp = op + ".contractions[" + std::to_string(k) + "]";
          const auto& cj = o["contractions"][k];
          if (!r.object(cj, cp, {"values", "label"})) continue;
          ValueContraction vc;
          if (!cj.contains("values") || !cj.contains("label")) r.fail(cp, "values and label required");
          if (cj.contains("values"))
            for (auto v : r.codes(cj["values"], cp + ".values")) vc.values.push_back(static_cast<std::size_t>(v));
          if (cj.contains("label")) vc.label = r.number(cj["label"], cp + ".label").value_or(0);
          def.contractions.push_back(vc);
        }
      c.operators.push_back(def);
    }
  return c;
}

inline std::optional<CandidateMap> read_candidate(Reader& r, const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "real-identity") return CandidateMap::real_identity();
    if (s == "real-square") return CandidateMap::real_square();
    if (s == "|a|^2") return CandidateMap::modulus_power(1);
    if (s == "|a|^4") return CandidateMap::modulus_power(2);
    if (s == "|a|^6") return CandidateMap::modulus_power(3);
    r.fail(path, "unknown candidate '" + s + "'");
    return std::nullopt;
  }
  if (!r.object(j, path, {"polynomial"})) return std::nullopt;
  if (!j.contains("polynomial")) {
    r.fail(path + ".polynomial", "required");
    return std::nullopt;
  }
  auto m = r.real_matrix(j["polynomial"], path + ".polynomial");
  if (!m) return std::nullopt;
  try {
    return CandidateMap::polynomial(*m);
  } catch (const Error& e) {
    r.fail(path + ".polynomial", e.what());
    return std::nullopt;
  }
}

inline std::optional<UniquenessDef> read_uniqueness(Reader& r, const json& j) {
  const std::string p = "uniqueness";
  if (!r.object(j, p, {"shapes", "candidates", "starts"})) return std::nullopt;
  UniquenessDef u;
  if (j.contains("shapes") && r.array(j["shapes"], p + ".shapes")) {
    u.shapes.clear();
    for (std::size_t i = 0; i < j["shapes"].size(); ++i) {
      const auto sp = p + ".shapes[" + std::to_string(i) + "]";
      const auto& s = j["shapes"][i];
      if (!s.is_array() || s.size() != 2) {
        r.fail(sp, "expected [M, M'] pair");
        continue;
      }
      auto m = r.integer(s[0], sp + "[0]", 2, 6);
      auto mp = r.integer(s[1], sp + "[1]", 2, 6);
      if (m && mp) u.shapes.emplace_back(static_cast<std::size_t>(*m), static_cast<std::size_t>(*mp));
    }
  }
  if (j.contains("candidates") && r.array(j["candidates"], p + ".candidates")) {
    u.candidates.clear();
    for (std::size_t i = 0; i < j["candidates"].size(); ++i)
      if (auto c = read_candidate(r, j["candidates"][i], p + ".candidates[" + std::to_string(i) + "]")) u.candidates.push_back(*c);
  }
  if (j.contains("starts")) u.starts = static_cast<int>(r.integer(j["starts"], p + ".starts", 1, 10000).value_or(50));
  return u;
}

inline RunDef read_run(Reader& r, const json& j) {
  const std::string p = "run";
  RunDef run;
  if (!r.object(j, p, {"command", "n", "seed", "tolerance"})) return run;
  if (j.contains("command")) {
    run.command = r.string(j["command"], p + ".command").value_or("validate");
    if (std::find(kCommands.begin(), kCommands.end(), run.command) == kCommands.end())
      r.fail(p + ".command", "unknown command '" + run.command + "'");
  }
  if (j.contains("n")) {
    run.n = r.unsigned_integer(j["n"], p + ".n").value_or(run.n);
    if (run.n == 0) r.fail(p + ".n", "must be positive");
  }
  if (j.contains("seed")) run.seed = r.unsigned_integer(j["seed"], p + ".seed").value_or(run.seed);
  if (j.contains("tolerance")) {
    run.tolerance = r.number(j["tolerance"], p + ".tolerance").value_or(run.tolerance);
    if (!(run.tolerance > 0)) r.fail(p + ".tolerance", "must be positive");
  }
  return run;
}

// Exact mode only when every row is exactly normalized; decimal inputs such
// as 0.7745966692414834 are then carried in floating point.
inline void resolve_exactness(ContextNetwork& net) {
  auto exact_unit = [](const AmplitudeRow& row) {
    QSqrt2 s(0);
    for (const auto& a : row) s += a.exact->norm();
    return s == QSqrt2(1);
  };
  bool all = exact_unit(net.initial);
  for (const auto& m : net.transitions)
    for (const auto& row : m) all = all && exact_unit(row);
  if (all) return;
  auto strip = [](AmplitudeRow& row) {
    for (auto& a : row) a.exact.reset();
  };
  strip(net.initial);
  for (auto& m : net.transitions)
    for (auto& row : m) strip(row);
}

}  // namespace detail

inline Scenario parse_scenario(const json& j, const std::string& default_name) {
  detail::Reader r;
  Scenario s;
  s.name = default_name;
  if (r.object(j, "$", {"name", "description", "statespace", "evolution", "context", "uniqueness", "run"})) {
    if (j.contains("name")) s.name = r.string(j["name"], "name").value_or(default_name);
    if (j.contains("description")) s.description = r.string(j["description"], "description").value_or("");
    if (j.contains("statespace")) s.statespace = detail::read_statespace(r, j["statespace"]);
    if (j.contains("evolution")) s.evolution = detail::read_evolution(r, j["evolution"]);
    if (j.contains("context")) s.context = detail::read_context(r, j["context"]);
    if (j.contains("uniqueness")) s.uniqueness = detail::read_uniqueness(r, j["uniqueness"]);
    if (j.contains("run")) s.run = detail::read_run(r, j["run"]);
    if (s.evolution && !s.statespace) r.fail("evolution", "requires a statespace section");
  }
  if (!r.errors.empty()) {
    std::string msg;
    for (const auto& e : r.errors) msg += (msg.empty() ? "" : "\n") + e;
    throw SchemaError(msg);
  }
  if (s.context) {
    s.context->network.name = s.name;
    detail::resolve_exactness(s.context->network);
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read scenario file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("$: invalid JSON: ") + e.what());
  }
  return parse_scenario(j, path.stem().string());
}

struct Overrides {
  std::optional<std::string> command;
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<bool> path_knowledge_reachable;
};

struct RunResult {
  std::string command;
  std::string scenario;
  std::uint64_t seed = 0;
  json output;
  std::string csv;
  std::vector<std::pair<std::string, bool>> checks;
  std::string summary;
  int exit_code = 0;
  std::string message;
};

inline std::string format_number(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

inline std::string format_label(double x) { return format_number(x); }

namespace detail {

inline json pair(Complex z) { return json::array({z.real(), z.imag()}); }

inline json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(pair(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

inline std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], r[c].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      os << (c ? "  " : "");
      if (c + 1 < r.size()) os << std::left << std::setw(static_cast<int>(w[c]));
      os << r[c];
    }
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

inline EpistemicState select(const RegistryPtr& reg, const Selection& s, const EpistemicState* within) {
  if (s.codes) {
    for (auto c : *s.codes)
      if (c >= reg->state_count()) throw Error("exact state code " + std::to_string(c) + " out of range");
    EpistemicState st(reg, *s.codes);
    return within ? set_intersection(*within, st) : st;
  }
  std::vector<std::pair<std::size_t, std::set<std::size_t>>> conds;
  if (s.where)
    for (const auto& [key, values] : *s.where) {
      const auto dot = key.find('.');
      const auto slot = reg->slot(key.substr(0, dot), key.substr(dot + 1));
      const auto& attr = reg->attributes()[reg->slots()[slot].attribute];
      std::set<std::size_t> allowed;
      for (const auto& v : values) allowed.insert(attr.index_of(v));
      conds.emplace_back(slot, allowed);
    }
  auto st = EpistemicState::where(reg, [&](const ExactState& z) {
    for (const auto& [slot, allowed] : conds)
      if (!allowed.contains(z.values[slot])) return false;
    return true;
  });
  return within ? set_intersection(*within, st) : st;
}

struct Alternatives {
  RegistryPtr registry;
  EpistemicState parent;
  CompleteAlternativeSet set;
  std::vector<std::string> labels;
};

inline Alternatives build_alternatives(const Scenario& sc) {
  const auto& ss = *sc.statespace;
  auto reg = make_registry(ss.attributes, ss.objects);
  auto parent = ss.parent ? select(reg, *ss.parent, nullptr) : EpistemicState::universe(reg);
  if (parent.empty()) throw Error("parent state is void");
  const auto& ev = *sc.evolution;
  std::vector<EpistemicState> regions;
  std::vector<std::uint64_t> claimed;
  std::optional<std::size_t> rest;
  std::vector<double> values;
  for (std::size_t i = 0; i < ev.alternatives.size(); ++i) {
    values.push_back(static_cast<double>(i + 1));
    const auto& a = ev.alternatives[i];
    if (a.select.rest) {
      if (rest) throw Error("only one alternative may collect the rest");
      rest = i;
      regions.emplace_back(reg, std::vector<std::uint64_t>{});
      continue;
    }
    regions.push_back(select(reg, a.select, &parent));
  }
  if (rest) {
    EpistemicState covered(reg, {});
    for (std::size_t i = 0; i < regions.size(); ++i)
      if (i != *rest) covered = set_union(covered, regions[i]);
    regions[*rest] = set_difference(parent, covered);
  }
  std::map<std::size_t, EpistemicState> pre;
  std::map<std::size_t, KnowabilityLevel> levels;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    pre.emplace(i, regions[i]);
    levels.emplace(i, ev.level);
  }
  auto regions_copy = regions;
  PropertySpec prop(ev.property, values, [reg, regions_copy](const ExactState& z) -> std::optional<std::size_t> {
    const auto code = reg->encode(z);
    for (std::size_t i = 0; i < regions_copy.size(); ++i)
      if (regions_copy[i].contains(code)) return i;
    return std::nullopt;
  });
  Alternatives out{reg, parent, make_alternatives(parent, prop, pre, levels), {}};
  for (const auto& alt : out.set.alternatives) out.labels.push_back(ev.alternatives[alt.value].label);
  return out;
}

inline std::optional<EvolutionRule> build_rule(const Scenario& sc, const RegistryPtr& reg) {
  const auto& ev = *sc.evolution;
  if (ev.permutation) {
    if (ev.permutation->size() != reg->state_count()) throw Error("permutation must list every exact state");
    return EvolutionRule::permutation(reg, *ev.permutation);
  }
  if (ev.shift) {
    const auto n = static_cast<std::int64_t>(reg->state_count());
    std::vector<std::uint64_t> perm;
    for (std::int64_t c = 0; c < n; ++c) perm.push_back(static_cast<std::uint64_t>((((c + *ev.shift) % n) + n) % n));
    return EvolutionRule::permutation(reg, perm);
  }
  return std::nullopt;
}

struct Distribution {
  std::vector<std::string> labels;
  std::vector<double> probabilities;
  std::optional<std::vector<std::string>> exact;
  std::vector<std::string> rules;
  ContextNetwork network;  // resolved network when from a context
};

inline ContextNetwork resolved_network(const ContextDef& c, const Overrides& o) {
  auto net = c.network;
  const bool contingent =
      std::any_of(net.layers.begin(), net.layers.end(), [](const Layer& l) { return l.level == KnowabilityLevel::contingent; });
  if (!contingent) return net;
  const auto flag = o.path_knowledge_reachable ? o.path_knowledge_reachable : c.path_knowledge_reachable;
  if (!flag) return net;
  return reduce_by_consistency(net, *flag);
}

inline Distribution distribution(const Scenario& sc, const Overrides& o, double tol) {
  Distribution d;
  if (sc.context) {
    d.network = resolved_network(*sc.context, o);
    const auto p = propagate(d.network, tol);
    for (double l : d.network.layers.back().labels) d.labels.push_back(format_label(l));
    d.probabilities = p.distribution;
    if (p.exact) {
      d.exact.emplace();
      for (const auto& q : *p.exact) d.exact->push_back(q.str());
    }
    d.rules = p.rules;
    return d;
  }
  if (sc.statespace && sc.evolution) {
    const auto alts = build_alternatives(sc);
    d.labels = alts.labels;
    d.exact.emplace();
    for (const auto& q : probabilities(alts.set)) {
      d.probabilities.push_back(to_double(q));
      d.exact->push_back(to_string(q));
    }
    d.rules = {"volume"};
    return d;
  }
  throw Error("scenario has no distribution: add a context or an evolution section");
}

inline std::string csv_bool(bool b) { return b ? "true" : "false"; }

inline void run_propagate(const Scenario& sc, const Overrides& o, double tol, RunResult& res) {
  const auto d = distribution(sc, o, tol);
  std::ostringstream csv;
  csv << "label,probability,exact\n";
  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < d.labels.size(); ++j) {
    const std::string ex = d.exact ? (*d.exact)[j] : "";
    csv << d.labels[j] << ',' << format_number(d.probabilities[j]) << ',' << ex << '\n';
    rows.push_back({d.labels[j], format_number(d.probabilities[j]), ex});
  }
  res.csv = csv.str();
  res.output["labels"] = d.labels;
  res.output["distribution"] = d.probabilities;
  res.output["exact"] = d.exact ? json(*d.exact) : json(nullptr);
  res.output["rules"] = d.rules;
  if (sc.context) {
    json levels = json::array();
    for (const auto& l : d.network.layers)
      levels.push_back({{"property", l.property}, {"level", to_int(l.level)}, {"forced_reduction", l.forced_reduction}});
    res.output["layers"] = levels;
  }
  double total = 0;
  for (double q : d.probabilities) total += q;
  res.checks.push_back({"probabilities sum to 1", std::abs(total - 1.0) <= tol});
  res.summary = table({"label", "probability", "exact"}, rows);
  std::string rules;
  for (const auto& r : d.rules) rules += (rules.empty() ? "" : ",") + r;
  res.summary += "rules: " + rules + "\n";
}

inline void run_montecarlo(const Scenario& sc, const Overrides& o, double tol, RunResult& res) {
  const auto d = distribution(sc, o, tol);
  const std::uint64_t n = o.n.value_or(sc.run.n);
  const auto r = borel_trial(d.probabilities, n, res.seed);
  res.csv = frequency_csv(d.labels, r);
  res.output["labels"] = d.labels;
  res.output["probabilities"] = r.probabilities;
  res.output["counts"] = r.counts;
  res.output["frequencies"] = r.frequencies;
  res.output["n"] = r.n;
  json bands = json::array(), within = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < r.probabilities.size(); ++j) {
    bands.push_back(r.band(j));
    within.push_back(r.within_band(j));
    res.checks.push_back({"outcome " + d.labels[j] + " within 3 sigma", r.within_band(j)});
    rows.push_back({d.labels[j], format_number(r.probabilities[j]), format_number(r.frequencies[j]), format_number(r.band(j)),
                    csv_bool(r.within_band(j))});
  }
  res.output["bands"] = bands;
  res.output["within_band"] = within;
  res.output["all_within_band"] = r.all_within_band();
  res.summary = table({"label", "probability", "frequency", "band", "within"}, rows);
  res.summary += "n=" + std::to_string(n) + " seed=" + std::to_string(res.seed) + "\n";
}

inline void run_hilbert(const Scenario& sc, const Overrides& o, double tol, RunResult& res) {
  if (!sc.context) throw Error("hilbert needs a context section");
  const auto net = resolved_network(*sc.context, o);
  const auto space = build_space(net, sc.context->joint, sc.context->simultaneous);
  res.output["dimension"] = space.dimension;
  res.output["type"] = to_string(space.type);
  json bases = json::array();
  for (const auto& b : space.bases)
    bases.push_back({{"property", b.property},
                     {"labels", b.labels},
                     {"subspace_dimensions", b.subspace_dimensions()},
                     {"vectors", matrix_json(b.vectors())}});
  res.output["bases"] = bases;
  json changes = json::array();
  for (const auto& c : space.changes) changes.push_back({{"from", c.from}, {"to", c.to}, {"matrix", matrix_json(c.matrix)}});
  res.output["changes"] = changes;
  json state = json::array();
  for (Eigen::Index i = 0; i < space.state.size(); ++i) state.push_back(pair(space.state(i)));
  res.output["state"] = state;
  if (space.type != ContextType::simultaneous) {
    const auto p4 = principle4_probabilities(space);
    res.output["principle4"] = p4;
    const auto prop = propagate(net, tol);
    double dev = 0;
    for (std::size_t j = 0; j < p4.size() && j < prop.distribution.size(); ++j)
      dev = std::max(dev, std::abs(p4[j] - prop.distribution[j]));
    res.output["principle4_deviation"] = dev;
    res.checks.push_back({"principle 4 matches propagate", dev <= 1e-12});
  }
  if (space.type == ContextType::non_simultaneous && net.layers[0].size() == 2) res.output["basis_angle"] = basis_angle(space);

  std::vector<OperatorDef> defs = sc.context->operators;
  if (defs.empty())
    for (const auto& l : net.layers) defs.push_back({l.property, {}});
  std::vector<PropertyOperator> ops;
  json opj = json::array();
  for (const auto& d : defs) {
    ops.push_back(make_operator(space, d.property, d.contractions));
    json ranks = json::array();
    for (const auto& e : ops.back().eigenspaces) ranks.push_back(e.cols());
    opj.push_back({{"property", d.property},
                   {"eigenvalues", ops.back().eigenvalues},
                   {"eigenspace_dimensions", ranks},
                   {"matrix", matrix_json(ops.back().matrix)}});
  }
  res.output["operators"] = opj;
  std::ostringstream csv;
  csv << "property_a,property_b,commutator_norm,commuting\n";
  json comm = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t a = 0; a < ops.size(); ++a)
    for (std::size_t b = a + 1; b < ops.size(); ++b) {
      const auto c = commutator(ops[a], ops[b]);
      // Norms below 1e-12 are numerical zero; printing them would make golden files platform dependent.
      const double shown = c.norm < kBasisTolerance ? 0.0 : c.norm;
      csv << defs[a].property << ',' << defs[b].property << ',' << format_number(shown) << ',' << csv_bool(c.commuting) << '\n';
      comm.push_back({{"a", defs[a].property}, {"b", defs[b].property}, {"norm", shown}, {"commuting", c.commuting}});
      rows.push_back({defs[a].property, defs[b].property, format_number(shown), csv_bool(c.commuting)});
    }
  res.output["commutators"] = comm;
  res.csv = csv.str();
  res.summary = "dimension " + std::to_string(space.dimension) + ", type (" + to_string(space.type) + ")\n";
  res.summary += table({"property_a", "property_b", "norm", "commuting"}, rows);
}

inline void run_uniqueness(const Scenario& sc, RunResult& res) {
  const UniquenessDef u = sc.uniqueness.value_or(UniquenessDef{});
  const auto rep = uniqueness_report(u.shapes, u.candidates, u.starts, res.seed);
  std::ostringstream csv;
  csv << "candidate,M,M_prime,padded,variables,equations,independent_rows,solutions,regular_solutions,"
         "degenerate_solutions,feasible,dof_p,dof_p_prime,dof_total,required_p,required_p_prime,required_total,"
         "levels_distinguished,pass,reason\n";
  json rows = json::array();
  std::vector<std::vector<std::string>> trows;
  for (const auto& row : rep.rows) {
    const auto& r = row.report;
    const bool has_dof = r.feasible;
    auto dof = [&](int v) { return has_dof ? std::to_string(v) : std::string(); };
    csv << r.candidate << ',' << r.m << ',' << r.mp << ',' << csv_bool(r.padded) << ',' << r.variables << ',' << r.equations << ','
        << r.independent_rows << ',' << r.solutions << ',' << r.regular_solutions << ',' << r.degenerate_solutions << ','
        << csv_bool(r.feasible) << ',' << dof(r.dof.p) << ',' << dof(r.dof.pp) << ',' << dof(r.dof.total) << ','
        << r.required_p << ',' << r.required_pp << ',' << r.required_total << ',' << csv_bool(r.levels_distinguished) << ','
        << csv_bool(r.pass) << ',' << r.reason << '\n';
    json jr = {{"candidate", r.candidate},
               {"M", r.m},
               {"M_prime", r.mp},
               {"padded", r.padded},
               {"variables", r.variables},
               {"equations", r.equations},
               {"independent_rows", r.independent_rows},
               {"solutions", r.solutions},
               {"regular_solutions", r.regular_solutions},
               {"degenerate_solutions", r.degenerate_solutions},
               {"feasible", r.feasible},
               {"required_p", r.required_p},
               {"required_p_prime", r.required_pp},
               {"required_total", r.required_total},
               {"levels_distinguished", r.levels_distinguished},
               {"pass", r.pass},
               {"reason", r.reason}};
    jr["dof_p"] = has_dof ? json(r.dof.p) : json(nullptr);
    jr["dof_p_prime"] = has_dof ? json(r.dof.pp) : json(nullptr);
    jr["dof_total"] = has_dof ? json(r.dof.total) : json(nullptr);
    if (row.multiplicativity_deviation) jr["multiplicativity_deviation"] = *row.multiplicativity_deviation;
    rows.push_back(jr);
    trows.push_back({r.candidate, "(" + std::to_string(r.m) + "," + std::to_string(r.mp) + ")" + (r.padded ? " padded" : ""),
                     dof(r.dof.p), dof(r.dof.pp), dof(r.dof.total), r.pass ? "pass" : "fail", r.reason});
  }
  res.csv = csv.str();
  res.output["rows"] = rows;
  res.output["passes_everywhere"] = rep.passes_everywhere;
  res.output["born_only"] = rep.born_only;
  res.checks.push_back({"only |a|^2 passes", rep.born_only});
  res.summary = table({"candidate", "shape", "dof_P", "dof_P'", "dof_total", "verdict", "reason"}, trows);
  res.summary += rep.born_only ? "verdict: only |a|^2 satisfies every condition\n"
                               : "verdict: regression, |a|^2 is not the unique surviving candidate\n";
  if (!rep.born_only) {
    res.exit_code = 1;
    res.message = "uniqueness regression: |a|^2 is not the unique surviving candidate";
  }
}

inline void run_validate(const Scenario& sc, const Overrides& o, double tol, RunResult& res) {
  std::vector<std::pair<std::string, std::string>> issues;  // check, detail
  std::vector<std::pair<std::string, std::string>> passed;
  auto guard = [&](const std::string& check, auto&& fn) {
    try {
      fn();
      passed.emplace_back(check, "");
    } catch (const Error& e) {
      issues.emplace_back(check, e.what());
    }
  };
  if (sc.statespace) {
    guard("statespace", [&] {
      auto reg = make_registry(sc.statespace->attributes, sc.statespace->objects);
      res.output["state_count"] = reg->state_count();
    });
  }
  if (sc.evolution) {
    guard("evolution", [&] {
      const auto alts = build_alternatives(sc);
      json probs = json::array();
      if (sc.evolution->level == KnowabilityLevel::decided)
        for (const auto& q : probabilities(alts.set)) probs.push_back(to_string(q));
      res.output["alternatives"] = alts.labels;
      res.output["alternative_probabilities"] = probs;
      if (auto rule = build_rule(sc, alts.registry)) {
        const auto inv = check_invariance(alts.parent, alts.set, *rule, sc.evolution->steps);
        res.output["invariance_max_deviation"] = to_string(inv.max_deviation);
      }
    });
  }
  if (sc.context) {
    guard("context", [&] {
      const auto net = resolved_network(*sc.context, o);
      const auto found = validate_context(net, tol);
      if (!found.empty()) throw Error(found.front());
    });
  }
  if (sc.uniqueness) passed.emplace_back("uniqueness", "");
  std::ostringstream csv;
  csv << "check,status,detail\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& [c, d] : passed) {
    csv << c << ",ok,\n";
    rows.push_back({c, "ok", ""});
    res.checks.push_back({c, true});
  }
  json issue_json = json::array();
  for (const auto& [c, d] : issues) {
    csv << c << ",error,\"" << d << "\"\n";
    rows.push_back({c, "error", d});
    res.checks.push_back({c, false});
    issue_json.push_back({{"check", c}, {"detail", d}});
  }
  res.output["valid"] = issues.empty();
  res.output["issues"] = issue_json;
  res.csv = csv.str();
  res.summary = table({"check", "status", "detail"}, rows);
  if (!issues.empty()) {
    res.exit_code = 1;
    res.message = issues.front().second;
  }
}

}  // namespace detail

// Runs one command. Domain errors propagate as Error; the CLI maps them to
// exit code 1.
inline RunResult run(const Scenario& sc, const Overrides& o = {}) {
  RunResult res;
  res.command = o.command.value_or(sc.run.command);
  if (std::find(kCommands.begin(), kCommands.end(), res.command) == kCommands.end())
    throw SchemaError("--command: unknown command '" + res.command + "'");
  res.scenario = sc.name;
  res.seed = o.seed.value_or(sc.run.seed);
  const double tol = o.tolerance.value_or(sc.run.tolerance);
  if (!(tol > 0)) throw SchemaError("--tolerance: must be positive");
  res.output["command"] = res.command;
  res.output["scenario"] = sc.name;
  res.output["seed"] = res.seed;
  res.output["tolerance"] = tol;
  if (res.command == "propagate") detail::run_propagate(sc, o, tol, res);
  else if (res.command == "montecarlo") detail::run_montecarlo(sc, o, tol, res);
  else if (res.command == "hilbert") detail::run_hilbert(sc, o, tol, res);
  else if (res.command == "uniqueness") detail::run_uniqueness(sc, res);
  else detail::run_validate(sc, o, tol, res);
  json checks = json::array();
  for (const auto& [name, ok] : res.checks) checks.push_back({{"check", name}, {"pass", ok}});
  res.output["checks"] = checks;
  return res;
}

struct WrittenFiles {
  std::filesystem::path csv;
  std::filesystem::path json;
};

inline WrittenFiles write_outputs(const RunResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WrittenFiles w{dir / (res.scenario + "." + res.command + ".csv"), dir / (res.scenario + "." + res.command + ".json")};
  std::ofstream c(w.csv, std::ios::binary);
  c << res.csv;
  std::ofstream j(w.json, std::ios::binary);
  j << res.output.dump(2) << '\n';
  if (!c || !j) throw Error("cannot write outputs to '" + dir.string() + "'");
  return w;
}

}  // namespace epistemic::scenario
