#pragma once

// Contextual vector spaces: one orthonormal basis (or family of orthogonal
// subspaces) per observed property, property operators, commutators,
// reciprocal contexts and the operator-to-property back-construction.
//
// Convention: the final property's basis is the standard basis. Inner
// products are linear in the first argument, <u, v> = v^dagger u, so that
// a_jj' = <P_j, P'_j'>.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epistemic/context.hpp"
#include "epistemic/error.hpp"

namespace epistemic {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kBasisTolerance = 1e-12;
inline constexpr double kNeutralTolerance = 1e-9;
inline constexpr double kDegenerateTolerance = 1e-9;

enum class ContextType { unknowable_then_decided, simultaneous, non_simultaneous };

inline std::string to_string(ContextType t) {
  switch (t) {
    case ContextType::unknowable_then_decided: return "a";
    case ContextType::simultaneous: return "b";
    case ContextType::non_simultaneous: return "c";
  }
  return "?";
}

enum class PairClass { unspecified, independent, mutually_defined };

// v_jj' for a pair of decided properties; theta optional phases.
struct JointVolumeTable {
  std::vector<std::vector<double>> v;
  std::optional<std::vector<std::vector<double>>> theta;
  PairClass pair_class = PairClass::unspecified;
};

struct PropertyBasis {
  std::string property;
  std::vector<double> labels;
  std::vector<CMatrix> subspaces;  // orthonormal columns, one block per value

  // All basis vectors side by side (value order).
  CMatrix vectors() const {
    Eigen::Index cols = 0;
    for (const auto& s : subspaces) cols += s.cols();
    CMatrix out(subspaces.front().rows(), cols);
    Eigen::Index c = 0;
    for (const auto& s : subspaces) {
      out.middleCols(c, s.cols()) = s;
      c += s.cols();
    }
    return out;
  }
  std::vector<Eigen::Index> subspace_dimensions() const {
    std::vector<Eigen::Index> d;
    for (const auto& s : subspaces) d.push_back(s.cols());
    return d;
  }
};

struct BasisChange {
  std::size_t from = 0;
  std::size_t to = 0;
  CMatrix matrix;  // matrix(j, j') = <from_j, to_j'>
};

struct ContextSpace {
  Eigen::Index dimension = 0;
  ContextType type = ContextType::unknowable_then_decided;
  std::vector<PropertyBasis> bases;  // one per layer
  std::vector<BasisChange> changes;
  CVector state;  // contextual state over the first property

  const PropertyBasis& basis(const std::string& property) const {
    for (const auto& b : bases)
      if (b.property == property) return b;
    throw Error("property '" + property + "' has no basis in this space");
  }
};

inline std::complex<double> inner(const CVector& u, const CVector& v) { return v.dot(u); }

inline double unitarity_defect(const CMatrix& u) {
  return (u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

inline bool is_orthonormal(const CMatrix& cols, double tol = kBasisTolerance) { return unitarity_defect(cols) <= tol; }

inline ContextType classify(const ContextNetwork& net, bool simultaneous) {
  if (net.layers.size() < 2) throw Error("a context space needs at least two properties");
  const auto decided = KnowabilityLevel::decided;
  const bool chain = std::all_of(net.layers.begin(), net.layers.end() - 1,
                                 [](const Layer& l) { return l.level == KnowabilityLevel::unknowable; });
  if (chain && net.layers.back().level == decided) return ContextType::unknowable_then_decided;
  if (net.layers.size() == 2 && net.layers[0].level == decided && net.layers[1].level == decided)
    return simultaneous ? ContextType::simultaneous : ContextType::non_simultaneous;
  throw Error("context is not of a representable type");
}

namespace detail {

inline CMatrix to_matrix(const AmplitudeMatrix& a) {
  CMatrix m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.front().size()));
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t k = 0; k < a[j].size(); ++k) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = a[j][k].value;
  return m;
}

inline CVector to_vector(const AmplitudeRow& a) {
  CVector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) v(static_cast<Eigen::Index>(j)) = a[j].value;
  return v;
}

inline PropertyBasis single_vectors(const Layer& l, const CMatrix& cols) {
  PropertyBasis b{l.property, l.labels, {}};
  for (Eigen::Index j = 0; j < cols.cols(); ++j) b.subspaces.push_back(cols.col(j));
  return b;
}

inline void check_joint_volumes(const JointVolumeTable& t, std::size_t m) {
  if (t.v.size() != m) throw Error("joint volume table has wrong dimensions");
  double total = 0;
  for (const auto& r : t.v) {
    if (r.size() != m) throw Error("joint volume table has wrong dimensions");
    for (double x : r) {
      if (x < 0) throw Error("joint volumes must be nonnegative");
      total += x;
    }
  }
  if (std::abs(total - 1.0) > kNeutralTolerance) throw Error("joint volumes must sum to 1");
  const double share = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    double row = 0, col = 0;
    for (std::size_t k = 0; k < m; ++k) {
      row += t.v[j][k];
      col += t.v[k][j];
    }
    if (std::abs(row - share) > kNeutralTolerance || std::abs(col - share) > kNeutralTolerance)
      throw Error("no orthonormal second basis exists");
  }
}

inline bool all_equal(const std::vector<std::vector<double>>& v) {
  for (const auto& r : v)
    for (double x : r)
      if (std::abs(x - v[0][0]) > kNeutralTolerance) return false;
  return true;
}

inline bool is_scaled_permutation(const std::vector<std::vector<double>>& v) {
  for (const auto& r : v) {
    int nonzero = 0;
    for (double x : r) nonzero += x > kNeutralTolerance;
    if (nonzero != 1) return false;
  }
  return true;
}

// G(j, j') = sqrt(M v_jj') exp(i theta_jj').
inline CMatrix gram(const std::vector<std::vector<double>>& v, const std::vector<std::vector<double>>& theta) {
  const auto m = static_cast<Eigen::Index>(v.size());
  CMatrix g(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k)
      g(j, k) = std::polar(std::sqrt(static_cast<double>(m) * v[j][k]), theta[j][k]);
  return g;
}

inline std::optional<std::vector<std::vector<double>>> default_phases(const JointVolumeTable& t) {
  const std::size_t m = t.v.size();
  std::vector<std::vector<double>> theta(m, std::vector<double>(m, 0.0));
  if (all_equal(t.v)) {
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k)
        theta[j][k] = 2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(m);
    return theta;
  }
  if (m * m > 16) return std::nullopt;
  const std::uint32_t patterns = 1u << (m * m);
  for (std::uint32_t bitsel = 0; bitsel < patterns; ++bitsel) {
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) theta[j][k] = (bitsel >> (j * m + k)) & 1u ? std::numbers::pi : 0.0;
    if (unitarity_defect(gram(t.v, theta)) <= kNeutralTolerance) return theta;
  }
  return std::nullopt;
}

}  // namespace detail

inline ContextSpace build_space(const ContextNetwork& net, const std::optional<JointVolumeTable>& joint = std::nullopt,
                                bool simultaneous = false) {
  require_valid(net);
  ContextSpace space;
  space.type = classify(net, simultaneous);
  const auto& layers = net.layers;

  if (space.type == ContextType::unknowable_then_decided) {
    std::size_t d = 0;
    for (const auto& l : layers) d = std::max(d, l.size());
    space.dimension = static_cast<Eigen::Index>(d);
    if (layers.back().size() != d) throw Error("layer " + std::to_string(layers.size() - 1) + " requires virtual-value padding");
    std::vector<CMatrix> basis(layers.size());
    basis.back() = CMatrix::Identity(space.dimension, space.dimension);
    for (std::size_t k = layers.size() - 1; k-- > 0;) {
      basis[k] = basis[k + 1] * detail::to_matrix(net.transitions[k]).transpose();
      if (!is_orthonormal(basis[k])) throw Error("amplitude matrix violates unitarity conditions");
    }
    for (std::size_t k = 0; k < layers.size(); ++k) space.bases.push_back(detail::single_vectors(layers[k], basis[k]));
    space.state = basis[0] * detail::to_vector(net.initial);
    for (std::size_t k = 0; k + 1 < layers.size(); ++k)
      space.changes.push_back({k, k + 1, basis[k + 1].adjoint() * basis[k]});
    for (auto& c : space.changes) c.matrix.transposeInPlace();
    return space;
  }

  const std::size_t m = layers[0].size();
  const std::size_t mp = layers[1].size();

  if (space.type == ContextType::simultaneous) {
    space.dimension = static_cast<Eigen::Index>(m * mp);
    const CMatrix id = CMatrix::Identity(space.dimension, space.dimension);
    PropertyBasis p{layers[0].property, layers[0].labels, {}};
    PropertyBasis pp{layers[1].property, layers[1].labels, {}};
    for (std::size_t j = 0; j < m; ++j) {
      CMatrix s(space.dimension, static_cast<Eigen::Index>(mp));
      for (std::size_t k = 0; k < mp; ++k) s.col(static_cast<Eigen::Index>(k)) = id.col(static_cast<Eigen::Index>(j * mp + k));
      p.subspaces.push_back(s);
    }
    for (std::size_t k = 0; k < mp; ++k) {
      CMatrix s(space.dimension, static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) s.col(static_cast<Eigen::Index>(j)) = id.col(static_cast<Eigen::Index>(j * mp + k));
      pp.subspaces.push_back(s);
    }
    space.bases = {p, pp};
    space.state = CVector::Zero(space.dimension);
    for (std::size_t j = 0; j < m; ++j) space.state(static_cast<Eigen::Index>(j * mp)) = net.initial[j].value;
    return space;
  }

  if (m != mp) throw Error("no reciprocal basis");
  if (!joint) throw Error("joint volume table required for non-simultaneous decided properties");
  detail::check_joint_volumes(*joint, m);
  if (m == 2) {
    const auto& v = joint->v;
    if (std::abs(v[0][1] - v[1][0]) > kNeutralTolerance || std::abs(v[0][0] - v[1][1]) > kNeutralTolerance)
      throw Error("no orthonormal second basis exists");
  } else {
    const bool independent = detail::all_equal(joint->v);
    const bool mutual = detail::is_scaled_permutation(joint->v);
    if (!independent && !mutual) throw Error("unsupported pair class");
    if (joint->pair_class == PairClass::independent && !independent) throw Error("pair declared independent but joint volumes differ");
    if (joint->pair_class == PairClass::mutually_defined && !mutual) throw Error("pair declared mutually defined but joint volumes overlap");
  }
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k)
      if (std::abs(born(net.transitions[0][j][k].value) - static_cast<double>(m) * joint->v[j][k]) > kNeutralTolerance)
        throw Error("context not neutral");
  auto theta = joint->theta ? joint->theta : detail::default_phases(*joint);
  if (!theta) throw Error("no orthonormal second basis exists");
  const CMatrix g = detail::gram(joint->v, *theta);
  if (unitarity_defect(g) > kNeutralTolerance) throw Error("no orthonormal second basis exists");
  space.dimension = static_cast<Eigen::Index>(m);
  const CMatrix first = CMatrix::Identity(space.dimension, space.dimension);
  const CMatrix second = g.conjugate();  // column j' holds P'_j', since <e_j, P'_j'> = conj(P'_j'(j))
  space.bases = {detail::single_vectors(layers[0], first), detail::single_vectors(layers[1], second)};
  space.changes.push_back({0, 1, g});
  space.state = detail::to_vector(net.initial);
  return space;
}

// |<S_C, P_j>|^2 for the final property, where S_C is the contextual state
// just before the final decision. Decided intermediate properties reduce
// the state first.
inline std::vector<double> principle4_probabilities(const ContextSpace& space) {
  const auto& last = space.bases.back();
  std::vector<double> q(last.subspaces.size(), 0.0);
  auto accumulate = [&](const CVector& s, double w) {
    for (std::size_t k = 0; k < q.size(); ++k) q[k] += w * (last.subspaces[k].adjoint() * s).squaredNorm();
  };
  if (space.type == ContextType::unknowable_then_decided) {
    accumulate(space.state, 1.0);
  } else {
    const auto& first = space.bases.front();
    for (std::size_t j = 0; j < first.subspaces.size(); ++j) {
      const CVector proj = first.subspaces[j] * (first.subspaces[j].adjoint() * space.state);
      const double w = proj.squaredNorm();
      if (w == 0.0) continue;
      accumulate(first.subspaces[j].col(0), w);
    }
  }
  return q;
}

inline double state_space_angle_map(double phi) {
  if (!(phi >= 0.0 && phi <= std::numbers::pi)) throw Error("angle must lie in [0, pi]");
  return phi / 2.0;
}

// Angle between the first vectors of the two bases of a two-property space.
inline double basis_angle(const ContextSpace& space) {
  const CVector a = space.bases[0].subspaces[0].col(0);
  const CVector b = space.bases[1].subspaces[0].col(0);
  return std::acos(std::clamp(std::abs(inner(a, b)), 0.0, 1.0));
}

namespace detail {

// Gauss-Jordan inverse; nullopt when singular.
template <class Cx>
std::optional<std::vector<std::vector<Cx>>> invert(std::vector<std::vector<Cx>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<Cx>> inv(n, std::vector<Cx>(n, Cx(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = Cx(1);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    if constexpr (std::is_same_v<Cx, ExactComplex>) {
      while (p < n && a[p][c].is_zero()) ++p;
      if (p == n) return std::nullopt;
    } else {
      for (std::size_t r = c + 1; r < n; ++r)
        if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
      if (std::abs(a[p][c]) < 1e-12) return std::nullopt;
    }
    std::swap(a[p], a[c]);
    std::swap(inv[p], inv[c]);
    const Cx d = Cx(1) / a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] = a[c][k] * d;
      inv[c][k] = inv[c][k] * d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const Cx f = a[r][c];
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] = a[r][k] - f * a[c][k];
        inv[r][k] = inv[r][k] - f * inv[c][k];
      }
    }
  }
  return inv;
}

template <class Cx>
ContextNetwork reciprocal_impl(const ContextNetwork& net) {
  const std::size_t m = net.layers[0].size();
  std::vector<std::vector<Cx>> a(m);
  for (std::size_t j = 0; j < m; ++j)
    for (const auto& x : net.transitions[0][j]) a[j].push_back(x.template as<Cx>());
  auto inv = invert(a);
  if (!inv) throw Error("reciprocal undefined");
  ContextNetwork out;
  out.name = net.name;
  out.layers = {net.layers[1], net.layers[0]};
  out.layers[0].level = net.layers[0].level;
  out.layers[1].level = net.layers[1].level;
  out.layers[0].forced_reduction = net.layers[0].forced_reduction;
  out.layers[1].forced_reduction = net.layers[1].forced_reduction;
  for (std::size_t k = 0; k < m; ++k) {
    Cx s(0);
    for (std::size_t j = 0; j < m; ++j) s += net.initial[j].template as<Cx>() * a[j][k];
    out.initial.push_back(Amplitude(s));
  }
  AmplitudeMatrix r(m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) r[j].push_back(Amplitude((*inv)[j][k]));
  out.transitions = {std::move(r)};
  return out;
}

}  // namespace detail

// Reverses the observation order: a~ = a^T A, A~ = A^{-1}. Levels stay with
// their positions in the sequence.
inline ContextNetwork reciprocal(const ContextNetwork& net) {
  if (net.layers.size() != 2 || net.transitions.size() != 1) throw Error("reciprocal needs a two-property context");
  if (net.layers[0].size() != net.layers[1].size()) throw Error("reciprocal context exists if and only if M = M'");
  if (net.initial.size() != net.layers[0].size()) throw Error("initial amplitudes do not match the first layer");
  return net.exact() ? detail::reciprocal_impl<ExactComplex>(net) : detail::reciprocal_impl<Complex>(net);
}

struct PropertyOperator {
  CMatrix matrix;
  std::vector<double> eigenvalues;
  std::vector<CMatrix> eigenspaces;
};

struct ValueContraction {
  std::vector<std::size_t> values;
  double label = 0;
};

// P = sum_j p_j Pi_j over the property's subspaces. Contractions merge
// several values into one eigenvalue with the direct sum of their subspaces.
inline PropertyOperator make_operator(const ContextSpace& space, const std::string& property,
                                      const std::vector<ValueContraction>& contractions = {}) {
  const auto& b = space.basis(property);
  std::vector<std::pair<double, CMatrix>> blocks;
  std::set<std::size_t> used;
  for (const auto& c : contractions) {
    Eigen::Index cols = 0;
    for (auto j : c.values) {
      if (j >= b.subspaces.size() || !used.insert(j).second) throw Error("invalid value contraction");
      cols += b.subspaces[j].cols();
    }
    CMatrix s(space.dimension, cols);
    Eigen::Index at = 0;
    for (auto j : c.values) {
      s.middleCols(at, b.subspaces[j].cols()) = b.subspaces[j];
      at += b.subspaces[j].cols();
    }
    blocks.emplace_back(c.label, s);
  }
  for (std::size_t j = 0; j < b.subspaces.size(); ++j)
    if (!used.contains(j)) blocks.emplace_back(b.labels[j], b.subspaces[j]);
  std::set<double> labels;
  for (const auto& [p, s] : blocks)
    if (!labels.insert(p).second) throw Error("property values must be distinct");
  PropertyOperator op;
  op.matrix = CMatrix::Zero(space.dimension, space.dimension);
  for (const auto& [p, s] : blocks) {
    op.matrix += p * s * s.adjoint();
    op.eigenvalues.push_back(p);
    op.eigenspaces.push_back(s);
  }
  if ((op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff() > kBasisTolerance) throw Error("operator is not self-adjoint");
  return op;
}

inline double operator_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

struct Commutator {
  CMatrix matrix;
  double norm = 0;
  bool commuting = false;
};

inline Commutator commutator(const PropertyOperator& a, const PropertyOperator& b) {
  if (a.matrix.rows() != b.matrix.rows()) throw Error("operators act on spaces of different dimension");
  Commutator c;
  c.matrix = a.matrix * b.matrix - b.matrix * a.matrix;
  c.norm = operator_norm(c.matrix);
  c.commuting = c.norm < kBasisTolerance;
  return c;
}

struct PropertyConstruction {
  JointVolumeTable volumes;
  std::vector<double> labels;
  ContextNetwork network;  // the given context with the new property appended
  std::vector<std::string> notes;
};

// Reads a new decided property off a self-adjoint operator with distinct
// eigenvalues: v_jj' = |<P_j, v_j'>|^2 / M against the last property of net.
inline PropertyConstruction operator_to_property(const CMatrix& op, const ContextSpace& space,
                                                 const ContextNetwork& net, const std::string& new_property = "P'") {
  if (op.rows() != space.dimension || op.cols() != space.dimension) throw Error("operator dimension does not match space");
  if ((op - op.adjoint()).cwiseAbs().maxCoeff() > kBasisTolerance) throw Error("operator is not self-adjoint");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(op);
  const auto& ev = es.eigenvalues();
  for (Eigen::Index i = 1; i < ev.size(); ++i)
    if (ev(i) - ev(i - 1) < kDegenerateTolerance) throw Error("cannot define distinct property values");
  const auto& home = space.bases.back();
  const CMatrix p = home.vectors();
  if (p.cols() != space.dimension) throw Error("the home property does not span the space");
  const auto m = static_cast<std::size_t>(p.cols());

  // Order eigenvectors by the home value they overlap most, then by eigenvalue.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ev.size()));
  std::vector<Eigen::Index> best(order.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    order[static_cast<std::size_t>(k)] = k;
    Eigen::Index arg = 0;
    double top = -1;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double o = std::norm(inner(p.col(j), es.eigenvectors().col(k)));
      if (o > top + kDegenerateTolerance) {
        top = o;
        arg = j;
      }
    }
    best[static_cast<std::size_t>(k)] = arg;
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return best[static_cast<std::size_t>(a)] < best[static_cast<std::size_t>(b)];
  });

  PropertyConstruction out;
  out.volumes.v.assign(m, std::vector<double>(m, 0.0));
  out.volumes.theta = std::vector<std::vector<double>>(m, std::vector<double>(m, 0.0));
  AmplitudeMatrix a(m);
  for (std::size_t kk = 0; kk < m; ++kk) {
    const Eigen::Index k = order[kk];
    out.labels.push_back(ev(k));
  }
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t kk = 0; kk < m; ++kk) {
      const auto z = inner(p.col(static_cast<Eigen::Index>(j)), es.eigenvectors().col(order[kk]));
      out.volumes.v[j][kk] = std::norm(z) / static_cast<double>(m);
      (*out.volumes.theta)[j][kk] = std::arg(z);
      a[j].push_back(Amplitude(z));
    }
  out.network = net;
  out.network.layers.push_back(Layer{new_property, KnowabilityLevel::decided, out.labels, {}, false});
  out.network.transitions.push_back(std::move(a));
  out.notes.push_back("regions not uniquely determined");
  return out;
}

}  // namespace epistemic
