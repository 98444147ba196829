#pragma once

// Constraint systems for candidate probability maps f and a numerical
// estimate of their solution-manifold dimension. Complex amplitudes are split
// into real pairs; Jacobians come from forward-mode dual numbers and
// solutions from Levenberg-Marquardt restarts.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "epistemic/context.hpp"
#include "epistemic/error.hpp"
#include "epistemic/evolution.hpp"
#include "epistemic/rng.hpp"

namespace epistemic {

inline constexpr int kMaxSystemVariables = 64;
inline constexpr double kSolutionResidual = 1e-10;
inline constexpr double kRankTolerance = 1e-8;

// Forward-mode dual number with a fixed gradient capacity.
struct Dual {
  double v = 0;
  std::array<double, kMaxSystemVariables> d{};
  int n = 0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(implicit)
  static Dual variable(double value, int index, int count) {
    Dual x(value);
    x.n = count;
    x.d[static_cast<std::size_t>(index)] = 1.0;
    return x;
  }

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.v + b.v);
    r.n = std::max(a.n, b.n);
    for (int i = 0; i < r.n; ++i) r.d[static_cast<std::size_t>(i)] = a.d[static_cast<std::size_t>(i)] + b.d[static_cast<std::size_t>(i)];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.v - b.v);
    r.n = std::max(a.n, b.n);
    for (int i = 0; i < r.n; ++i) r.d[static_cast<std::size_t>(i)] = a.d[static_cast<std::size_t>(i)] - b.d[static_cast<std::size_t>(i)];
    return r;
  }
  friend Dual operator-(const Dual& a) { return Dual(0.0) - a; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    r.n = std::max(a.n, b.n);
    for (int i = 0; i < r.n; ++i)
      r.d[static_cast<std::size_t>(i)] = a.d[static_cast<std::size_t>(i)] * b.v + a.v * b.d[static_cast<std::size_t>(i)];
    return r;
  }
  Dual& operator+=(const Dual& b) { return *this = *this + b; }
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

template <class T>
struct Cplx {
  T re{};
  T im{};
  friend Cplx operator+(const Cplx& a, const Cplx& b) { return {a.re + b.re, a.im + b.im}; }
  friend Cplx operator*(const Cplx& a, const Cplx& b) { return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re}; }
  Cplx conj() const { return {re, T(0.0) - im}; }
};

template <class T>
T ipow(const T& x, int k) {
  T r(1.0);
  for (int i = 0; i < k; ++i) r = r * x;
  return r;
}

struct CandidateMap {
  enum class Kind { real_identity, real_square, modulus_power, polynomial };
  Kind kind = Kind::modulus_power;
  int gamma = 1;
  std::vector<std::vector<double>> d;  // d[m][n] multiplies x^m y^n

  static CandidateMap real_identity() { return {Kind::real_identity, 1, {}}; }
  static CandidateMap real_square() { return {Kind::real_square, 1, {}}; }
  static CandidateMap modulus_power(int gamma) {
    if (gamma < 1) throw Error("modulus power needs gamma >= 1");
    return {Kind::modulus_power, gamma, {}};
  }
  static CandidateMap polynomial(std::vector<std::vector<double>> coefficients) {
    int degree = 0;
    for (std::size_t m = 0; m < coefficients.size(); ++m)
      for (std::size_t n = 0; n < coefficients[m].size(); ++n)
        if (coefficients[m][n] != 0.0) degree = std::max(degree, static_cast<int>(m + n));
    if (degree > 6) throw Error("polynomial candidates are limited to total degree 6");
    return {Kind::polynomial, 1, std::move(coefficients)};
  }

  bool is_complex() const { return kind == Kind::modulus_power || kind == Kind::polynomial; }

  std::string name() const {
    switch (kind) {
      case Kind::real_identity: return "real-identity";
      case Kind::real_square: return "real-square";
      case Kind::modulus_power: return "|a|^" + std::to_string(2 * gamma);
      case Kind::polynomial: {
        std::ostringstream os;
        os << "g(x,y)=";
        bool first = true;
        for (std::size_t m = 0; m < d.size(); ++m)
          for (std::size_t n = 0; n < d[m].size(); ++n) {
            if (d[m][n] == 0.0) continue;
            if (!first) os << "+";
            first = false;
            if (d[m][n] != 1.0) os << d[m][n] << "*";
            os << "x^" << m << "y^" << n;
          }
        if (first) os << "0";
        return os.str();
      }
    }
    return "?";
  }

  template <class T>
  T operator()(const Cplx<T>& a) const {
    switch (kind) {
      case Kind::real_identity: return a.re;
      case Kind::real_square: return a.re * a.re;
      case Kind::modulus_power: return ipow(a.re * a.re + a.im * a.im, gamma);
      case Kind::polynomial: {
        T s(0.0);
        for (std::size_t m = 0; m < d.size(); ++m)
          for (std::size_t n = 0; n < d[m].size(); ++n)
            if (d[m][n] != 0.0) s += T(d[m][n]) * ipow(a.re, static_cast<int>(m)) * ipow(a.im, static_cast<int>(n));
        return s;
      }
    }
    return T(0.0);
  }

  double operator()(std::complex<double> a) const {
    if (!is_complex()) a = {a.real(), 0.0};
    return (*this)(Cplx<double>{a.real(), a.imag()});
  }
};

// Index of the real part and (for complex systems) the imaginary part.
struct VarRef {
  int re = -1;
  int im = -1;
};

namespace rows {

struct Normalization {  // sum_k f(z_k) - 1
  std::vector<VarRef> z;
};
struct Closure {  // sum_j' f(sum_j a_j b_jj') - 1, or the classical form
  bool classical = false;
};
struct FixedClosure {  // closure at one fixed admissible a
  std::vector<std::complex<double>> a;
};
struct MonomialSum {  // Re or Im of sum_j' prod_j b_jj'^alpha_j conj(b_jj')^beta_j
  std::vector<int> alpha, beta;
  bool imag = false;
};
struct VirtualZero {  // Re or Im of sum_j a_j b_jv
  std::size_t column = 0;
  bool imag = false;
};

}  // namespace rows

using Row = std::variant<rows::Normalization, rows::Closure, rows::FixedClosure, rows::MonomialSum, rows::VirtualZero>;

struct Equation {
  std::string label;
  Row row;
  bool dependent = false;
  bool trivial = false;
};

struct ConstraintSystem {
  CandidateMap f;
  std::size_t m = 0;
  std::size_t mp = 0;         // values of P' before padding
  std::size_t columns = 0;    // values of P' including virtual ones
  KnowabilityLevel level = KnowabilityLevel::unknowable;
  std::vector<VarRef> a;
  std::vector<std::vector<VarRef>> b;
  int variables = 0;
  std::vector<int> block;  // 0 for P, 1 for P'
  std::vector<Equation> equations;
  std::vector<std::size_t> virtual_columns;
  bool augmented = false;
  std::vector<std::string> notes;

  int required_p() const { return static_cast<int>(m) - 1; }
  int required_pp() const { return static_cast<int>(m * (mp - 1)); }
  int required_total() const { return static_cast<int>(m * mp) - 1; }
  bool padded() const { return !virtual_columns.empty(); }
};

namespace detail {

template <class T>
Cplx<T> load(const std::vector<T>& x, VarRef r) {
  return {x[static_cast<std::size_t>(r.re)], r.im < 0 ? T(0.0) : x[static_cast<std::size_t>(r.im)]};
}

template <class T>
T eval_row(const ConstraintSystem& s, const Row& row, const std::vector<T>& x) {
  return std::visit(
      [&](const auto& r) -> T {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, rows::Normalization>) {
          T sum(0.0);
          for (auto z : r.z) sum += s.f(load(x, z));
          return sum - T(1.0);
        } else if constexpr (std::is_same_v<R, rows::Closure>) {
          T sum(0.0);
          for (std::size_t k = 0; k < s.columns; ++k) {
            if (r.classical) {
              for (std::size_t j = 0; j < s.m; ++j) sum += s.f(load(x, s.a[j])) * s.f(load(x, s.b[j][k]));
            } else {
              Cplx<T> acc;
              for (std::size_t j = 0; j < s.m; ++j) acc = acc + load(x, s.a[j]) * load(x, s.b[j][k]);
              sum += s.f(acc);
            }
          }
          return sum - T(1.0);
        } else if constexpr (std::is_same_v<R, rows::FixedClosure>) {
          T sum(0.0);
          for (std::size_t k = 0; k < s.columns; ++k) {
            Cplx<T> acc;
            for (std::size_t j = 0; j < s.m; ++j) acc = acc + Cplx<T>{T(r.a[j].real()), T(r.a[j].imag())} * load(x, s.b[j][k]);
            sum += s.f(acc);
          }
          return sum - T(1.0);
        } else if constexpr (std::is_same_v<R, rows::MonomialSum>) {
          Cplx<T> sum;
          for (std::size_t k = 0; k < s.columns; ++k) {
            Cplx<T> term{T(1.0), T(0.0)};
            for (std::size_t j = 0; j < s.m; ++j) {
              const auto z = load(x, s.b[j][k]);
              for (int p = 0; p < r.alpha[j]; ++p) term = term * z;
              for (int p = 0; p < r.beta[j]; ++p) term = term * z.conj();
            }
            sum = sum + term;
          }
          return r.imag ? sum.im : sum.re;
        } else {
          Cplx<T> sum;
          for (std::size_t j = 0; j < s.m; ++j) sum = sum + load(x, s.a[j]) * load(x, s.b[j][r.column]);
          return r.imag ? sum.im : sum.re;
        }
      },
      row);
}

// Multi-indices of total size k over m slots.
inline void multi_indices(std::size_t m, int k, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (cur.size() + 1 == m) {
    cur.push_back(k);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int i = k; i >= 0; --i) {
    cur.push_back(i);
    multi_indices(m, k - i, cur, out);
    cur.pop_back();
  }
}

inline std::vector<std::vector<int>> multi_indices(std::size_t m, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  multi_indices(m, k, cur, out);
  return out;
}

inline bool is_pure(const std::vector<int>& alpha) {
  return std::count_if(alpha.begin(), alpha.end(), [](int x) { return x != 0; }) == 1;
}

inline std::string index_str(const std::vector<int>& alpha) {
  std::string s = "(";
  for (std::size_t i = 0; i < alpha.size(); ++i) s += (i ? "," : "") + std::to_string(alpha[i]);
  return s + ")";
}

}  // namespace detail

template <class T>
std::vector<T> evaluate(const ConstraintSystem& s, const std::vector<T>& x) {
  std::vector<T> r;
  r.reserve(s.equations.size());
  for (const auto& e : s.equations) r.push_back(detail::eval_row(s, e.row, x));
  return r;
}

inline Eigen::MatrixXd jacobian(const ConstraintSystem& s, const std::vector<double>& x) {
  std::vector<Dual> xd;
  for (int i = 0; i < s.variables; ++i) xd.push_back(Dual::variable(x[static_cast<std::size_t>(i)], i, s.variables));
  const auto r = evaluate(s, xd);
  Eigen::MatrixXd j(static_cast<Eigen::Index>(r.size()), s.variables);
  for (std::size_t i = 0; i < r.size(); ++i)
    for (int k = 0; k < s.variables; ++k) j(static_cast<Eigen::Index>(i), k) = r[i].d[static_cast<std::size_t>(k)];
  return j;
}

namespace detail {

inline void mark_trivial(ConstraintSystem& s) {
  std::vector<bool> zero(s.equations.size(), true);
  for (std::uint64_t t = 0; t < 3; ++t) {
    Stream rng(0x7a11, t);
    std::vector<double> x(static_cast<std::size_t>(s.variables));
    for (auto& v : x) v = rng.uniform(-1, 1);
    const auto r = evaluate(s, x);
    const auto j = jacobian(s, x);
    for (std::size_t i = 0; i < r.size(); ++i)
      if (std::abs(r[i]) > 1e-14 || j.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff() > 1e-14) zero[i] = false;
  }
  for (std::size_t i = 0; i < zero.size(); ++i) s.equations[i].trivial = zero[i];
}

}  // namespace detail

// Normalisation rows and the closure row. For a decided P the closure row is
// the classical one and follows from the normalisation rows.
inline ConstraintSystem build_constraints(std::size_t m, std::size_t mp, KnowabilityLevel level_of_p, const CandidateMap& f,
                                          std::size_t padded_columns = 0) {
  if (m < 2 || mp < 2) throw Error("constraint systems need M, M' >= 2");
  ConstraintSystem s;
  s.f = f;
  s.m = m;
  s.mp = mp;
  s.columns = std::max(mp, padded_columns);
  s.level = level_of_p;
  const int width = f.is_complex() ? 2 : 1;
  const auto total = static_cast<int>((m + m * s.columns) * static_cast<std::size_t>(width));
  if (total > kMaxSystemVariables) throw Error("constraint system too large");
  auto next = [&](int blk) {
    VarRef r{s.variables++, -1};
    s.block.push_back(blk);
    if (width == 2) {
      r.im = s.variables++;
      s.block.push_back(blk);
    }
    return r;
  };
  for (std::size_t j = 0; j < m; ++j) s.a.push_back(next(0));
  s.b.assign(m, {});
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < s.columns; ++k) s.b[j].push_back(next(1));
  s.equations.push_back({"normalization P", rows::Normalization{s.a}});
  for (std::size_t j = 0; j < m; ++j)
    s.equations.push_back({"normalization P' row " + std::to_string(j + 1), rows::Normalization{s.b[j]}});
  const bool classical = level_of_p == KnowabilityLevel::decided;
  s.equations.push_back({classical ? "closure (classical)" : "closure", rows::Closure{classical}, classical});
  for (std::size_t k = mp; k < s.columns; ++k) {
    s.virtual_columns.push_back(k);
    for (bool im : {false, true}) {
      if (im && !f.is_complex()) continue;
      s.equations.push_back({std::string(im ? "Im" : "Re") + " virtual column " + std::to_string(k + 1),
                             rows::VirtualZero{k, im}});
    }
  }
  detail::mark_trivial(s);
  return s;
}

namespace detail {

// t > 0 with sum_j f(t u_j) = 1, by bisection.
inline std::vector<std::complex<double>> admissible(const CandidateMap& f, std::vector<std::complex<double>> u) {
  auto excess = [&](double t) {
    double s = 0;
    for (auto z : u) s += f(t * z);
    return s - 1.0;
  };
  double lo = 0, hi = 1;
  if (excess(lo) >= 0) throw Error("candidate cannot be normalized");
  int guard = 0;
  while (excess(hi) < 0) {
    hi *= 2;
    if (++guard > 40) throw Error("candidate cannot be normalized");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0 ? lo : hi) = mid;
  }
  for (auto& z : u) z *= hi;
  return u;
}

}  // namespace detail

inline constexpr int kReplicatedClosures = 8;

// Conditions that make the closure row hold for every admissible {a_j}.
inline ConstraintSystem property_independence_conditions(ConstraintSystem s) {
  if (s.level != KnowabilityLevel::unknowable) throw Error("property independence applies to an unknowable P");
  for (auto& e : s.equations)
    if (std::holds_alternative<rows::Closure>(e.row)) e.dependent = true;
  switch (s.f.kind) {
    case CandidateMap::Kind::real_identity:
      s.notes.push_back("no amplitude-level freedom");
      break;
    case CandidateMap::Kind::real_square: {
      // (sum_j a_j b_j)^2 = sum_j a_j^2 b_j^2 + 2 sum_{j<k} a_j a_k b_j b_k
      for (std::size_t j = 0; j < s.m; ++j)
        for (std::size_t k = j + 1; k < s.m; ++k) {
          std::vector<int> alpha(s.m, 0), beta(s.m, 0);
          alpha[j] = alpha[k] = 1;
          s.equations.push_back({"independence rows " + std::to_string(j + 1) + "," + std::to_string(k + 1),
                                 rows::MonomialSum{alpha, beta, false}});
        }
      break;
    }
    case CandidateMap::Kind::modulus_power: {
      auto idx = detail::multi_indices(s.m, s.f.gamma);
      for (std::size_t p = 0; p < idx.size(); ++p)
        for (std::size_t q = p; q < idx.size(); ++q) {
          if (p == q && detail::is_pure(idx[p])) continue;
          for (bool im : {false, true})
            s.equations.push_back({std::string(im ? "Im" : "Re") + " independence " + detail::index_str(idx[p]) +
                                       detail::index_str(idx[q]),
                                   rows::MonomialSum{idx[p], idx[q], im}});
        }
      break;
    }
    case CandidateMap::Kind::polynomial: {
      for (int k = 0; k < kReplicatedClosures; ++k) {
        Stream rng(0xc105e, static_cast<std::uint64_t>(k));
        std::vector<std::complex<double>> u(s.m);
        for (auto& z : u) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.equations.push_back({"closure at fixed a #" + std::to_string(k + 1), rows::FixedClosure{detail::admissible(s.f, u)}});
      }
      break;
    }
  }
  s.augmented = true;
  detail::mark_trivial(s);
  return s;
}

namespace detail {

inline int numerical_rank(const Eigen::MatrixXd& j) {
  if (j.rows() == 0 || j.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& sv = svd.singularValues();
  const double tol = kRankTolerance * std::max(1.0, sv(0));
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv(i) > tol;
  return r;
}

inline double residual_norm(const ConstraintSystem& s, const std::vector<double>& x) {
  double n = 0;
  for (double r : evaluate(s, x)) n += r * r;
  return std::sqrt(n);
}

// Levenberg-Marquardt from x; returns the final point.
inline std::vector<double> levenberg_marquardt(const ConstraintSystem& s, std::vector<double> x, int max_iter = 400) {
  const auto n = static_cast<Eigen::Index>(x.size());
  double lambda = 1e-3;
  double cost = residual_norm(s, x);
  for (int it = 0; it < max_iter && cost > 1e-14; ++it) {
    const Eigen::MatrixXd j = jacobian(s, x);
    const auto rv = evaluate(s, x);
    const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(rv.data(), static_cast<Eigen::Index>(rv.size()));
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    bool improved = false;
    while (lambda < 1e14) {
      Eigen::MatrixXd h = jtj;
      for (Eigen::Index i = 0; i < n; ++i) h(i, i) += lambda * (1.0 + jtj(i, i));
      const Eigen::VectorXd step = h.ldlt().solve(-g);
      std::vector<double> y(x);
      for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] += step(i);
      const double c = residual_norm(s, y);
      if (c < cost) {
        x = std::move(y);
        cost = c;
        lambda = std::max(lambda / 3.0, 1e-15);
        improved = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) break;
  }
  return x;
}

}  // namespace detail

struct BlockDof {
  int p = 0;
  int pp = 0;
  int total = 0;
};

inline BlockDof dof_at(const ConstraintSystem& s, const std::vector<double>& x) {
  const Eigen::MatrixXd j = jacobian(s, x);
  std::vector<Eigen::Index> active;
  for (std::size_t i = 0; i < s.equations.size(); ++i)
    if (!s.equations[i].dependent && !s.equations[i].trivial) active.push_back(static_cast<Eigen::Index>(i));
  auto block_dof = [&](int blk) {
    std::vector<Eigen::Index> cols;
    for (int v = 0; v < s.variables; ++v)
      if (s.block[static_cast<std::size_t>(v)] == blk) cols.push_back(v);
    std::vector<Eigen::Index> touching;
    for (auto i : active) {
      bool t = false;
      for (auto c : cols) t = t || j(i, c) != 0.0;
      if (t) touching.push_back(i);
    }
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(touching.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < touching.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j(touching[r], cols[c]);
    return static_cast<int>(cols.size()) - detail::numerical_rank(sub);
  };
  Eigen::MatrixXd all(static_cast<Eigen::Index>(active.size()), j.cols());
  for (std::size_t r = 0; r < active.size(); ++r) all.row(static_cast<Eigen::Index>(r)) = j.row(active[r]);
  return {block_dof(0), block_dof(1), s.variables - detail::numerical_rank(all)};
}

// A solution is regular when the independent rows keep full row rank there.
inline bool is_regular(const ConstraintSystem& s, const std::vector<double>& x) {
  const Eigen::MatrixXd j = jacobian(s, x);
  std::vector<Eigen::Index> active;
  for (std::size_t i = 0; i < s.equations.size(); ++i)
    if (!s.equations[i].dependent && !s.equations[i].trivial) active.push_back(static_cast<Eigen::Index>(i));
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(active.size()), j.cols());
  for (std::size_t r = 0; r < active.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = j.row(active[r]);
  return detail::numerical_rank(sub) == static_cast<int>(active.size());
}

// Does f combine amplitudes differently from the classical rule? Sampled on
// random admissible-shaped amplitudes.
inline bool distinguishes_levels(const CandidateMap& f, std::size_t m, std::size_t mp, std::uint64_t seed = 1) {
  for (std::uint64_t t = 0; t < 64; ++t) {
    Stream rng(seed, t);
    auto draw = [&]() {
      return f.is_complex() ? std::complex<double>(rng.uniform(-1, 1), rng.uniform(-1, 1)) : std::complex<double>(rng.uniform(-1, 1), 0);
    };
    std::vector<std::complex<double>> a(m);
    for (auto& z : a) z = draw();
    for (std::size_t k = 0; k < mp; ++k) {
      std::vector<std::complex<double>> b(m);
      for (auto& z : b) z = draw();
      std::complex<double> s = 0;
      double classical = 0;
      for (std::size_t j = 0; j < m; ++j) {
        s += a[j] * b[j];
        classical += f(a[j]) * f(b[j]);
      }
      if (std::abs(f(s) - classical) > 1e-9) return true;
    }
  }
  return false;
}

struct DofReport {
  std::string candidate;
  std::size_t m = 0, mp = 0, columns = 0;
  bool padded = false;
  int variables = 0;
  int equations = 0;
  int independent_rows = 0;
  int starts = 0;
  int solutions = 0;
  int regular_solutions = 0;
  int degenerate_solutions = 0;
  double best_residual = 0;
  bool feasible = false;
  BlockDof dof;
  std::set<int> dof_pp_seen;  // P'-block DOF over all regular solutions
  int required_p = 0, required_pp = 0, required_total = 0;
  bool levels_distinguished = false;
  bool pass = false;
  std::string reason;
  std::vector<std::vector<double>> sample_solutions;
};

// Randomised least-squares descent from `samples` starts; one RNG stream per
// start. DOF = block variables minus the Jacobian rank at a solution.
inline DofReport estimate_dof(const ConstraintSystem& s, int samples = 50, std::uint64_t seed = 1) {
  if (samples < 1) throw Error("estimate_dof needs at least one start");
  DofReport rep;
  rep.candidate = s.f.name();
  rep.m = s.m;
  rep.mp = s.mp;
  rep.columns = s.columns;
  rep.padded = s.padded();
  rep.variables = s.variables;
  rep.equations = static_cast<int>(s.equations.size());
  for (const auto& e : s.equations) rep.independent_rows += !e.dependent && !e.trivial;
  rep.starts = samples;
  rep.required_p = s.required_p();
  rep.required_pp = s.required_pp();
  rep.required_total = s.required_total();
  rep.best_residual = std::numeric_limits<double>::infinity();
  // Replicated closures restate one condition many times, so regularity by
  // full row rank does not apply to them.
  const bool replicated = s.f.kind == CandidateMap::Kind::polynomial && s.augmented;
  std::optional<BlockDof> first;
  for (int k = 0; k < samples; ++k) {
    Stream rng(seed, static_cast<std::uint64_t>(k));
    std::vector<double> x(static_cast<std::size_t>(s.variables));
    for (auto& v : x) v = rng.uniform(-1, 1);
    x = detail::levenberg_marquardt(s, std::move(x));
    const double res = detail::residual_norm(s, x);
    rep.best_residual = std::min(rep.best_residual, res);
    if (res >= kSolutionResidual) continue;
    ++rep.solutions;
    if (!replicated && !is_regular(s, x)) {
      ++rep.degenerate_solutions;
      continue;
    }
    ++rep.regular_solutions;
    const auto d = dof_at(s, x);
    rep.dof_pp_seen.insert(d.pp);
    if (!first) first = d;
    if (rep.sample_solutions.size() < 3) rep.sample_solutions.push_back(x);
  }
  rep.feasible = rep.regular_solutions > 0;
  if (first) rep.dof = *first;
  rep.levels_distinguished = distinguishes_levels(s.f, s.m, s.columns);
  if (!rep.feasible) {
    rep.reason = rep.degenerate_solutions > 0 ? "only degenerate solutions" : "no solution";
  } else if (!rep.levels_distinguished) {
    rep.reason = "f cannot distinguish knowability levels";
  } else if (rep.dof.p < rep.required_p || rep.dof.pp < rep.required_pp) {
    rep.reason = "experimental freedom violated";
  } else {
    rep.pass = true;
    rep.reason = "ok";
  }
  return rep;
}

struct MultiplicativityReport {
  double max_deviation = 0;
  std::complex<double> witness_a, witness_b;
  int trials = 0;
};

inline MultiplicativityReport verify_multiplicativity(const CandidateMap& f, int trials = 1000, std::uint64_t seed = 1) {
  MultiplicativityReport rep;
  rep.trials = trials;
  auto probe = [&](std::complex<double> a, std::complex<double> b) {
    const double dev = std::abs(f(a * b) - f(a) * f(b));
    if (dev > rep.max_deviation) {
      rep.max_deviation = dev;
      rep.witness_a = a;
      rep.witness_b = b;
    }
  };
  probe({1, 1}, {1, 1});
  for (int t = 0; t < trials; ++t) {
    Stream rng(seed, static_cast<std::uint64_t>(t));
    auto draw = [&]() {
      if (!f.is_complex()) return std::complex<double>(rng.uniform(-1, 1), 0);
      const double r = std::sqrt(rng.uniform()), th = rng.uniform(0, 2 * std::numbers::pi);
      return std::polar(r, th);
    };
    probe(draw(), draw());
  }
  return rep;
}

// gamma when g(x, y) = (x^2 + y^2)^gamma coefficient by coefficient.
inline std::optional<int> as_modulus_power(const CandidateMap& f) {
  if (f.kind == CandidateMap::Kind::modulus_power) return f.gamma;
  if (f.kind != CandidateMap::Kind::polynomial) return std::nullopt;
  for (int g = 1; g <= 3; ++g) {
    std::vector<std::vector<double>> expect(static_cast<std::size_t>(2 * g + 1), std::vector<double>(static_cast<std::size_t>(2 * g + 1), 0.0));
    double binom = 1;
    for (int k = 0; k <= g; ++k) {
      expect[static_cast<std::size_t>(2 * (g - k))][static_cast<std::size_t>(2 * k)] = binom;
      binom = binom * (g - k) / (k + 1);
    }
    bool same = true;
    const std::size_t rows = std::max(expect.size(), f.d.size());
    for (std::size_t m = 0; m < rows && same; ++m)
      for (std::size_t n = 0; n < rows && same; ++n) {
        const double have = m < f.d.size() && n < f.d[m].size() ? f.d[m][n] : 0.0;
        const double want = m < expect.size() && n < expect[m].size() ? expect[m][n] : 0.0;
        same = std::abs(have - want) < 1e-12;
      }
    if (same) return g;
  }
  return std::nullopt;
}

// Padded constraint system for M > M': the virtual values come from padding
// a template network whose amplitude matrix is an isometry.
inline ConstraintSystem padded_constraints(std::size_t m, std::size_t mp, const CandidateMap& f) {
  ContextNetwork t;
  std::vector<double> lp, lq;
  for (std::size_t j = 0; j < m; ++j) lp.push_back(static_cast<double>(j + 1));
  for (std::size_t k = 0; k < mp; ++k) lq.push_back(static_cast<double>(k + 1));
  t.layers = {Layer{"P", KnowabilityLevel::unknowable, lp, {}, false}, Layer{"P'", KnowabilityLevel::decided, lq, {}, false}};
  t.initial.assign(m, Amplitude(Complex(1.0 / std::sqrt(static_cast<double>(m)), 0)));
  AmplitudeMatrix a(m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < mp; ++k)
      a[j].push_back(std::polar(1.0 / std::sqrt(static_cast<double>(m)), 2 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(m)));
  t.transitions = {a};
  const auto pad = pad_virtual_values(t, 0);
  return build_constraints(m, mp, KnowabilityLevel::unknowable, f, pad.network.layers[1].size());
}

struct UniquenessRow {
  DofReport report;
  std::optional<double> multiplicativity_deviation;
};

struct UniquenessSummary {
  std::vector<UniquenessRow> rows;
  std::map<std::string, bool> passes_everywhere;  // by candidate
  bool born_only = false;  // |a|^2 passes everywhere and nothing else does anywhere
};

inline std::vector<CandidateMap> default_candidates() {
  return {CandidateMap::real_identity(), CandidateMap::real_square(), CandidateMap::modulus_power(1),
          CandidateMap::modulus_power(2), CandidateMap::modulus_power(3)};
}

inline DofReport evaluate_candidate(const CandidateMap& f, std::size_t m, std::size_t mp, bool padded, int samples,
                                    std::uint64_t seed) {
  auto s = padded ? padded_constraints(m, mp, f) : build_constraints(m, mp, KnowabilityLevel::unknowable, f);
  return estimate_dof(property_independence_conditions(std::move(s)), samples, seed);
}

inline UniquenessSummary uniqueness_report(const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                                           const std::vector<CandidateMap>& candidates = default_candidates(),
                                           int samples = 50, std::uint64_t seed = 1) {
  UniquenessSummary out;
  bool other_passes = false;
  for (const auto& f : candidates) {
    bool everywhere = true;
    std::optional<double> mult;
    if (f.kind == CandidateMap::Kind::polynomial) mult = verify_multiplicativity(f, 1000, seed).max_deviation;
    for (auto [m, mp] : shapes) {
      bool shape_pass = false;
      auto add = [&](bool padded) {
        UniquenessRow row{evaluate_candidate(f, m, mp, padded, samples, seed), mult};
        if (mult && *mult > 1e-12 && row.report.pass) {
          row.report.pass = false;
          row.report.reason = "not multiplicative";
        }
        out.rows.push_back(row);
        return row.report.pass;
      };
      const bool unpadded = add(false);
      shape_pass = m > mp ? add(true) : unpadded;
      everywhere = everywhere && shape_pass;
      if (f.kind != CandidateMap::Kind::modulus_power || f.gamma != 1) other_passes = other_passes || shape_pass;
    }
    out.passes_everywhere[f.name()] = everywhere;
  }
  auto born = out.passes_everywhere.find("|a|^2");
  out.born_only = born != out.passes_everywhere.end() && born->second && !other_passes;
  return out;
}

}  // namespace epistemic
