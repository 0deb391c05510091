#pragma once

// Exact multivariate polynomials (total degree <= 4) with value, gradient and
// Hessian. Every function a bilevel program carries (F, f, g, h, Lagrangians,
// reformulation rows) is stored as a PolyFunction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bilevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sorted (variable index, exponent) pairs; exponents are >= 1.
using Monomial = std::vector<std::pair<int, int>>;

inline int monomial_degree(const Monomial& m) {
  int d = 0;
  for (const auto& [var, exp] : m) d += exp;
  return d;
}

inline Monomial multiply_monomials(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].first < a[i].first) {
      out.push_back(b[j++]);
    } else {
      out.emplace_back(a[i].first, a[i].second + b[j].second);
      ++i;
      ++j;
    }
  }
  return out;
}

class PolyFunction {
 public:
  static constexpr int kMaxDegree = 4;

  struct Term {
    double coef = 0.0;
    Monomial powers;
  };

  PolyFunction() = default;
  explicit PolyFunction(int num_vars) : num_vars_(num_vars) {
    if (num_vars < 0) throw std::invalid_argument("PolyFunction: negative variable count");
  }

  /// Builds the canonical form of the sum of `terms`: like monomials merged,
  /// exact zeros dropped, exponent lists sorted by variable.
  PolyFunction(int num_vars, std::vector<Term> terms) : PolyFunction(num_vars) {
    std::map<Monomial, double> acc;
    for (auto& t : terms) {
      if (!std::isfinite(t.coef)) throw std::invalid_argument("PolyFunction: non-finite coefficient");
      std::map<int, int> merged;
      for (const auto& [var, exp] : t.powers) {
        if (var < 0 || var >= num_vars)
          throw std::invalid_argument("PolyFunction: variable index " + std::to_string(var) +
                                      " out of range for " + std::to_string(num_vars) + " variables");
        if (exp < 0) throw std::invalid_argument("PolyFunction: negative exponent");
        if (exp > 0) merged[var] += exp;
      }
      Monomial m(merged.begin(), merged.end());
      if (monomial_degree(m) > kMaxDegree)
        throw std::invalid_argument("PolyFunction: total degree exceeds " + std::to_string(kMaxDegree));
      acc[m] += t.coef;
    }
    for (auto& [m, c] : acc)
      if (c != 0.0) terms_.push_back({c, m});
  }

  static PolyFunction constant(int num_vars, double c) {
    return PolyFunction(num_vars, {{c, {}}});
  }
  static PolyFunction variable(int num_vars, int index, double coef = 1.0) {
    return PolyFunction(num_vars, {{coef, {{index, 1}}}});
  }
  /// a^T w + b over num_vars variables.
  static PolyFunction affine(const Vector& a, double b) {
    std::vector<Term> terms;
    terms.push_back({b, {}});
    for (int i = 0; i < a.size(); ++i)
      if (a[i] != 0.0) terms.push_back({a[i], {{i, 1}}});
    return PolyFunction(static_cast<int>(a.size()), std::move(terms));
  }

  int num_vars() const { return num_vars_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, monomial_degree(t.powers));
    return d;
  }
  bool is_affine() const { return degree() <= 1; }

  double constant_term() const {
    for (const auto& t : terms_)
      if (t.powers.empty()) return t.coef;
    return 0.0;
  }

  /// Coefficient vector of the degree-1 part (exact for affine functions).
  Vector linear_part() const {
    Vector a = Vector::Zero(num_vars_);
    for (const auto& t : terms_)
      if (t.powers.size() == 1 && t.powers[0].second == 1) a[t.powers[0].first] = t.coef;
    return a;
  }

  /// Largest degree of any term in the given variables (others treated as constants).
  int degree_in(int first_var, int count) const {
    int d = 0;
    for (const auto& t : terms_) {
      int td = 0;
      for (const auto& [var, exp] : t.powers)
        if (var >= first_var && var < first_var + count) td += exp;
      d = std::max(d, td);
    }
    return d;
  }

  double eval(const Vector& x) const {
    check_dim(x);
    double s = 0.0;
    for (const auto& t : terms_) {
      double v = t.coef;
      for (const auto& [var, exp] : t.powers) v *= ipow(x[var], exp);
      s += v;
    }
    return s;
  }

  /// Sum of |term| at x; the rounding scale of eval(x).
  double term_magnitude(const Vector& x) const {
    check_dim(x);
    double s = 0.0;
    for (const auto& t : terms_) {
      double v = std::abs(t.coef);
      for (const auto& [var, exp] : t.powers) v *= std::abs(ipow(x[var], exp));
      s += v;
    }
    return s;
  }

  Vector grad(const Vector& x) const {
    Vector g = Vector::Zero(num_vars_);
    add_grad_to(x, 1.0, g);
    return g;
  }

  /// out += weight * grad(x)
  void add_grad_to(const Vector& x, double weight, Vector& out) const {
    check_dim(x);
    for (const auto& t : terms_) {
      const auto k = t.powers.size();
      for (std::size_t a = 0; a < k; ++a) {
        const auto [va, ea] = t.powers[a];
        double v = weight * t.coef * ea * ipow(x[va], ea - 1);
        for (std::size_t b = 0; b < k; ++b)
          if (b != a) v *= ipow(x[t.powers[b].first], t.powers[b].second);
        out[va] += v;
      }
    }
  }

  Matrix hess(const Vector& x) const {
    Matrix h = Matrix::Zero(num_vars_, num_vars_);
    add_hess_to(x, 1.0, h);
    return h;
  }

  /// out += weight * hess(x)
  void add_hess_to(const Vector& x, double weight, Matrix& out) const {
    check_dim(x);
    for (const auto& t : terms_) {
      const auto k = t.powers.size();
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
          const auto [va, ea] = t.powers[a];
          const auto [vb, eb] = t.powers[b];
          double v = weight * t.coef;
          if (a == b) {
            if (ea < 2) continue;
            v *= ea * (ea - 1) * ipow(x[va], ea - 2);
          } else {
            v *= ea * ipow(x[va], ea - 1) * eb * ipow(x[vb], eb - 1);
          }
          for (std::size_t c = 0; c < k; ++c)
            if (c != a && c != b) v *= ipow(x[t.powers[c].first], t.powers[c].second);
          out(va, vb) += v;
          if (a != b) out(vb, va) += v;
        }
      }
    }
  }

  /// Symbolic partial derivative with respect to `var`.
  PolyFunction derivative(int var) const {
    if (var < 0 || var >= num_vars_) throw std::invalid_argument("PolyFunction::derivative: bad variable");
    std::vector<Term> out;
    for (const auto& t : terms_) {
      for (const auto& [v, e] : t.powers) {
        if (v != var) continue;
        Term d{t.coef * e, {}};
        for (const auto& [v2, e2] : t.powers) {
          if (v2 != var) d.powers.emplace_back(v2, e2);
          else if (e2 > 1) d.powers.emplace_back(v2, e2 - 1);
        }
        out.push_back(std::move(d));
      }
    }
    return PolyFunction(num_vars_, std::move(out));
  }

  /// Re-indexes into a space of `new_num_vars` variables: variable i becomes
  /// index_map[i]. Mapping a variable that occurs in a term to -1 is an error.
  PolyFunction remap(int new_num_vars, std::span<const int> index_map) const {
    if (static_cast<int>(index_map.size()) != num_vars_)
      throw std::invalid_argument("PolyFunction::remap: index map size mismatch");
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
      Term r{t.coef, {}};
      for (const auto& [v, e] : t.powers) {
        if (index_map[v] < 0) throw std::invalid_argument("PolyFunction::remap: dropped variable in use");
        r.powers.emplace_back(index_map[v], e);
      }
      out.push_back(std::move(r));
    }
    return PolyFunction(new_num_vars, std::move(out));
  }

  /// Substitutes values for the listed variables; the result keeps the same
  /// variable space but no longer depends on them.
  PolyFunction fix(std::span<const int> vars, const Vector& values) const {
    if (static_cast<int>(vars.size()) != values.size())
      throw std::invalid_argument("PolyFunction::fix: size mismatch");
    std::vector<double> fixed(num_vars_, std::nan(""));
    for (std::size_t i = 0; i < vars.size(); ++i) fixed.at(vars[i]) = values[static_cast<int>(i)];
    std::vector<Term> out;
    for (const auto& t : terms_) {
      Term r{t.coef, {}};
      for (const auto& [v, e] : t.powers) {
        if (std::isnan(fixed[v])) r.powers.emplace_back(v, e);
        else r.coef *= ipow(fixed[v], e);
      }
      out.push_back(std::move(r));
    }
    return PolyFunction(num_vars_, std::move(out));
  }

  PolyFunction operator-() const { return (*this) * -1.0; }

  friend PolyFunction operator+(const PolyFunction& a, const PolyFunction& b) {
    same_space(a, b);
    std::vector<Term> t = a.terms_;
    t.insert(t.end(), b.terms_.begin(), b.terms_.end());
    return PolyFunction(a.num_vars_, std::move(t));
  }
  friend PolyFunction operator-(const PolyFunction& a, const PolyFunction& b) { return a + (-b); }
  friend PolyFunction operator*(const PolyFunction& a, double s) {
    std::vector<Term> t = a.terms_;
    for (auto& term : t) term.coef *= s;
    return PolyFunction(a.num_vars_, std::move(t));
  }
  friend PolyFunction operator*(double s, const PolyFunction& a) { return a * s; }
  friend PolyFunction operator*(const PolyFunction& a, const PolyFunction& b) {
    same_space(a, b);
    std::vector<Term> t;
    t.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& ta : a.terms_)
      for (const auto& tb : b.terms_) t.push_back({ta.coef * tb.coef, multiply_monomials(ta.powers, tb.powers)});
    return PolyFunction(a.num_vars_, std::move(t));
  }
  PolyFunction& operator+=(const PolyFunction& o) { return *this = *this + o; }

  friend bool operator==(const PolyFunction& a, const PolyFunction& b) {
    if (a.num_vars_ != b.num_vars_ || a.terms_.size() != b.terms_.size()) return false;
    for (std::size_t i = 0; i < a.terms_.size(); ++i)
      if (a.terms_[i].coef != b.terms_[i].coef || a.terms_[i].powers != b.terms_[i].powers) return false;
    return true;
  }

 private:
  static double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
  }
  void check_dim(const Vector& x) const {
    if (x.size() != num_vars_)
      throw std::invalid_argument("PolyFunction: point has " + std::to_string(x.size()) + " entries, expected " +
                                  std::to_string(num_vars_));
  }
  static void same_space(const PolyFunction& a, const PolyFunction& b) {
    if (a.num_vars_ != b.num_vars_) throw std::invalid_argument("PolyFunction: variable count mismatch");
  }

  int num_vars_ = 0;
  std::vector<Term> terms_;
};

/// L = f + sum_i u_i g_i + sum_j v_j h_j with numeric multipliers.
inline PolyFunction compose_lagrangian(const PolyFunction& f, const std::vector<PolyFunction>& g,
                                       const std::vector<PolyFunction>& h, const Vector& u, const Vector& v) {
  if (static_cast<Eigen::Index>(g.size()) != u.size() || static_cast<Eigen::Index>(h.size()) != v.size())
    throw std::invalid_argument("compose_lagrangian: multiplier length mismatch");
  PolyFunction L = f;
  for (std::size_t i = 0; i < g.size(); ++i) L += g[i] * u[static_cast<int>(i)];
  for (std::size_t j = 0; j < h.size(); ++j) L += h[j] * v[static_cast<int>(j)];
  return L;
}

}  // namespace bilevel
