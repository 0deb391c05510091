#pragma once

// Seeded random linear bilevel instances and an enumeration oracle for tiny ones.

#include "bilevel/lp.hpp"
#include "bilevel/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <future>
#include <stdexcept>
#include <thread>
#include <vector>

namespace bilevel {

/// SplitMix64 used in counter mode: draw i of stream s is mix(key(seed, s) + (i + 1) * gamma),
/// so every matrix gets an independent, position-addressable stream.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(key_ + (++counter_) * kGamma); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

namespace detail {

// Bernoulli(density) mask times Uniform(-1, 1), filled row by row.
inline Matrix sparse_uniform(int rows, int cols, double density, std::uint64_t seed, std::uint64_t stream) {
  RandomStream rs(seed, stream);
  Matrix M = Matrix::Zero(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const bool keep = rs.uniform() < density;
      const double v = rs.uniform(-1.0, 1.0);
      if (keep) M(i, j) = v;
    }
  return M;
}

}  // namespace detail

inline LinearBilevel gen_linear(int n, int l, int m, int p, double density, std::uint64_t seed) {
  if (n < 1 || l < 1 || m < 1 || p < 1) throw std::invalid_argument("gen_linear: dimensions must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("gen_linear: density must lie in (0, 1]");
  using detail::sparse_uniform;
  LinearBilevel lin;
  lin.c1 = sparse_uniform(n, 1, density, seed, 0);
  lin.c2 = sparse_uniform(m, 1, density, seed, 1);
  lin.A1 = sparse_uniform(l, n, density, seed, 2);
  lin.b1 = sparse_uniform(l, 1, density, seed, 3);
  lin.d2 = sparse_uniform(m, 1, density, seed, 4);
  lin.A2 = sparse_uniform(p, n, density, seed, 5);
  lin.B2 = sparse_uniform(p, m, density, seed, 6);
  lin.b2 = sparse_uniform(p, 1, density, seed, 7);
  lin.bl = Vector::Constant(m, -10.0);
  lin.bu = Vector::Constant(m, 10.0);
  return lin;
}

/// min c^T y  s.t.  A y <= b,  -10 <= y <= 10, built around an interior point
/// so that it is feasible; the box keeps it bounded.
inline lp::LpProblem gen_bounded_lp(int num_vars, int num_rows, std::uint64_t seed) {
  RandomStream rs(seed, 100);
  lp::LpProblem p(num_vars);
  Vector y0(num_vars);
  for (int j = 0; j < num_vars; ++j) y0[j] = rs.uniform(-5.0, 5.0);
  for (int j = 0; j < num_vars; ++j) p.c[j] = rs.uniform(-1.0, 1.0);
  for (int i = 0; i < num_rows; ++i) {
    Vector a(num_vars);
    for (int j = 0; j < num_vars; ++j) a[j] = rs.uniform(-1.0, 1.0);
    p.add_row(a, lp::Relation::LessEqual, a.dot(y0) + rs.uniform(0.0, 2.0));
  }
  p.lower = Vector::Constant(num_vars, -10.0);
  p.upper = Vector::Constant(num_vars, 10.0);
  return p;
}

enum class OracleStatus { Optimal, Infeasible, Unbounded };

struct OracleResult {
  OracleStatus status = OracleStatus::Infeasible;
  double value = kInf;
  Vector x, y, u;
  std::uint64_t pattern = 0;  // bit i set: lower row i (of g = [A2x+B2y-b2; y-bu; bl-y]) active
};

inline constexpr int kOracleMaxRows = 14;

namespace detail {

struct PatternOutcome {
  lp::LpStatus status = lp::LpStatus::Infeasible;
  double value = kInf;
  Vector w;
};

// LP over (x, y, u) for one active-set pattern of the lower-level KKT system.
inline PatternOutcome solve_pattern(const LinearBilevel& lin, std::uint64_t pattern) {
  const int n = lin.n(), m = lin.m(), p = lin.p(), rows = p + 2 * m, N = n + m + rows;
  lp::LpProblem q(N);
  q.c.head(n) = lin.c1;
  q.c.segment(n, m) = lin.c2;
  for (int i = 0; i < lin.l(); ++i) {
    Vector a = Vector::Zero(N);
    a.head(n) = lin.A1.row(i).transpose();
    q.add_row(a, lp::Relation::LessEqual, lin.b1[i]);
  }
  for (int i = 0; i < rows; ++i) {
    Vector a = Vector::Zero(N);
    double rhs;
    if (i < p) {
      a.head(n) = lin.A2.row(i).transpose();
      a.segment(n, m) = lin.B2.row(i).transpose();
      rhs = lin.b2[i];
    } else if (i < p + m) {
      a[n + i - p] = 1.0;
      rhs = lin.bu[i - p];
    } else {
      a[n + i - p - m] = -1.0;
      rhs = -lin.bl[i - p - m];
    }
    const bool active = (pattern >> i) & 1U;
    q.add_row(a, active ? lp::Relation::Equal : lp::Relation::LessEqual, rhs);
    q.lower[n + m + i] = 0.0;
    if (!active) q.upper[n + m + i] = 0.0;
  }
  // d2 + B2^T u1 + u2 - u3 = 0
  for (int j = 0; j < m; ++j) {
    Vector a = Vector::Zero(N);
    for (int i = 0; i < p; ++i) a[n + m + i] = lin.B2(i, j);
    a[n + m + p + j] = 1.0;
    a[n + m + p + m + j] = -1.0;
    q.add_row(a, lp::Relation::Equal, -lin.d2[j]);
  }
  const auto s = lp::solve_lp(q);
  return {s.status, s.status == lp::LpStatus::Optimal ? s.objective : kInf, s.x};
}

}  // namespace detail

/// Global optimum of a tiny linear bilevel program by enumerating every
/// active-set pattern of the lower-level KKT conditions. Patterns are split
/// over `jobs` threads; the reduction takes the smallest value, ties going to
/// the smallest pattern.
inline OracleResult oracle_global(const LinearBilevel& lin, int jobs = 1) {
  lin.validate();
  const int n = lin.n(), m = lin.m(), p = lin.p(), rows = p + 2 * m;
  if (rows > kOracleMaxRows)
    throw std::invalid_argument("oracle_global: p + 2m = " + std::to_string(rows) + " exceeds " +
                                std::to_string(kOracleMaxRows));
  const std::uint64_t count = std::uint64_t{1} << rows;

  auto worker = [&](std::uint64_t begin, std::uint64_t stride) {
    OracleResult best;
    for (std::uint64_t pat = begin; pat < count; pat += stride) {
      bool skip = false;
      for (int j = 0; j < m && !skip; ++j)
        skip = ((pat >> (p + j)) & 1U) && ((pat >> (p + m + j)) & 1U) && lin.bl[j] < lin.bu[j];
      if (skip) continue;
      const auto o = detail::solve_pattern(lin, pat);
      if (o.status == lp::LpStatus::Unbounded) {
        if (best.status != OracleStatus::Unbounded || pat < best.pattern) {
          best = OracleResult{};
          best.status = OracleStatus::Unbounded;
          best.value = -kInf;
          best.pattern = pat;
        }
        continue;
      }
      if (o.status != lp::LpStatus::Optimal || best.status == OracleStatus::Unbounded) continue;
      if (best.status == OracleStatus::Infeasible || o.value < best.value ||
          (o.value == best.value && pat < best.pattern)) {
        best.status = OracleStatus::Optimal;
        best.value = o.value;
        best.x = o.w.head(n);
        best.y = o.w.segment(n, m);
        best.u = o.w.tail(rows);
        best.pattern = pat;
      }
    }
    return best;
  };

  jobs = std::max(1, jobs);
  std::vector<OracleResult> parts;
  if (jobs == 1) {
    parts.push_back(worker(0, 1));
  } else {
    std::vector<std::future<OracleResult>> fut;
    for (int k = 0; k < jobs; ++k) fut.push_back(std::async(std::launch::async, worker, k, jobs));
    for (auto& f : fut) parts.push_back(f.get());
  }
  OracleResult best;
  for (const auto& r : parts) {
    if (r.status == OracleStatus::Infeasible) continue;
    const auto rank = [](const OracleResult& a) { return a.status == OracleStatus::Unbounded ? 0 : 1; };
    if (best.status == OracleStatus::Infeasible || rank(r) < rank(best) ||
        (rank(r) == rank(best) && (r.value < best.value || (r.value == best.value && r.pattern < best.pattern))))
      best = r;
  }
  return best;
}

}  // namespace bilevel
