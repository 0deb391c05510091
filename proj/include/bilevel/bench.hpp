#pragma once

// Benchmark suites over random linear instances: one row per
// (instance, scheme), then feasible / dominant counts per group.

#include "bilevel/gen.hpp"
#include "bilevel/relaxation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace bilevel {

struct Dims {
  int n = 0, l = 0, m = 0, p = 0;
  std::string label() const {
    return "(" + std::to_string(n) + "," + std::to_string(l) + "," + std::to_string(m) + "," + std::to_string(p) + ")";
  }
};

struct BenchConfig {
  std::vector<Dims> dims;
  int count = 20;
  std::uint64_t seed = 1;
  double density = 0.5;
  std::vector<RelaxationScheme> schemes = all_schemes();
  RelaxationParams params;
  int repeats = 1;
  int jobs = 1;

  void validate() const {
    if (dims.empty() || count < 1 || repeats < 1 || jobs < 1 || schemes.empty())
      throw std::invalid_argument("BenchConfig: need dims, count >= 1, repeats >= 1, jobs >= 1 and a scheme");
    params.validate();
  }
};

/// Seed of instance `index` (0-based) in group `group`.
inline std::uint64_t instance_seed(std::uint64_t base, int group, int index) {
  return base + 1000 * static_cast<std::uint64_t>(group) + static_cast<std::uint64_t>(index);
}

struct BenchRow {
  int group = 0;
  int index = 0;  // 1-based, the "#" column
  Dims dims;
  std::uint64_t seed = 0;
  RelaxationScheme scheme = RelaxationScheme::MDP1;
  double objective = std::nan("");
  double infeasibility = kInf;
  double time = 0;  // mean over repeats
  std::string reason;
  std::string error;
};

inline BenchRow run_cell(const BenchConfig& cfg, int group, int index, RelaxationScheme scheme) {
  BenchRow row;
  row.group = group;
  row.index = index + 1;
  row.dims = cfg.dims[group];
  row.seed = instance_seed(cfg.seed, group, index);
  row.scheme = scheme;
  const Dims& d = row.dims;
  try {
    const auto lin = gen_linear(d.n, d.l, d.m, d.p, cfg.density, row.seed);
    double total = 0;
    for (int r = 0; r < cfg.repeats; ++r) {
      const auto rep = run(lin, scheme, cfg.params);
      total += rep.seconds;
      row.objective = rep.objective;
      row.reason = to_string(rep.reason);
      row.infeasibility = rep.infeasibility ? rep.infeasibility->total : kInf;
    }
    row.time = total / cfg.repeats;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.reason = "Error";
  }
  return row;
}

/// Every (instance, scheme) cell, in group / instance / scheme order whatever
/// the number of workers.
inline std::vector<BenchRow> run_suite(const BenchConfig& cfg) {
  cfg.validate();
  struct Task {
    int group, index;
    RelaxationScheme scheme;
  };
  std::vector<Task> tasks;
  for (int g = 0; g < static_cast<int>(cfg.dims.size()); ++g)
    for (int i = 0; i < cfg.count; ++i)
      for (auto s : cfg.schemes) tasks.push_back({g, i, s});
  std::vector<BenchRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++)
      rows[k] = run_cell(cfg, tasks[k].group, tasks[k].index, tasks[k].scheme);
  };
  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

struct SchemeSummary {
  int group = 0;
  Dims dims;
  RelaxationScheme scheme = RelaxationScheme::MDP1;
  int instances = 0;
  int feasible = 0;
  int dominant = 0;
  double avg_time = 0;
};

/// Feasible: Infeasibility < feas_tol. Dominant: feasible and within obj_tol
/// of the best feasible objective any scheme reached on that instance.
inline std::vector<SchemeSummary> summarize(const std::vector<BenchRow>& rows, double feas_tol = 1e-3,
                                            double obj_tol = 1e-4) {
  const auto feasible = [&](const BenchRow& r) {
    return r.error.empty() && r.infeasibility < feas_tol && std::isfinite(r.objective);
  };
  std::map<std::pair<int, int>, double> best;
  for (const auto& r : rows) {
    if (!feasible(r)) continue;
    auto [it, fresh] = best.try_emplace({r.group, r.index}, r.objective);
    if (!fresh) it->second = std::min(it->second, r.objective);
  }
  std::map<std::pair<int, int>, SchemeSummary> acc;  // (group, scheme)
  for (const auto& r : rows) {
    auto& s = acc[{r.group, static_cast<int>(r.scheme)}];
    s.group = r.group;
    s.dims = r.dims;
    s.scheme = r.scheme;
    ++s.instances;
    s.avg_time += r.time;
    if (!feasible(r)) continue;
    ++s.feasible;
    if (r.objective <= best.at({r.group, r.index}) + obj_tol) ++s.dominant;
  }
  std::vector<SchemeSummary> out;
  for (auto& [key, s] : acc) {
    s.avg_time /= s.instances;
    out.push_back(s);
  }
  // keep the configured scheme order inside each group
  std::vector<RelaxationScheme> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.scheme) == order.end()) order.push_back(r.scheme);
  auto rank = [&](RelaxationScheme s) { return std::find(order.begin(), order.end(), s) - order.begin(); };
  std::sort(out.begin(), out.end(), [&](const SchemeSummary& a, const SchemeSummary& b) {
    return a.group != b.group ? a.group < b.group : rank(a.scheme) < rank(b.scheme);
  });
  return out;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "group,dims,scheme,#,ObjVal,Infeasibility,Time,seed,reason,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << r.group << ",\"" << r.dims.label() << "\"," << to_string(r.scheme) << ',' << r.index << ','
       << detail::fmt("%.10g", r.objective) << ',' << detail::fmt("%.6e", r.infeasibility) << ','
       << detail::fmt("%.6f", r.time) << ',' << r.seed << ',' << r.reason << ',' << err << '\n';
  }
}

/// One table per (group, scheme) with columns #, ObjVal, Infeasibility, Time.
inline void write_markdown(std::ostream& os, const std::vector<BenchRow>& rows) {
  std::vector<std::pair<int, RelaxationScheme>> keys;
  for (const auto& r : rows)
    if (std::find(keys.begin(), keys.end(), std::make_pair(r.group, r.scheme)) == keys.end())
      keys.emplace_back(r.group, r.scheme);
  for (const auto& [g, s] : keys) {
    const BenchRow* first = nullptr;
    for (const auto& r : rows)
      if (r.group == g && r.scheme == s) {
        first = &r;
        break;
      }
    os << "\n### " << to_string(s) << ", (n,l,m,p) = " << first->dims.label() << "\n\n";
    os << "| # | ObjVal | Infeasibility | Time |\n|---:|---:|---:|---:|\n";
    for (const auto& r : rows) {
      if (r.group != g || r.scheme != s) continue;
      os << "| " << r.index << " | " << detail::fmt("%.2f", r.objective) << " | "
         << detail::fmt("%.2e", r.infeasibility) << " | " << detail::fmt("%.2f", r.time) << " |\n";
    }
  }
}

/// Feasible counts with average times, then dominant counts: one row per group.
inline void write_summary(std::ostream& os, const std::vector<SchemeSummary>& sum) {
  std::vector<RelaxationScheme> schemes;
  std::vector<int> groups;
  for (const auto& s : sum) {
    if (std::find(schemes.begin(), schemes.end(), s.scheme) == schemes.end()) schemes.push_back(s.scheme);
    if (std::find(groups.begin(), groups.end(), s.group) == groups.end()) groups.push_back(s.group);
  }
  auto find = [&](int g, RelaxationScheme sc) -> const SchemeSummary* {
    for (const auto& s : sum)
      if (s.group == g && s.scheme == sc) return &s;
    return nullptr;
  };
  auto header = [&](const char* title) {
    os << "\n" << title << "\n\n| (n,l,m,p) |";
    for (auto sc : schemes) os << ' ' << to_string(sc) << " |";
    os << "\n|---|";
    for (std::size_t k = 0; k < schemes.size(); ++k) os << "---:|";
    os << '\n';
  };
  header("Number of feasible cases (average time in seconds)");
  for (int g : groups) {
    os << "| " << find(g, schemes.front())->dims.label() << " |";
    for (auto sc : schemes) {
      const auto* s = find(g, sc);
      os << ' ' << (s ? std::to_string(s->feasible) + " (" + detail::fmt("%.2f", s->avg_time) + ")" : "-") << " |";
    }
    os << '\n';
  }
  header("Number of dominant cases");
  for (int g : groups) {
    os << "| " << find(g, schemes.front())->dims.label() << " |";
    for (auto sc : schemes) {
      const auto* s = find(g, sc);
      os << ' ' << (s ? std::to_string(s->dominant) : "-") << " |";
    }
    os << '\n';
  }
}

}  // namespace bilevel
