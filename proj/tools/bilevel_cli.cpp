// Command-line driver: gen, solve, bench, check, examples.
// Exit codes: 0 success, 1 solver failure, 2 usage or format error.

#include "bilevel/bench.hpp"
#include "bilevel/diagnostics.hpp"
#include "bilevel/examples.hpp"
#include "bilevel/gen.hpp"
#include "bilevel/io.hpp"
#include "bilevel/relaxation.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace bilevel;

namespace {

struct Common {
  std::uint64_t seed = 1;
  RelaxationParams params;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--tol-r", c.params.eps_r, "Relaxation tolerance eps_r");
  app->add_option("--tol-sqp", c.params.eps_sqp, "Inner SQP tolerance");
  app->add_option("--t0", c.params.t0, "Initial relaxation parameter");
  app->add_option("--sigma", c.params.sigma, "Shrink factor for t, in (0,1)");
  app->add_option("--max-outer", c.params.max_outer, "Outer iteration budget");
}

std::optional<ExampleCase> find_example(const std::string& name) {
  for (auto& e : example_corpus())
    if (e.name == name) return e;
  return std::nullopt;
}

// A path, or example:<name> for a member of the fixture corpus.
Instance load_instance(const std::string& spec) {
  const std::string prefix = "example:";
  if (spec.rfind(prefix, 0) == 0) {
    const auto e = find_example(spec.substr(prefix.size()));
    if (!e) throw FormatError("instance: unknown example \"" + spec.substr(prefix.size()) + "\"");
    return {e->bp, std::nullopt};
  }
  return instance_from_json(read_json_file(spec));
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write");
  out << text;
}

std::string vec_str(const Vector& v) {
  std::string s = "(";
  for (int i = 0; i < v.size(); ++i) s += (i ? ", " : "") + detail::fmt("%.6g", v[i]);
  return s + ")";
}

// ---- gen ----

struct GenArgs {
  int n = 2, l = 3, m = 3, p = 3;
  double density = 0.5;
  std::string out;
};

int cmd_gen(const GenArgs& a, const Common& c) {
  const auto lin = gen_linear(a.n, a.l, a.m, a.p, a.density, c.seed);
  emit(a.out, to_json(lin).dump(2) + "\n");
  return 0;
}

// ---- solve ----

struct SolveArgs {
  std::string instance;
  std::string scheme = "mdp1";
  std::vector<double> x0;
  bool json = false;
  std::string out;
};

int cmd_solve(const SolveArgs& a, const Common& c) {
  const auto scheme = parse_scheme(a.scheme);
  if (!scheme) throw CLI::ValidationError("--scheme", "unknown scheme " + a.scheme);
  const Instance inst = load_instance(a.instance);
  std::optional<Vector> x0;
  if (!a.x0.empty()) {
    if (static_cast<int>(a.x0.size()) != inst.bp.n)
      throw CLI::ValidationError("--x0", "expected " + std::to_string(inst.bp.n) + " values");
    x0 = Eigen::Map<const Vector>(a.x0.data(), inst.bp.n);
  }
  const SolveReport r = inst.lin ? run(*inst.lin, *scheme, c.params, x0) : run(inst.bp, *scheme, c.params, x0);
  std::ostringstream os;
  if (a.json) {
    os << to_json(r).dump(2) << '\n';
  } else {
    os << "scheme:        " << to_string(r.scheme) << '\n'
       << "reason:        " << to_string(r.reason) << '\n'
       << "ObjVal:        " << detail::fmt("%.8g", r.objective) << '\n'
       << "x:             " << vec_str(r.x) << '\n'
       << "y:             " << vec_str(r.y) << '\n';
    if (r.infeasibility)
      os << "Infeasibility: " << detail::fmt("%.3e", r.infeasibility->total) << "  (upper "
         << detail::fmt("%.2e", r.infeasibility->upper_violation) << ", lower "
         << detail::fmt("%.2e", r.infeasibility->lower_feasibility_violation) << ", bounds "
         << detail::fmt("%.2e", r.infeasibility->bound_violation) << ", gap "
         << detail::fmt("%.2e", r.infeasibility->optimality_gap) << ")\n";
    else
      os << "Infeasibility: n/a (" << (inst.lin ? "unbounded run" : "defined for linear instances") << ")\n";
    os << "violation:     " << detail::fmt("%.3e", r.base_violation) << '\n'
       << "outer iters:   " << r.trace.size() << '\n'
       << "Time:          " << detail::fmt("%.3f", r.seconds) << " s\n";
  }
  emit(a.out, os.str());
  return r.reason == TerminalReason::IterLimit ? 1 : 0;
}

// ---- bench ----

struct BenchArgs {
  std::string config;
  std::vector<std::string> dims;
  int count = 20;
  double density = 0.5;
  std::vector<std::string> schemes;
  int repeats = 1;
  int jobs = 1;
  std::string csv, md, out;
};

Dims parse_dims(const std::string& s) {
  Dims d;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream in(s);
  if (!(in >> d.n >> c1 >> d.l >> c2 >> d.m >> c3 >> d.p) || c1 != ',' || c2 != ',' || c3 != ',' || !in.eof())
    throw CLI::ValidationError("--dims", "expected n,l,m,p but got \"" + s + "\"");
  return d;
}

int cmd_bench(const BenchArgs& a, const Common& c, const CLI::App& sub) {
  BenchConfig cfg;
  if (!a.config.empty()) cfg = bench_config_from_json(read_json_file(a.config));
  // flags given on the command line override the config file
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (a.config.empty() || given("--seed")) cfg.seed = c.seed;
  if (a.config.empty() || given("--count")) cfg.count = a.count;
  if (a.config.empty() || given("--density")) cfg.density = a.density;
  if (a.config.empty() || given("--repeats")) cfg.repeats = a.repeats;
  if (a.config.empty() || given("--jobs")) cfg.jobs = a.jobs;
  if (given("--tol-r")) cfg.params.eps_r = c.params.eps_r;
  if (given("--tol-sqp")) cfg.params.eps_sqp = c.params.eps_sqp;
  if (given("--t0")) cfg.params.t0 = c.params.t0;
  if (given("--sigma")) cfg.params.sigma = c.params.sigma;
  if (given("--max-outer")) cfg.params.max_outer = c.params.max_outer;
  if (!a.dims.empty()) {
    cfg.dims.clear();
    for (const auto& s : a.dims) cfg.dims.push_back(parse_dims(s));
  }
  if (!a.schemes.empty()) {
    cfg.schemes.clear();
    for (const auto& s : a.schemes) {
      const auto sc = parse_scheme(s);
      if (!sc) throw CLI::ValidationError("--schemes", "unknown scheme " + s);
      cfg.schemes.push_back(*sc);
    }
  }
  if (cfg.dims.empty()) throw CLI::ValidationError("--dims", "give --dims or a --config with dims");
  cfg.validate();

  const auto rows = run_suite(cfg);
  const auto sum = summarize(rows);
  if (!a.csv.empty()) {
    std::ostringstream os;
    write_csv(os, rows);
    emit(a.csv, os.str());
  }
  if (!a.md.empty()) {
    std::ostringstream os;
    write_markdown(os, rows);
    emit(a.md, os.str());
  }
  std::ostringstream os;
  write_summary(os, sum);
  int errors = 0;
  for (const auto& r : rows) errors += !r.error.empty();
  os << "\n" << rows.size() << " runs, " << errors << " with errors\n";
  emit(a.out, os.str());
  return 0;
}

// ---- check ----

struct CheckArgs {
  std::string point_file;
  std::string instance;
  std::string out;
};

Nlp reformulation(const BilevelProgram& bp, const std::string& name) {
  if (name == "mpcc") return build_mpcc(bp);
  if (name == "mdp") return build_mdp(bp);
  if (name == "wdp") return build_wdp(bp);
  throw FormatError("reformulation: expected \"mpcc\", \"mdp\" or \"wdp\"");
}

int cmd_check(const CheckArgs& a) {
  const Json spec = read_json_file(a.point_file);
  std::string inst_spec = a.instance;
  if (inst_spec.empty()) {
    const Json& f = io::field(spec, "instance", "");
    if (!f.is_string()) throw FormatError("instance: expected a path or example:<name>");
    inst_spec = f.get<std::string>();
  }
  const Instance inst = load_instance(inst_spec);
  const Json& rf = io::field(spec, "reformulation", "");
  if (!rf.is_string()) throw FormatError("reformulation: expected a string");
  const std::string name = rf.get<std::string>();
  const Nlp p = reformulation(inst.bp, name);
  const Vector w = io::read_vec(io::field(spec, "point", ""), "point");
  if (w.size() != p.num_vars)
    throw FormatError("point: expected " + std::to_string(p.num_vars) + " entries for " + name);

  std::vector<std::string> checks = {"kkt", "mfcq"};
  if (spec.contains("checks")) {
    checks.clear();
    for (const auto& c : spec.at("checks")) {
      if (!c.is_string()) throw FormatError("checks: expected strings");
      checks.push_back(c.get<std::string>());
    }
  }
  Json out = Json::object();
  out["reformulation"] = name;
  out["point"] = io::vec(w);
  out["max_violation"] = io::number(p.max_violation(w));
  for (const auto& c : checks) {
    if (c == "kkt") {
      out["kkt"] = to_json(check_kkt(p, w));
    } else if (c == "mfcq") {
      out["mfcq"] = to_json(check_mfcq(p, w));
    } else if (c == "s_stationary") {
      if (name != "mpcc") throw FormatError("checks: s_stationary needs reformulation \"mpcc\"");
      out["s_stationary"] = to_json(check_s_stationary(p, w));
    } else if (c == "transfer") {
      if (name != "mdp") throw FormatError("checks: transfer needs reformulation \"mdp\"");
      out["transfer"] = to_json(check_multiplier_transfer(p, w, check_kkt(p, w), build_mpcc(inst.bp)));
    } else if (c == "abnormal_witness") {
      if (name != "mdp") throw FormatError("checks: abnormal_witness needs reformulation \"mdp\"");
      const Multipliers m = mdp_abnormal_witness(p, w);
      out["abnormal_witness"] = {{"multipliers", to_json(m)}, {"residual", io::number(abnormal_residual(p, w, m))}};
    } else if (c == "infeasibility") {
      if (!inst.lin) throw FormatError("checks: infeasibility needs a linear instance");
      const int n = inst.bp.n, m = inst.bp.m;
      out["infeasibility"] = to_json(infeasibility(*inst.lin, w.head(n), w.segment(n, m)));
    } else {
      throw FormatError("checks: unknown check \"" + c + "\"");
    }
  }
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

// ---- examples ----

struct Line {
  bool ok;
  std::string text;
};

Line example_line(const ExampleCase& e, const RelaxationParams& params) {
  char buf[256];
  if (e.name == "cubic_wolfe_gap") {
    const auto r = run(e.bp, RelaxationScheme::MDP1, params);
    const double dist = (r.point - e.mdp_point).lpNorm<Eigen::Infinity>();
    const bool ok = std::abs(r.objective - e.value) <= 1e-4 && dist <= 1e-3;
    std::snprintf(buf, sizeof buf, "MDP1 objective %.6f (expected %.1f), distance to MDP point %.1e", r.objective,
                  e.value, dist);
    return {ok, buf};
  }
  if (e.name == "cubic_degenerate") {
    // The relaxed optimum only approaches 0 like t^(1/3); the tolerance here is 1e-2.
    const auto r = run(e.bp, RelaxationScheme::MDP1, params);
    const double dist = r.point.lpNorm<Eigen::Infinity>();
    const bool ok = std::abs(r.objective - e.value) <= 1e-2 && dist <= 1e-2;
    std::snprintf(buf, sizeof buf, "MDP1 objective %.2e (expected 0 within 1e-2), distance to origin %.1e",
                  r.objective, dist);
    return {ok, buf};
  }
  if (e.name == "mfcq_cubic") {
    const auto c = check_mfcq(build_mdp(e.bp), e.mdp_point);
    std::snprintf(buf, sizeof buf, "MFCQ at the MDP point: %s, margin %.3g", to_string(c.kind), c.margin);
    return {c.kind == CertificateKind::MfcqDirection, buf};
  }
  if (e.name == "quadratic_two_rows") {
    const auto s = check_s_stationary(build_mpcc(e.bp), e.mpcc_point);
    const auto k = check_kkt(build_mdp(e.bp), e.mdp_point);
    std::snprintf(buf, sizeof buf, "MPCC point %s, MDP point %s (phase-1 gap %.3g)", to_string(s.kind),
                  to_string(k.kind), k.phase1_gap);
    return {s.kind == CertificateKind::SStationary && k.kind == CertificateKind::NotKkt && k.phase1_gap >= 1.0, buf};
  }
  return {false, "no check defined"};
}

int cmd_examples(const Common& c) {
  int failed = 0;
  for (const auto& e : example_corpus()) {
    Line line;
    try {
      line = example_line(e, c.params);
    } catch (const std::exception& ex) {
      line = {false, std::string("error: ") + ex.what()};
    }
    failed += !line.ok;
    std::cout << (line.ok ? "PASS " : "FAIL ") << e.name << ": " << line.text << '\n';
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relaxation methods for bilevel programs via duality reformulations"};
  app.require_subcommand(1);

  Common common;

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a random linear bilevel instance (JSON)");
  g->add_option("--n", gen.n, "Upper-level variables")->check(CLI::PositiveNumber);
  g->add_option("--l", gen.l, "Upper-level constraints")->check(CLI::NonNegativeNumber);
  g->add_option("--m", gen.m, "Lower-level variables")->check(CLI::PositiveNumber);
  g->add_option("--p", gen.p, "Lower-level constraints")->check(CLI::NonNegativeNumber);
  g->add_option("--density", gen.density, "Fraction of nonzero matrix entries")->check(CLI::Range(0.0, 1.0));
  g->add_option("-o,--output", gen.out, "Output file (default stdout)");
  add_common(g, common);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Run one relaxation scheme on one instance");
  s->add_option("instance", solve.instance, "Instance JSON file or example:<name>")->required();
  s->add_option("--scheme", solve.scheme, "mdp1, mdp2, mdp3, wdp_t or mpcc_t");
  s->add_option("--x0", solve.x0, "Upper-level starting point");
  s->add_flag("--json", solve.json, "Print the report as JSON");
  s->add_option("-o,--output", solve.out, "Output file (default stdout)");
  add_common(s, common);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run a benchmark suite and print the summary tables");
  b->add_option("--config", bench.config, "Suite configuration JSON");
  b->add_option("--dims", bench.dims, "Instance sizes n,l,m,p (repeatable)");
  b->add_option("--count", bench.count, "Instances per size")->check(CLI::PositiveNumber);
  b->add_option("--density", bench.density, "Fraction of nonzero matrix entries")->check(CLI::Range(0.0, 1.0));
  b->add_option("--schemes", bench.schemes, "Schemes to run (default all)");
  b->add_option("--repeats", bench.repeats, "Timed runs per cell")->check(CLI::PositiveNumber);
  b->add_option("--jobs", bench.jobs, "Worker threads")->check(CLI::PositiveNumber);
  b->add_option("--csv", bench.csv, "Write all rows as CSV");
  b->add_option("--md", bench.md, "Write per-scheme markdown tables");
  b->add_option("-o,--output", bench.out, "Summary output file (default stdout)");
  add_common(b, common);

  CheckArgs check;
  auto* c = app.add_subcommand("check", "Run diagnostics on a point of a reformulation");
  c->add_option("point_file", check.point_file,
                "JSON {\"instance\", \"reformulation\": mpcc|mdp|wdp, \"point\": [...], \"checks\": [...]}")
      ->required();
  c->add_option("--instance", check.instance, "Instance file or example:<name>, overriding the point file");
  c->add_option("-o,--output", check.out, "Output file (default stdout)");
  add_common(c, common);

  auto* e = app.add_subcommand("examples", "Check the four worked examples");
  add_common(e, common);

  try {
    app.parse(argc, argv);
    common.params.validate();
    if (g->parsed()) return cmd_gen(gen, common);
    if (s->parsed()) return cmd_solve(solve, common);
    if (b->parsed()) return cmd_bench(bench, common, *b);
    if (c->parsed()) return cmd_check(check);
    if (e->parsed()) return cmd_examples(common);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "solver failure: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
