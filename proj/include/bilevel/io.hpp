#pragma once

// JSON formats for instances, single-level problems, certificates and solve
// reports. Non-finite numbers are written as the strings "inf", "-inf", "nan".

#include "bilevel/bench.hpp"
#include "bilevel/diagnostics.hpp"
#include "bilevel/model.hpp"
#include "bilevel/relaxation.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bilevel {

using Json = nlohmann::ordered_json;

/// Malformed input; the message names the offending field.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double to_number(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
  }
  throw FormatError(field + ": expected a number");
}

inline Json vec(const Vector& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

inline Json mat(const Matrix& M) {
  Json a = Json::array();
  for (int i = 0; i < M.rows(); ++i) a.push_back(vec(M.row(i).transpose()));
  return a;
}

inline const Json& field(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(where + key + ": missing");
  return j.at(key);
}

inline Vector read_vec(const Json& j, const std::string& name) {
  if (!j.is_array()) throw FormatError(name + ": expected an array");
  Vector v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = to_number(j[i], name + "[" + std::to_string(i) + "]");
  return v;
}

// Dense row-major; `cols` fixes the width of empty matrices.
inline Matrix read_mat(const Json& j, const std::string& name, int cols) {
  if (!j.is_array()) throw FormatError(name + ": expected an array of rows");
  Matrix M(static_cast<int>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector r = read_vec(j[i], name + "[" + std::to_string(i) + "]");
    if (r.size() != cols)
      throw FormatError(name + "[" + std::to_string(i) + "]: expected " + std::to_string(cols) + " entries");
    M.row(static_cast<int>(i)) = r.transpose();
  }
  return M;
}

/// [[coef, {"var": exp, ...}], ...] with variables numbered from 0.
inline Json poly(const PolyFunction& f) {
  Json a = Json::array();
  for (const auto& t : f.terms()) {
    Json pw = Json::object();
    for (const auto& [var, exp] : t.powers) pw[std::to_string(var)] = exp;
    a.push_back(Json::array({number(t.coef), pw}));
  }
  return a;
}

inline PolyFunction read_poly(const Json& j, int num_vars, const std::string& name) {
  if (!j.is_array()) throw FormatError(name + ": expected an array of terms");
  std::vector<PolyFunction::Term> terms;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string where = name + "[" + std::to_string(k) + "]";
    const Json& t = j[k];
    if (!t.is_array() || t.size() != 2 || !t[1].is_object()) throw FormatError(where + ": expected [coef, {var: exp}]");
    PolyFunction::Term term;
    term.coef = to_number(t[0], where);
    for (const auto& [key, val] : t[1].items()) {
      int var = -1;
      try {
        std::size_t used = 0;
        var = std::stoi(key, &used);
        if (used != key.size()) var = -1;
      } catch (const std::exception&) {
      }
      if (var < 0 || var >= num_vars) throw FormatError(where + ": bad variable \"" + key + "\"");
      if (!val.is_number_integer() || val.get<int>() < 1) throw FormatError(where + ": exponent must be an integer >= 1");
      term.powers.emplace_back(var, val.get<int>());
    }
    std::sort(term.powers.begin(), term.powers.end());
    terms.push_back(std::move(term));
  }
  try {
    return PolyFunction(num_vars, std::move(terms));
  } catch (const std::exception& e) {
    throw FormatError(name + ": " + e.what());
  }
}

}  // namespace io

inline Json to_json(const LinearBilevel& lin) {
  using io::mat;
  using io::vec;
  return Json{{"type", "linear"}, {"c1", vec(lin.c1)}, {"c2", vec(lin.c2)}, {"A1", mat(lin.A1)}, {"b1", vec(lin.b1)},
              {"d2", vec(lin.d2)},  {"A2", mat(lin.A2)}, {"B2", mat(lin.B2)}, {"b2", vec(lin.b2)}, {"bl", vec(lin.bl)},
              {"bu", vec(lin.bu)}};
}

inline Json to_json(const BilevelProgram& bp) {
  Json j{{"type", "general"}, {"n", bp.n}, {"m", bp.m}, {"F", io::poly(bp.F)}};
  auto list = [](const std::vector<PolyFunction>& fs) {
    Json a = Json::array();
    for (const auto& f : fs) a.push_back(io::poly(f));
    return a;
  };
  j["omega_ineq"] = list(bp.omega_ineq);
  j["omega_eq"] = list(bp.omega_eq);
  j["f"] = io::poly(bp.f);
  j["g"] = list(bp.g);
  j["h"] = list(bp.h);
  return j;
}

inline LinearBilevel linear_from_json(const Json& j) {
  using io::field;
  LinearBilevel lin;
  lin.c1 = io::read_vec(field(j, "c1", ""), "c1");
  lin.c2 = io::read_vec(field(j, "c2", ""), "c2");
  const int n = static_cast<int>(lin.c1.size()), m = static_cast<int>(lin.c2.size());
  lin.A1 = io::read_mat(field(j, "A1", ""), "A1", n);
  lin.b1 = io::read_vec(field(j, "b1", ""), "b1");
  lin.d2 = io::read_vec(field(j, "d2", ""), "d2");
  lin.A2 = io::read_mat(field(j, "A2", ""), "A2", n);
  lin.B2 = io::read_mat(field(j, "B2", ""), "B2", m);
  lin.b2 = io::read_vec(field(j, "b2", ""), "b2");
  lin.bl = io::read_vec(field(j, "bl", ""), "bl");
  lin.bu = io::read_vec(field(j, "bu", ""), "bu");
  try {
    lin.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return lin;
}

inline BilevelProgram general_from_json(const Json& j) {
  using io::field;
  BilevelProgram bp;
  const Json& n = field(j, "n", ""), &m = field(j, "m", "");
  if (!n.is_number_integer() || !m.is_number_integer()) throw FormatError("n, m: expected integers");
  bp.n = n.get<int>();
  bp.m = m.get<int>();
  if (bp.n < 0 || bp.m < 1) throw FormatError("n, m: need n >= 0 and m >= 1");
  const int nv = bp.n + bp.m;
  bp.F = io::read_poly(field(j, "F", ""), nv, "F");
  bp.f = io::read_poly(field(j, "f", ""), nv, "f");
  auto list = [&](const char* key) {
    std::vector<PolyFunction> out;
    if (!j.contains(key)) return out;
    const Json& a = j.at(key);
    if (!a.is_array()) throw FormatError(std::string(key) + ": expected an array");
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(io::read_poly(a[i], nv, std::string(key) + "[" + std::to_string(i) + "]"));
    return out;
  };
  bp.omega_ineq = list("omega_ineq");
  bp.omega_eq = list("omega_eq");
  bp.g = list("g");
  bp.h = list("h");
  return bp;
}

/// An instance file: the linear form when "type" is "linear", else general.
struct Instance {
  BilevelProgram bp;
  std::optional<LinearBilevel> lin;
};

inline Instance instance_from_json(const Json& j) {
  const Json& type = io::field(j, "type", "");
  if (!type.is_string()) throw FormatError("type: expected \"linear\" or \"general\"");
  Instance inst;
  if (type.get<std::string>() == "linear") {
    inst.lin = linear_from_json(j);
    inst.bp = to_general(*inst.lin);
  } else if (type.get<std::string>() == "general") {
    inst.bp = general_from_json(j);
  } else {
    throw FormatError("type: expected \"linear\" or \"general\"");
  }
  try {
    inst.bp.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return inst;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline Json to_json(const Nlp& p) {
  Json j{{"num_vars", p.num_vars}};
  Json blocks = Json::array();
  for (const auto& b : p.blocks) blocks.push_back({{"name", b.name}, {"begin", b.begin}, {"size", b.size}});
  j["blocks"] = blocks;
  j["objective"] = io::poly(p.objective);
  auto rows = [](const std::vector<Constraint>& cs) {
    Json a = Json::array();
    for (const auto& c : cs) a.push_back({{"kind", to_string(c.kind)}, {"index", c.index}, {"fn", io::poly(c.fn)}});
    return a;
  };
  j["ineq"] = rows(p.ineq);
  j["eq"] = rows(p.eq);
  j["lower"] = io::vec(p.lower);
  j["upper"] = io::vec(p.upper);
  return j;
}

inline Json to_json(const Multipliers& m) {
  return {{"ineq", io::vec(m.ineq)}, {"eq", io::vec(m.eq)}, {"lower", io::vec(m.lower)}, {"upper", io::vec(m.upper)}};
}

inline Json to_json(const Certificate& c) {
  Json j{{"kind", to_string(c.kind)}, {"residual", io::number(c.residual)}};
  switch (c.kind) {
    case CertificateKind::MfcqDirection:
      j["direction"] = io::vec(c.direction);
      j["margin"] = io::number(c.margin);
      break;
    case CertificateKind::MfcqFailAbnormal:
    case CertificateKind::KktMultipliers: j["multipliers"] = to_json(c.multipliers); break;
    case CertificateKind::SStationary: break;
    case CertificateKind::NotKkt: j["phase1_gap"] = io::number(c.phase1_gap); break;
  }
  if (c.s_mult) {
    const auto& s = *c.s_mult;
    j["s_multipliers"] = {{"lambda_g", io::vec(s.g)},          {"lambda_h", io::vec(s.h)},
                          {"lambda_u", io::vec(s.u)},          {"lambda_L", io::vec(s.L)},
                          {"omega_ineq", io::vec(s.omega_ineq)}, {"omega_eq", io::vec(s.omega_eq)}};
  }
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline Json to_json(const InfeasibilityReport& r) {
  return {{"upper_violation", io::number(r.upper_violation)},
          {"lower_feasibility_violation", io::number(r.lower_feasibility_violation)},
          {"bound_violation", io::number(r.bound_violation)},
          {"optimality_gap", io::number(r.optimality_gap)},
          {"total", io::number(r.total)},
          {"value_infinite", r.value_infinite}};
}

inline Json to_json(const SolveReport& r) {
  Json j{{"scheme", to_string(r.scheme)}, {"reason", to_string(r.reason)}, {"objective", io::number(r.objective)},
         {"x", io::vec(r.x)},           {"y", io::vec(r.y)}};
  if (r.z.size() > 0) j["z"] = io::vec(r.z);
  j["u"] = io::vec(r.u);
  j["v"] = io::vec(r.v);
  j["base_violation"] = io::number(r.base_violation);
  j["kkt_residual"] = io::number(r.kkt_residual);
  if (r.infeasibility) j["infeasibility"] = to_json(*r.infeasibility);
  Json tr = Json::array();
  for (const auto& s : r.trace)
    tr.push_back({{"k", s.k},
                  {"t", io::number(s.t)},
                  {"inner_status", to_string(s.inner_status)},
                  {"inner_objective", io::number(s.inner_objective)},
                  {"inner_iterations", s.inner_iterations},
                  {"warm_from_lower", s.warm_from_lower},
                  {"seconds", io::number(s.seconds)}});
  j["trace"] = tr;
  j["seconds"] = io::number(r.seconds);
  return j;
}

/// {"dims": [[n,l,m,p], ...], "count", "seed", "density", "schemes": ["mdp1", ...],
///  "t0", "sigma", "eps_r", "eps_sqp", "max_outer", "repeats", "jobs"}; all but dims optional.
inline BenchConfig bench_config_from_json(const Json& j) {
  BenchConfig cfg;
  const Json& dims = io::field(j, "dims", "");
  if (!dims.is_array() || dims.empty()) throw FormatError("dims: expected a non-empty array of [n,l,m,p]");
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const auto& d = dims[k];
    if (!d.is_array() || d.size() != 4) throw FormatError("dims[" + std::to_string(k) + "]: expected [n,l,m,p]");
    for (const auto& v : d)
      if (!v.is_number_integer()) throw FormatError("dims[" + std::to_string(k) + "]: expected integers");
    cfg.dims.push_back({d[0].get<int>(), d[1].get<int>(), d[2].get<int>(), d[3].get<int>()});
  }
  auto num = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    using T = std::decay_t<decltype(dst)>;
    if constexpr (std::is_floating_point_v<T>) {
      dst = io::to_number(j.at(key), key);
    } else {
      if (!j.at(key).is_number_integer()) throw FormatError(std::string(key) + ": expected an integer");
      dst = j.at(key).get<T>();
    }
  };
  num("count", cfg.count);
  num("seed", cfg.seed);
  num("density", cfg.density);
  num("t0", cfg.params.t0);
  num("sigma", cfg.params.sigma);
  num("eps_r", cfg.params.eps_r);
  num("eps_sqp", cfg.params.eps_sqp);
  num("max_outer", cfg.params.max_outer);
  num("repeats", cfg.repeats);
  num("jobs", cfg.jobs);
  if (j.contains("schemes")) {
    cfg.schemes.clear();
    for (const auto& s : j.at("schemes")) {
      const auto sc = s.is_string() ? parse_scheme(s.get<std::string>()) : std::nullopt;
      if (!sc) throw FormatError("schemes: unknown scheme " + s.dump());
      cfg.schemes.push_back(*sc);
    }
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return cfg;
}

}  // namespace bilevel
