#include "topp3/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& what) {
  raise(ErrorCode::SchemaError, what);
}

const json& require(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    schema_fail(std::string("missing key \"") + key + "\" in " + where);
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) schema_fail("expected a number at " + where);
  return j.get<double>();
}

Vector vec(const json& j, const std::string& where) {
  if (!j.is_array()) schema_fail("expected an array at " + where);
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    v[static_cast<int>(i)] = number(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

// round-trip through the 12-significant-digit text form so JSON output
// matches the CSV formatting convention
double j12(double v) { return std::strtod(fmt_g12(v).c_str(), nullptr); }

json jvec(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(j12(v[i]));
  return arr;
}

}  // namespace

Topp3Problem Scenario::problem(double jerk_scale) const {
  std::optional<double> cap = jerk_cap;
  if (cap) *cap *= jerk_scale;
  ConstraintSet cs(path, jerk_min * jerk_scale, jerk_max * jerk_scale, eps_a,
                   cap);
  Topp3Problem p{path, std::move(cs), bc, {}};
  p.opts.limits.dt = dt;
  p.opts.segments = segments;
  p.opts.newton.seed = seed;
  return p;
}

Scenario load_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema_fail(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) schema_fail("scenario must be a JSON object");
  const int schema = require(j, "schema", "scenario").get<int>();
  if (schema != 1) schema_fail("unsupported schema version");

  Scenario sc;

  const json& jp = require(j, "path", "scenario");
  const int n_dof = require(jp, "n_dof", "path").get<int>();
  const double s_end = number(require(jp, "s_end", "path"), "path.s_end");
  const json& joints = require(jp, "joints", "path");
  if (!joints.is_array() || static_cast<int>(joints.size()) != n_dof)
    schema_fail("path.joints must be an array of n_dof entries");
  std::vector<JointPolynomial> jpolys;
  for (int jj = 0; jj < n_dof; ++jj) {
    const json& joint = joints[jj];
    const std::string where = "path.joints[" + std::to_string(jj) + "]";
    JointPolynomial poly;
    const Vector bp = vec(require(joint, "breakpoints", where.c_str()), where);
    poly.breakpoints.assign(bp.data(), bp.data() + bp.size());
    const json& pieces = require(joint, "pieces", where.c_str());
    if (!pieces.is_array()) schema_fail(where + ".pieces must be an array");
    for (size_t p = 0; p < pieces.size(); ++p) {
      const Vector c = vec(pieces[p], where + ".pieces");
      poly.pieces.emplace_back(c.data(), c.data() + c.size());
    }
    jpolys.push_back(std::move(poly));
  }
  try {
    sc.path = std::make_shared<PathSpec>(std::move(jpolys), s_end);
  } catch (const Error& e) {
    schema_fail(std::string("invalid path: ") + e.what());
  }

  const json& jc = require(j, "constraints", "scenario");
  for (auto it = jc.begin(); it != jc.end(); ++it) {
    const std::string& key = it.key();
    if (key != "jerk_min" && key != "jerk_max" && key != "eps_a" &&
        key != "jerk_cap")
      schema_fail("unsupported key \"" + key +
                  "\" in constraints (only pure third-order jerk bounds are "
                  "supported)");
  }
  sc.jerk_min = vec(require(jc, "jerk_min", "constraints"), "constraints.jerk_min");
  sc.jerk_max = vec(require(jc, "jerk_max", "constraints"), "constraints.jerk_max");
  if (sc.jerk_min.size() != n_dof || sc.jerk_max.size() != n_dof)
    schema_fail("jerk bounds must have n_dof entries");
  if (jc.contains("eps_a")) sc.eps_a = number(jc["eps_a"], "constraints.eps_a");
  if (jc.contains("jerk_cap"))
    sc.jerk_cap = number(jc["jerk_cap"], "constraints.jerk_cap");

  const json& jb = require(j, "boundary", "scenario");
  sc.bc.v_beg = vec(require(jb, "v_beg", "boundary"), "boundary.v_beg");
  sc.bc.a_beg = vec(require(jb, "a_beg", "boundary"), "boundary.a_beg");
  sc.bc.v_end = vec(require(jb, "v_end", "boundary"), "boundary.v_end");
  sc.bc.a_end = vec(require(jb, "a_end", "boundary"), "boundary.a_end");
  for (const Vector* v : {&sc.bc.v_beg, &sc.bc.a_beg, &sc.bc.v_end, &sc.bc.a_end})
    if (v->size() != n_dof) schema_fail("boundary vectors must have n_dof entries");

  if (j.contains("options")) {
    const json& jo = j["options"];
    if (jo.contains("dt")) sc.dt = number(jo["dt"], "options.dt");
    if (jo.contains("N")) sc.segments = jo["N"].get<int>();
    if (jo.contains("seed")) sc.seed = jo["seed"].get<std::uint64_t>();
  }
  if (!(sc.dt > 0)) schema_fail("options.dt must be positive");
  if (sc.segments < 1) schema_fail("options.N must be >= 1");
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) schema_fail("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["schema"] = 1;
  json jp;
  jp["n_dof"] = sc.path->n_dof();
  jp["s_end"] = j12(sc.path->s_end());
  json joints = json::array();
  for (const auto& joint : sc.path->joints()) {
    json jj;
    json bp = json::array();
    for (double b : joint.breakpoints) bp.push_back(j12(b));
    jj["breakpoints"] = bp;
    json pieces = json::array();
    for (const auto& piece : joint.pieces) {
      json pc = json::array();
      for (double c : piece) pc.push_back(j12(c));
      pieces.push_back(pc);
    }
    jj["pieces"] = pieces;
    joints.push_back(jj);
  }
  jp["joints"] = joints;
  j["path"] = jp;
  json jc;
  jc["jerk_min"] = jvec(sc.jerk_min);
  jc["jerk_max"] = jvec(sc.jerk_max);
  jc["eps_a"] = j12(sc.eps_a);
  if (sc.jerk_cap) jc["jerk_cap"] = j12(*sc.jerk_cap);
  j["constraints"] = jc;
  json jb;
  jb["v_beg"] = jvec(sc.bc.v_beg);
  jb["a_beg"] = jvec(sc.bc.a_beg);
  jb["v_end"] = jvec(sc.bc.v_end);
  jb["a_end"] = jvec(sc.bc.a_end);
  j["boundary"] = jb;
  json jo;
  jo["dt"] = j12(sc.dt);
  jo["N"] = sc.segments;
  jo["seed"] = sc.seed;
  j["options"] = jo;
  return j.dump(2) + "\n";
}

std::string solution_to_json(const Topp3Solution& sol,
                             const std::vector<std::string>& file_refs) {
  json j;
  j["schema"] = 1;
  j["status"] = to_string(sol.status);
  if (!sol.message.empty()) j["message"] = sol.message;
  j["duration"] = j12(sol.duration);
  json tags = json::array();
  json bands = json::array();
  json pieces = json::array();
  for (const auto& p : sol.pieces) {
    tags.push_back(to_string(p.tag));
    bands.push_back(p.singular_band);
    json piece;
    piece["tag"] = to_string(p.tag);
    piece["singular_band"] = p.singular_band;
    piece["s_begin"] = j12(p.profile.s_min());
    piece["s_end"] = j12(p.profile.s_max());
    piece["t_begin"] = j12(p.t_begin);
    piece["t_end"] = j12(p.t_end);
    piece["termination"] = to_string(p.profile.termination());
    pieces.push_back(piece);
  }
  j["structure"] = tags;
  j["singular_bands"] = bands;
  j["pieces"] = pieces;
  json sw = json::array();
  for (double s : sol.switch_positions) sw.push_back(j12(s));
  j["switch_positions"] = sw;
  j["bridge"] = {{"iterations", sol.bridge_iterations},
                 {"restarts", sol.bridge_restarts}};
  j["extensions"] = {{"forward", sol.extensions_forward},
                     {"backward", sol.extensions_backward}};
  if (sol.status == SolveStatus::ExtensionFailed)
    j["failed_s_star"] = j12(sol.failed_s_star);
  json files = json::array();
  for (const auto& f : file_refs) files.push_back(f);
  j["files"] = files;
  return j.dump(2) + "\n";
}

void write_trajectory_csv(std::ostream& os,
                          const std::vector<TrajectorySample>& samples) {
  const int dof = samples.empty() ? 0 : static_cast<int>(samples.front().q.size());
  os << "t,s,sd,sdd,sddd";
  for (const char* base : {"q", "qd", "qdd", "qddd"})
    for (int j = 0; j < dof; ++j) os << ',' << base << j;
  os << '\n';
  for (const auto& smp : samples) {
    os << fmt_g12(smp.t) << ',' << fmt_g12(smp.s) << ',' << fmt_g12(smp.sd)
       << ',' << fmt_g12(smp.sdd) << ',' << fmt_g12(smp.sddd);
    for (const Vector* v : {&smp.q, &smp.qd, &smp.qdd, &smp.qddd})
      for (int j = 0; j < dof; ++j) os << ',' << fmt_g12((*v)[j]);
    os << '\n';
  }
}

std::vector<TrajectorySample> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    raise(ErrorCode::SchemaError, "empty trajectory CSV");
  int cols = 1;
  for (char c : line) cols += c == ',';
  if (cols < 5 || (cols - 5) % 4 != 0)
    raise(ErrorCode::SchemaError, "trajectory CSV must have 5 + 4*n_dof columns");
  const int dof = (cols - 5) / 4;

  std::vector<TrajectorySample> out;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        raise(ErrorCode::SchemaError, "bad number in trajectory CSV: " + cell);
      vals.push_back(v);
    }
    if (static_cast<int>(vals.size()) != cols)
      raise(ErrorCode::SchemaError, "ragged trajectory CSV row");
    TrajectorySample smp;
    smp.t = vals[0];
    smp.s = vals[1];
    smp.sd = vals[2];
    smp.sdd = vals[3];
    smp.sddd = vals[4];
    smp.q.resize(dof);
    smp.qd.resize(dof);
    smp.qdd.resize(dof);
    smp.qddd.resize(dof);
    for (int j = 0; j < dof; ++j) {
      smp.q[j] = vals[5 + j];
      smp.qd[j] = vals[5 + dof + j];
      smp.qdd[j] = vals[5 + 2 * dof + j];
      smp.qddd[j] = vals[5 + 3 * dof + j];
    }
    out.push_back(std::move(smp));
  }
  return out;
}

void write_singular_csv(std::ostream& os,
                        const std::vector<SingularCurve>& curves) {
  os << "s_star,k,side,sd,sdd\n";
  for (const auto& c : curves) {
    for (size_t i = 0; i < c.sd_samples.size(); ++i) {
      os << fmt_g12(c.parent.s_star) << ',' << c.parent.row << ','
         << to_string(c.parent.side) << ',' << fmt_g12(c.sd_samples[i]) << ','
         << fmt_g12(c.sdd_samples[i]) << '\n';
    }
  }
}

std::string trace_to_json(const NewtonTrace& trace) {
  json j;
  j["restarts"] = trace.restarts;
  json its = json::array();
  for (const auto& it : trace.iterates) {
    json ji;
    ji["iteration"] = it.iteration;
    ji["defect_norm"] = j12(it.defect_norm);
    ji["step_scale"] = j12(it.step_scale);
    json anchors = json::array();
    for (double a : it.anchors) anchors.push_back(j12(a));
    ji["anchors"] = anchors;
    its.push_back(ji);
  }
  j["iterates"] = its;
  return j.dump(2) + "\n";
}

}  // namespace topp3
