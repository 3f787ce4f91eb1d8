#include "rfbsde/config.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "rfbsde/error.hpp"

namespace rfbsde {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& e : v) s += (s.empty() ? "" : ", ") + e;
  return s;
}

// Strict view of one JSON object: every key must be consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("E_CONFIG_TYPE", "'" + label() + "' must be an object");
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  Obj child(const std::string& key) { return Obj(j_.at(key), at(key)); }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw type(key, "a number");
    out = v.get<double>();
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw type(key, "a number");
    out = v.get<double>();
  }
  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw type(key, "an integer");
    out = v.get<int>();
  }
  void get(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw type(key, "a nonnegative integer");
    out = v.get<std::size_t>();
  }
  void get(const std::string& key, std::uint64_t& out, bool) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw type(key, "a nonnegative integer");
    out = v.get<std::uint64_t>();
  }
  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw type(key, "a string");
    out = v.get<std::string>();
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (v.is_number()) {
      out = {v.get<double>()};
      return;
    }
    if (!v.is_array()) throw type(key, "a number or an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw type(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  void get(const std::string& key, Interval& out) {
    std::vector<double> v;
    get(key, v);
    if (!has(key)) return;
    if (v.size() != 2 || !(v[0] <= v[1])) throw type(key, "an interval [lo, hi] with lo <= hi");
    out = {v[0], v[1]};
  }

  template <class E>
  void choice(const std::string& key, E& out, const std::vector<std::pair<std::string, E>>& options) {
    std::string s;
    get(key, s);
    if (!has(key)) return;
    std::vector<std::string> names;
    for (const auto& [name, value] : options) {
      if (name == s) {
        out = value;
        return;
      }
      names.push_back(name);
    }
    throw ConfigError("E_CONFIG_VALUE", "'" + at(key) + "' must be one of: " + join(names));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("E_CONFIG_UNKNOWN_KEY", "unknown config key '" + at(it.key()) + "'");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  ConfigError type(const std::string& key, const std::string& what) const {
    return ConfigError("E_CONFIG_TYPE", "'" + at(key) + "' must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void one_of(const std::string& path, const std::string& value, const std::vector<std::string>& allowed) {
  for (const auto& a : allowed)
    if (a == value) return;
  throw ConfigError("E_CONFIG_VALUE", "'" + path + "' must be one of: " + join(allowed));
}

const std::vector<std::pair<std::string, HjbScheme>> kSchemes = {{"explicit", HjbScheme::explicit_euler},
                                                                  {"policy-iteration", HjbScheme::policy_iteration}};
const std::vector<std::pair<std::string, BoundaryRule>> kBoundaries = {
    {"quadratic-extrapolation", BoundaryRule::quadratic_extrapolation},
    {"linear-extrapolation", BoundaryRule::linear_extrapolation},
    {"one-sided-pde", BoundaryRule::one_sided_pde}};
const std::vector<std::pair<std::string, EstimatorKind>> kEstimators = {{"regression", EstimatorKind::regression},
                                                                         {"binning", EstimatorKind::binning}};
const std::vector<std::pair<std::string, TreeScheme>> kTreeSchemes = {{"second-order", TreeScheme::second_order},
                                                                       {"mc-consistent", TreeScheme::mc_consistent}};

template <class E>
std::string name_of(E value, const std::vector<std::pair<std::string, E>>& options) {
  for (const auto& [n, v] : options)
    if (v == value) return n;
  return "?";
}

}  // namespace

std::pair<double, double> default_box(const std::string& model) {
  if (model == "example-classical") return {0.1, 5.0};
  if (model == "example-viscosity") return {-5.0, 5.0};
  return {-2.0, 2.0};
}

SpaceTimeGrid RunConfig::space_time_grid() const {
  const auto box = default_box(model);
  SpaceTimeGrid g{0.0, horizon, time_steps, x_lo.value_or(box.first), x_hi.value_or(box.second), space_steps};
  g.check();
  return g;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("E_CONFIG_PARSE", std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Obj top(root, "");
  top.get("command", c.command);
  if (top.has("model")) {
    auto o = top.child("model");
    o.get("name", c.model);
    o.get("horizon", c.horizon);
    o.get("control_grid_points", c.control_grid_points);
    o.finish();
  }
  if (top.has("grid")) {
    auto o = top.child("grid");
    o.get("time_steps", c.time_steps);
    o.get("space_steps", c.space_steps);
    o.get("x_lo", c.x_lo);
    o.get("x_hi", c.x_hi);
    o.finish();
  }
  if (top.has("hjb")) {
    auto o = top.child("hjb");
    o.choice("scheme", c.hjb.scheme, kSchemes);
    o.choice("boundary", c.hjb.boundary, kBoundaries);
    o.get("substeps", c.hjb.substeps);
    o.get("cfl", c.hjb.cfl);
    o.get("policy_max_iterations", c.hjb.policy_max_iterations);
    o.get("policy_tol", c.hjb.policy_tol);
    o.get("penalty", c.hjb.penalty);
    o.finish();
  }
  if (top.has("point")) {
    auto o = top.child("point");
    o.get("t", c.t);
    o.get("x", c.x);
    o.finish();
  }
  if (top.has("cost")) {
    auto o = top.child("cost");
    o.get("method", c.cost_method);
    one_of("cost.method", c.cost_method, {"mc", "tree", "feedback"});
    o.get("control", c.control_value);
    o.get("tree_depth", c.tree_depth);
    o.choice("tree_scheme", c.tree_scheme, kTreeSchemes);
    o.finish();
  }
  if (top.has("mc")) {
    auto o = top.child("mc");
    o.get("paths", c.mc.paths);
    o.get("steps", c.mc.steps);
    o.get("seed", c.mc.seed, true);
    o.get("sample_times", c.mc.sample_times);
    o.get("sample_paths", c.mc.sample_paths);
    o.finish();
  }
  if (top.has("estimator")) {
    auto o = top.child("estimator");
    o.choice("kind", c.mc.solver.estimator, kEstimators);
    o.get("degree", c.mc.solver.degree);
    o.get("bins", c.mc.solver.bins);
    o.finish();
  }
  if (top.has("penalty")) {
    auto o = top.child("penalty");
    o.get("n", c.mc.solver.penalty);
    o.finish();
  }
  if (top.has("picard")) {
    auto o = top.child("picard");
    o.get("iterations", c.mc.solver.picard_iterations);
    o.get("tol", c.mc.solver.picard_tol);
    o.finish();
  }
  if (top.has("bootstrap")) {
    auto o = top.child("bootstrap");
    o.get("resamples", c.mc.solver.bootstrap_resamples);
    o.get("seed", c.mc.solver.bootstrap_seed, true);
    o.finish();
  }
  if (top.has("tolerances")) {
    auto o = top.child("tolerances");
    o.get("obstacle", c.mc.solver.tol_obstacle);
    o.get("skorokhod", c.mc.solver.tol_skorokhod);
    o.get("z", c.mc.tol_z);
    o.get("bias_budget", c.mc.bias_budget);
    o.get("pointwise", c.mc.tol_pointwise);
    o.get("membership", c.mc.probe.tol);
    o.get("member_rate", c.mc.member_rate);
    o.finish();
  }
  if (top.has("probe")) {
    auto o = top.child("probe");
    o.get("radii", c.mc.probe.radii);
    o.get("samples", c.mc.probe.samples);
    o.get("seed", c.mc.probe.seed, true);
    o.get("slope_budget", c.mc.probe.slope_budget);
    o.get("nonmember_floor", c.mc.probe.nonmember_floor);
    o.get("tail", c.mc.probe.tail);
    o.finish();
  }
  if (top.has("verify")) {
    auto o = top.child("verify");
    o.get("mode", c.verify_mode);
    one_of("verify.mode", c.verify_mode, {"classical", "viscosity", "feedback"});
    o.get("surface", c.surface);
    o.get("law", c.law);
    one_of("verify.law", c.law, {"extracted", "constant"});
    o.get("law_value", c.law_value);
    o.get("triple", c.triple);
    if (c.triple.size() != 3) throw ConfigError("E_CONFIG_TYPE", "'verify.triple' must be [q, p, P]");
    o.get("tables", c.tables);
    one_of("verify.tables", c.tables, {"surface", "constant"});
    o.get("battery_random", c.battery_random);
    o.get("battery_switches", c.battery_switches);
    o.get("battery_seed", c.battery_seed, true);
    o.get("d1d2_delta", c.d1d2_delta);
    o.finish();
  }
  if (top.has("assumptions")) {
    auto o = top.child("assumptions");
    o.get("time", c.probe_box.time);
    o.get("state", c.probe_box.state);
    if (o.has("control")) {
      Interval u;
      o.get("control", u);
      c.probe_box.control = u;
    }
    o.get("y", c.probe_box.y);
    o.get("z", c.probe_box.z);
    o.get("samples", c.probe_box.samples);
    o.get("lipschitz_cap", c.probe_box.lipschitz_cap);
    o.get("seed", c.probe_seed, true);
    o.finish();
  }
  if (top.has("output")) {
    auto o = top.child("output");
    o.get("dir", c.out_dir);
    o.finish();
  }
  top.get("workers", c.workers);
  top.finish();

  // Resolve catalog names early so misspellings surface as config errors.
  (void)make_model(c.model, c.model_params());
  if (c.surface != "computed") (void)candidate_surface(c.surface, SpaceTimeGrid{}, c.horizon);
  if (c.workers < 1) throw ConfigError("E_CONFIG_VALUE", "'workers' must be >= 1");
  c.mc.solver.workers = c.workers;
  c.hjb.workers = c.workers;
  return c;
}

std::string canonical_json(const RunConfig& c) {
  ojson j;
  j["command"] = c.command;
  j["model"] = {{"name", c.model}, {"horizon", c.horizon}, {"control_grid_points", c.control_grid_points}};
  const auto box = default_box(c.model);
  j["grid"] = {{"time_steps", c.time_steps},
               {"space_steps", c.space_steps},
               {"x_lo", c.x_lo.value_or(box.first)},
               {"x_hi", c.x_hi.value_or(box.second)}};
  j["hjb"] = {{"scheme", name_of(c.hjb.scheme, kSchemes)},
              {"boundary", name_of(c.hjb.boundary, kBoundaries)},
              {"substeps", c.hjb.substeps},
              {"cfl", c.hjb.cfl},
              {"policy_max_iterations", c.hjb.policy_max_iterations},
              {"policy_tol", c.hjb.policy_tol},
              {"penalty", c.hjb.penalty}};
  j["point"] = {{"t", c.t}, {"x", c.x}};
  j["cost"] = {{"method", c.cost_method},
               {"control", c.control_value},
               {"tree_depth", c.tree_depth},
               {"tree_scheme", name_of(c.tree_scheme, kTreeSchemes)}};
  j["mc"] = {{"paths", c.mc.paths},
             {"steps", c.mc.steps},
             {"seed", c.mc.seed},
             {"sample_times", c.mc.sample_times},
             {"sample_paths", c.mc.sample_paths}};
  j["estimator"] = {{"kind", name_of(c.mc.solver.estimator, kEstimators)},
                    {"degree", c.mc.solver.degree},
                    {"bins", c.mc.solver.bins}};
  j["penalty"] = {{"n", c.mc.solver.penalty}};
  j["picard"] = {{"iterations", c.mc.solver.picard_iterations}, {"tol", c.mc.solver.picard_tol}};
  j["bootstrap"] = {{"resamples", c.mc.solver.bootstrap_resamples}, {"seed", c.mc.solver.bootstrap_seed}};
  j["tolerances"] = {{"obstacle", c.mc.solver.tol_obstacle}, {"skorokhod", c.mc.solver.tol_skorokhod},
                     {"z", c.mc.tol_z},                      {"bias_budget", c.mc.bias_budget},
                     {"pointwise", c.mc.tol_pointwise},      {"membership", c.mc.probe.tol},
                     {"member_rate", c.mc.member_rate}};
  j["probe"] = {{"radii", c.mc.probe.radii},
                {"samples", c.mc.probe.samples},
                {"seed", c.mc.probe.seed},
                {"slope_budget", c.mc.probe.slope_budget},
                {"nonmember_floor", c.mc.probe.nonmember_floor},
                {"tail", c.mc.probe.tail}};
  j["verify"] = {{"mode", c.verify_mode},
                 {"surface", c.surface},
                 {"law", c.law},
                 {"law_value", c.law_value},
                 {"triple", c.triple},
                 {"tables", c.tables},
                 {"battery_random", c.battery_random},
                 {"battery_switches", c.battery_switches},
                 {"battery_seed", c.battery_seed},
                 {"d1d2_delta", c.d1d2_delta}};
  ojson a = {{"time", {c.probe_box.time.lo, c.probe_box.time.hi}},
             {"state", {c.probe_box.state.lo, c.probe_box.state.hi}},
             {"y", {c.probe_box.y.lo, c.probe_box.y.hi}},
             {"z", {c.probe_box.z.lo, c.probe_box.z.hi}},
             {"samples", c.probe_box.samples},
             {"lipschitz_cap", c.probe_box.lipschitz_cap},
             {"seed", c.probe_seed}};
  if (c.probe_box.control) a["control"] = {c.probe_box.control->lo, c.probe_box.control->hi};
  j["assumptions"] = a;
  j["output"] = {{"dir", c.out_dir}};
  j["workers"] = c.workers;
  return j.dump();
}

std::string fingerprint(const RunConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical_json(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rfbsde
