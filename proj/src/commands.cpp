#include "rfbsde/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "rfbsde/error.hpp"
#include "rfbsde/hjb.hpp"
#include "rfbsde/synthesis.hpp"
#include "rfbsde/verify.hpp"

namespace rfbsde {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Output directory plus the manifest that tracks what was written into it.
class Bundle {
 public:
  Bundle(const RunConfig& config, fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("E_OUTPUT_DIR", "cannot create output directory '" + dir_.string() + "': " + ec.message());
    manifest.command = config.command;
    manifest.fingerprint = fingerprint(config);
  }

  template <typename Writer>
  void write(const std::string& name, Writer&& writer) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("E_OUTPUT_WRITE", "cannot write '" + p.string() + "'");
    writer(f);
    if (!f) throw ConfigError("E_OUTPUT_WRITE", "failed while writing '" + p.string() + "'");
    manifest.artifacts.push_back(name);
  }

  void text(const std::string& name, const std::string& body) {
    write(name, [&](std::ostream& o) { o << body; });
  }

  void finish() {
    manifest.artifacts.push_back("manifest.json");
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << manifest.to_json() << "\n";
  }

  const fs::path& dir() const { return dir_; }
  RunManifest manifest;

 private:
  fs::path dir_;
};

std::optional<std::string> candidate_for(const std::string& model) {
  if (model == "example-classical") return "candidate-classical";
  if (model == "example-viscosity") return "candidate-viscosity";
  if (model == "zero") return "candidate-zero";
  return std::nullopt;
}

HjbConfig hjb_config(const RunConfig& c, const ControlModel& model) {
  HjbConfig h = c.hjb;
  if (h.kinks.empty()) h.kinks = declared_kinks(model.name);
  h.workers = c.workers;
  return h;
}

double max_obstacle_violation(const ValueSurface& w, const ControlModel& model) {
  const auto& g = w.grid();
  double v = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) v = std::max(v, w.at(i, j) - model.h(g.t(i), g.x(j)));
  return v;
}

std::string kink_columns(const ValueSurface& w) {
  std::string s;
  for (std::size_t j = 0; j < w.grid().cols(); ++j)
    if (w.is_kink_column(j)) s += (s.empty() ? "" : ";") + std::to_string(j);
  return s.empty() ? "-" : s;
}

SurfaceError compare_to_candidate(const ValueSurface& w, const std::string& candidate, double horizon) {
  const ValueSurface ref = candidate_surface(candidate, w.grid(), horizon);
  const double band = ref.kinks().empty() ? 0.0 : 3.0 * w.grid().dx();
  return compare_surfaces(w, ref, 3, band);
}

struct SolveOutput {
  ValueSurface surface;
  FeedbackLaw law;
};

SolveOutput solve_into(const RunConfig& c, const ControlModel& model, Bundle& bundle, std::ostream& out) {
  Stopwatch sw;
  ValueSurface w = solve_obstacle_hjb(model, c.space_time_grid(), hjb_config(c, model));
  bundle.manifest.timings_ms.emplace_back("hjb", sw.ms());
  Stopwatch sw_res;
  const ResidualField res = residual(w, model);
  bundle.manifest.timings_ms.emplace_back("residual", sw_res.ms());
  Stopwatch sw_law;
  FeedbackLaw law = extract_feedback(w, model, c.workers);
  bundle.manifest.timings_ms.emplace_back("extract_feedback", sw_law.ms());

  bundle.write("surface.csv", [&](std::ostream& o) { write_surface_csv(o, w); });
  bundle.write("residual.csv", [&](std::ostream& o) { write_residual_csv(o, res); });
  bundle.write("law.csv", [&](std::ostream& o) { write_law_csv(o, law); });

  const double r3 = res.max_abs(3);
  const double viol = max_obstacle_violation(w, model);
  out << "surface: model=" << model.name << " scheme=" << w.scheme << " substeps=" << w.substeps << "\n";
  out << "max |residual| (3-cell band excluded) = " << num(r3) << "\n";
  out << "max obstacle violation (W - h)+ = " << num(viol) << "\n";
  bundle.manifest.notes.emplace_back("max_residual_band3", num(r3, 17));
  bundle.manifest.notes.emplace_back("max_obstacle_violation", num(viol, 17));
  bundle.manifest.notes.emplace_back("kink_columns", kink_columns(w));
  if (auto cand = candidate_for(model.name)) {
    const auto e = compare_to_candidate(w, *cand, model.horizon);
    out << "max relative error vs " << *cand << " = " << num(e.max_relative) << " at (t, x) = (" << num(e.worst_t)
        << ", " << num(e.worst_x) << ")\n";
    bundle.manifest.notes.emplace_back("max_relative_error", num(e.max_relative, 17));
  }
  return {std::move(w), std::move(law)};
}

ValueSurface verify_surface(const RunConfig& c, const ControlModel& model, Bundle& bundle, std::ostream& out) {
  if (c.surface == "computed") return solve_into(c, model, bundle, out).surface;
  return candidate_surface(c.surface, c.space_time_grid(), model.horizon);
}

void write_report(Bundle& bundle, VerificationReport& report, const RunConfig& c, const std::string& stem,
                  std::ostream& out) {
  report.fingerprint.emplace_back("config", bundle.manifest.fingerprint);
  report.fingerprint.emplace_back("model", c.model);
  bundle.text(stem + ".json", report.to_json() + "\n");
  bundle.text(stem + ".txt", report.summary());
  out << report.summary();
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("E_CONFIG_IO", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

std::string RunManifest::to_json() const {
  ojson j;
  j["command"] = command;
  j["fingerprint"] = fingerprint;
  j["version"] = kLibraryVersion;
  j["artifacts"] = artifacts;
  ojson t = ojson::object();
  for (const auto& [k, v] : timings_ms) t[k] = v;
  j["timings_ms"] = t;
  ojson n = ojson::object();
  for (const auto& [k, v] : notes) n[k] = v;
  j["notes"] = n;
  return j.dump(2);
}

int cmd_solve(const RunConfig& c, std::ostream& out) {
  const ControlModel model = make_model(c.model, c.model_params());
  Bundle bundle(c, c.out_dir);
  solve_into(c, model, bundle, out);
  bundle.finish();
  return 0;
}

int cmd_cost(const RunConfig& c, std::ostream& out) {
  const ControlModel model = make_model(c.model, c.model_params());
  Bundle bundle(c, c.out_dir);
  Stopwatch sw;
  CostEstimate est;
  std::string control_label;
  if (c.cost_method == "tree") {
    if (c.control_value.size() != 1) throw ConfigError("E_CONFIG_VALUE", "'cost.control' must be scalar for the tree");
    const double v = c.control_value[0];
    est.value = tree_oracle(model, c.t, c.x, [v](double, double) { return v; }, c.tree_depth, c.tree_scheme);
    est.pathwise_mean = est.value;
    control_label = "constant(" + num(v) + ")";
  } else if (c.cost_method == "feedback") {
    const ValueSurface w = solve_obstacle_hjb(model, c.space_time_grid(), hjb_config(c, model));
    const FeedbackLaw law = extract_feedback(w, model, c.workers);
    est = evaluate_feedback(model, law, c.t, c.x, TimeGrid{c.t, model.horizon, c.mc.steps}, c.mc.paths, c.mc.seed,
                            c.mc.solver);
    control_label = "extracted-law";
  } else {
    const auto control = OpenLoopControl::constant(c.control_value);
    const double x0[1] = {c.x};
    est = cost_functional(model, c.t, x0, control, TimeGrid{c.t, model.horizon, c.mc.steps}, c.mc.paths, c.mc.seed,
                          c.mc.solver);
    control_label = control.label();
  }
  bundle.manifest.timings_ms.emplace_back("cost", sw.ms());

  out << "J = " << num(est.value, 8) << "  SE = " << num(est.standard_error, 4) << "  (method=" << c.cost_method
      << ", model=" << model.name << ", t=" << num(c.t) << ", x=" << num(c.x) << ")\n";

  const fs::path csv = bundle.dir() / "cost.csv";
  const bool fresh = !fs::exists(csv);
  std::ofstream f(csv, std::ios::app | std::ios::binary);
  if (!f) throw ConfigError("E_OUTPUT_WRITE", "cannot append to '" + csv.string() + "'");
  if (fresh) f << "model,method,t,x,control,value,standard_error,paths,steps,seed,tree_depth\n";
  f << model.name << ',' << c.cost_method << ',' << num(c.t, 17) << ',' << num(c.x, 17) << ',' << control_label << ','
    << num(est.value, 17) << ',' << num(est.standard_error, 17) << ',' << c.mc.paths << ',' << c.mc.steps << ','
    << c.mc.seed << ',' << c.tree_depth << "\n";
  bundle.manifest.artifacts.push_back("cost.csv");
  bundle.finish();
  return 0;
}

int cmd_verify(const RunConfig& c, std::ostream& out) {
  const ControlModel model = make_model(c.model, c.model_params());
  Bundle bundle(c, c.out_dir);
  const ValueSurface w = verify_surface(c, model, bundle, out);
  Stopwatch sw;
  VerificationReport report;
  if (c.verify_mode == "viscosity") {
    const auto control = OpenLoopControl::constant(c.law_value);
    const double q = c.triple[0], p = c.triple[1], P = c.triple[2];
    const TripleFn triple = [=](double s, double x) { return SuperdiffCandidate{s, x, q, p, P}; };
    const auto battery = make_battery(model, c.t, c.battery_random, c.battery_switches, c.battery_seed);
    report = verify_viscosity_conditions(model, w, c.t, c.x, control, triple, c.mc, battery);
  } else {
    const FeedbackLaw law = c.law == "constant" ? FeedbackLaw::constant(w.grid(), model.controls, c.law_value)
                                                : extract_feedback(w, model, c.workers);
    bundle.write("law.csv", [&](std::ostream& o) { write_law_csv(o, law); });
    if (c.verify_mode == "feedback") {
      const TripleTables tables = c.tables == "constant"
                                      ? TripleTables::constant(w.grid(), c.triple[0], c.triple[1], c.triple[2])
                                      : TripleTables::from_surface(w);
      report = verify_feedback_optimality(model, w, law, tables, c.t, c.x, c.mc);
    } else {
      const auto battery = make_battery(model, c.t, c.battery_random, c.battery_switches, c.battery_seed);
      report = verify_classical(model, w, c.t, c.x, law, battery, c.mc);
    }
  }
  bundle.manifest.timings_ms.emplace_back("verify", sw.ms());
  write_report(bundle, report, c, "report", out);
  bundle.finish();
  return report.exit_code();
}

std::vector<std::string> paper_ids() { return {"5.1", "5.2"}; }

namespace {

struct SummaryRow {
  std::string item;
  double value = 0.0;
  std::string reference;
  bool pass = false;
};

int finish_paper(Bundle& bundle, const std::vector<SummaryRow>& rows, std::ostream& out) {
  bool all = true;
  std::ostringstream csv, txt;
  csv << "item,value,reference,verdict\n";
  for (const auto& r : rows) {
    all = all && r.pass;
    csv << '"' << r.item << "\"," << num(r.value, 10) << ",\"" << r.reference << "\"," << (r.pass ? "pass" : "fail")
        << "\n";
    txt << (r.pass ? "PASS  " : "FAIL  ") << r.item << ": " << num(r.value, 8) << "  (" << r.reference << ")\n";
  }
  bundle.text("summary.csv", csv.str());
  bundle.text("summary.txt", txt.str());
  bundle.finish();
  out << txt.str() << (all ? "all checks passed\n" : "some checks failed\n");
  return all ? 0 : 1;
}

int paper_classical(const RunConfig& c, std::ostream& out) {
  const ControlModel model = make_model(c.model, c.model_params());
  Bundle bundle(c, c.out_dir);
  std::vector<SummaryRow> rows;
  const double T = model.horizon;

  const auto solved = solve_into(c, model, bundle, out);
  const auto err = compare_to_candidate(solved.surface, "candidate-classical", T);
  rows.push_back({"HJB max relative error vs x e^{2T-2t}", err.max_relative, "<= 1e-2", err.max_relative <= 1e-2});

  std::size_t nonzero = 0;
  for (double u : solved.law.table()) nonzero += u != 0.0;
  rows.push_back({"extracted law nodes different from 0", static_cast<double>(nonzero), "== 0", nonzero == 0});

  const double target = std::exp(2.0 * T);
  const double x0[1] = {1.0};
  const TimeGrid tg{0.0, T, c.mc.steps};
  const auto est =
      cost_functional(model, 0.0, x0, OpenLoopControl::constant({0.0}), tg, c.mc.paths, c.mc.seed, c.mc.solver);
  rows.push_back({"J(0,1;u=0) Monte Carlo minus e^{2T}", est.value - target,
                  "|.| <= 3 SE + " + num(c.mc.bias_budget) + ", SE=" + num(est.standard_error, 3),
                  std::fabs(est.value - target) <= 3.0 * est.standard_error + c.mc.bias_budget});
  const double tree = tree_oracle(model, 0.0, 1.0, [](double, double) { return 0.0; }, 16);
  rows.push_back({"J(0,1;u=0) tree depth 16 relative to e^{2T}", tree / target - 1.0, "|.| <= 2e-2",
                  std::fabs(tree / target - 1.0) <= 2e-2});

  const ValueSurface cand = candidate_surface("candidate-classical", c.space_time_grid(), T);
  const auto battery = make_battery(model, 0.0, c.battery_random, c.battery_switches, c.battery_seed);
  VerificationReport report = verify_classical(model, cand, 0.0, 1.0, solved.law, battery, c.mc);
  write_report(bundle, report, c, "verify_classical", out);
  for (const auto& cond : report.conditions)
    rows.push_back({"classical " + cond.name + " slack", cond.slack, "<= " + num(cond.tolerance),
                    cond.verdict == Verdict::pass});

  const auto d = check_D1_D2(cand, c.d1d2_delta);
  rows.push_back({"D1 constant C1", d.c1, "finite", d.d1_pass});
  rows.push_back({"D2 constant C2", d.c2, "finite, semiconcave", d.d2_pass});
  return finish_paper(bundle, rows, out);
}

int paper_viscosity(const RunConfig& c, std::ostream& out) {
  const ControlModel model = make_model(c.model, c.model_params());
  Bundle bundle(c, c.out_dir);
  std::vector<SummaryRow> rows;
  const double T = model.horizon;

  const auto solved = solve_into(c, model, bundle, out);
  const auto err = compare_to_candidate(solved.surface, "candidate-viscosity", T);
  rows.push_back(
      {"HJB max relative error outside 3dx band at x=0", err.max_relative, "<= 2e-2", err.max_relative <= 2e-2});

  const ValueSurface cand = candidate_surface("candidate-viscosity", c.space_time_grid(), T);
  const TripleFn triple = [](double s, double x) { return SuperdiffCandidate{s, x, 0.0, 1.0, 0.0}; };
  VerificationReport report =
      verify_viscosity_conditions(model, cand, 0.0, 0.0, OpenLoopControl::constant({1.0}), triple, c.mc);
  write_report(bundle, report, c, "verify_viscosity", out);
  for (const auto& cond : report.conditions)
    rows.push_back({"viscosity " + cond.name + " slack", cond.slack, "== 0",
                    cond.verdict == Verdict::pass && cond.slack == 0.0});

  const SuperdiffCandidate bad_P{0.0, 0.0, 0.0, 1.0, -1.0};
  const SuperdiffCandidate bad_p{0.0, 0.0, 0.0, std::exp(3.0 * T) + 0.5, 0.0};
  for (const auto& [label, cnd] : {std::pair{"triple (0,1,-1)", bad_P}, std::pair{"triple (0,e^{3T}+0.5,0)", bad_p}}) {
    const auto m = check_superdiff_membership(cand, cnd, c.mc.probe);
    rows.push_back({std::string(label) + " membership margin", m.margin, "non-member",
                    m.verdict == Membership::non_member});
  }
  const auto member = check_superdiff_membership(cand, {0.0, 0.0, 0.0, 1.0, 0.0}, c.mc.probe);
  rows.push_back({"triple (0,1,0) membership margin", member.margin, "member", member.verdict == Membership::member});

  const auto d = check_D1_D2(cand, c.d1d2_delta);
  rows.push_back({"D1 constant C1", d.c1, "finite", d.d1_pass});
  rows.push_back({"kink second difference", d.kink_second_difference, "<= 2 C2 (semiconcave)", d.d2_pass});

  const auto reg = check_law_regularity(solved.law);
  out << "extracted law: lipschitz=" << num(reg.lipschitz) << " max_jump=" << num(reg.max_jump)
      << " member=" << (reg.member ? "yes" : "no") << (reg.note.empty() ? "" : " (" + reg.note + ")") << "\n";
  bundle.manifest.notes.emplace_back("law_in_class_L", reg.member ? "yes" : "no");
  return finish_paper(bundle, rows, out);
}

}  // namespace

int cmd_paper(const RunConfig& config, const std::string& id, std::ostream& out) {
  std::string model;
  if (id == "5.1") model = "example-classical";
  else if (id == "5.2") model = "example-viscosity";
  else {
    std::string ids;
    for (const auto& s : paper_ids()) ids += (ids.empty() ? "" : ", ") + s;
    throw ConfigError("E_PAPER_ID", "unknown example id '" + id + "'; valid ids: " + ids);
  }
  RunConfig c = config;
  if (c.model != model) {
    c.model = model;
    c.x_lo.reset();
    c.x_hi.reset();
  }
  c.out_dir = (fs::path(config.out_dir) / ("example-" + id)).string();
  return id == "5.1" ? paper_classical(c, out) : paper_viscosity(c, out);
}

int cmd_assumptions(const RunConfig& c, std::ostream& out) {
  const ControlModel model = make_model(c.model, c.model_params());
  Bundle bundle(c, c.out_dir);
  Stopwatch sw;
  const AssumptionReport report = validate_assumptions(model, c.probe_box, c.probe_seed);
  bundle.manifest.timings_ms.emplace_back("assumptions", sw.ms());
  ojson entries = ojson::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"name", e.name},
                       {"clause", e.clause},
                       {"status", to_string(e.status)},
                       {"measured", e.measured},
                       {"worst_point", e.worst_point},
                       {"note", e.note}});
    out << e.name << "  " << e.clause << "  " << to_string(e.status) << "  measured=" << num(e.measured)
        << (e.note.empty() ? "" : "  " + e.note) << "\n";
  }
  ojson j = {{"model", model.name}, {"all_measured_pass", report.all_measured_pass()}, {"entries", entries}};
  bundle.text("assumptions.json", j.dump(2) + "\n");
  bundle.finish();
  return 0;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reflected FBSDE optimal control toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kLibraryVersion);

  std::string config_path, out_dir, paper_id;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> tol_obstacle, tol_skorokhod, tol_z, tol_bias, tol_pointwise, tol_membership, tol_rate;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON configuration file");
    s->add_option("--out", out_dir, "output directory");
    s->add_option("--seed", seed, "Monte Carlo seed");
    s->add_option("--workers", workers, "worker threads");
    s->add_option("--tol.obstacle", tol_obstacle);
    s->add_option("--tol.skorokhod", tol_skorokhod);
    s->add_option("--tol.z", tol_z);
    s->add_option("--tol.bias", tol_bias);
    s->add_option("--tol.pointwise", tol_pointwise);
    s->add_option("--tol.membership", tol_membership);
    s->add_option("--tol.member-rate", tol_rate);
    return s;
  };
  common(app.add_subcommand("solve", "solve the obstacle HJB and extract the feedback law"));
  common(app.add_subcommand("cost", "estimate J(t, x; u)"));
  common(app.add_subcommand("verify", "run a verification theorem check"));
  common(app.add_subcommand("paper", "reproduce an example bundle"))->add_option("id", paper_id)->required();
  common(app.add_subcommand("assumptions", "measure assumption constants on a probe box"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << kLibraryVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: E_CLI_USAGE: " << msg << "\n";
    return 2;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    RunConfig c = parse_config(config_path.empty() ? "{}" : read_file(config_path));
    c.command = command;
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (seed) c.mc.seed = *seed;
    if (workers) {
      if (*workers < 1) throw ConfigError("E_CONFIG_VALUE", "'--workers' must be >= 1");
      c.workers = c.hjb.workers = c.mc.solver.workers = *workers;
    }
    if (tol_obstacle) c.mc.solver.tol_obstacle = *tol_obstacle;
    if (tol_skorokhod) c.mc.solver.tol_skorokhod = *tol_skorokhod;
    if (tol_z) c.mc.tol_z = *tol_z;
    if (tol_bias) c.mc.bias_budget = *tol_bias;
    if (tol_pointwise) c.mc.tol_pointwise = *tol_pointwise;
    if (tol_membership) c.mc.probe.tol = *tol_membership;
    if (tol_rate) c.mc.member_rate = *tol_rate;

    if (command == "solve") return cmd_solve(c, out);
    if (command == "cost") return cmd_cost(c, out);
    if (command == "verify") return cmd_verify(c, out);
    if (command == "paper") return cmd_paper(c, paper_id, out);
    return cmd_assumptions(c, out);
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: E_INTERNAL: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace rfbsde
