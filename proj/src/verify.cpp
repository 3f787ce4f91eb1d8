#include "rfbsde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/random.hpp"

namespace rfbsde {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

void VerificationReport::add(ConditionRecord c) {
  conditions.push_back(std::move(c));
  bool any_fail = false, any_open = false;
  for (const auto& r : conditions) {
    any_fail = any_fail || r.verdict == Verdict::fail;
    any_open = any_open || r.verdict == Verdict::inconclusive;
  }
  aggregate = any_fail ? Verdict::fail : (any_open ? Verdict::inconclusive : Verdict::pass);
}

const ConditionRecord* VerificationReport::find(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return &c;
  return nullptr;
}

std::string VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["theorem"] = theorem;
  j["aggregate"] = to_string(aggregate);
  auto& conds = j["conditions"] = nlohmann::ordered_json::array();
  for (const auto& c : conditions) {
    nlohmann::ordered_json r;
    r["name"] = c.name;
    r["slack"] = c.slack;
    r["tolerance"] = c.tolerance;
    r["verdict"] = to_string(c.verdict);
    r["note"] = c.note;
    conds.push_back(r);
  }
  auto& fp = j["fingerprint"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : fingerprint) fp[k] = v;
  return j.dump(2) + "\n";
}

std::string VerificationReport::summary() const {
  std::ostringstream out;
  out << theorem << "\n";
  for (const auto& c : conditions) {
    std::string tag = to_string(c.verdict);
    std::transform(tag.begin(), tag.end(), tag.begin(), ::toupper);
    out << "  [" << tag << "] " << c.name << ": slack=" << fmt_double(c.slack) << " tol=" << fmt_double(c.tolerance);
    if (!c.note.empty()) out << " (" << c.note << ")";
    out << "\n";
  }
  out << "aggregate: " << to_string(aggregate) << "\n";
  return out.str();
}

namespace {

Verdict leq(double slack, double tol) {
  if (!std::isfinite(slack)) return Verdict::fail;
  return slack <= tol ? Verdict::pass : Verdict::fail;
}

void add_fingerprint(VerificationReport& rep, const McConfig& mc, double t, double x) {
  rep.fingerprint = {{"t", fmt_double(t)},
                     {"x", fmt_double(x)},
                     {"paths", std::to_string(mc.paths)},
                     {"steps", std::to_string(mc.steps)},
                     {"seed", std::to_string(mc.seed)},
                     {"bias_budget", fmt_double(mc.bias_budget)},
                     {"tol_z", fmt_double(mc.tol_z)},
                     {"tol_pointwise", fmt_double(mc.tol_pointwise)},
                     {"member_rate", fmt_double(mc.member_rate)},
                     {"probe_tol", fmt_double(mc.probe.tol)},
                     {"probe_seed", std::to_string(mc.probe.seed)}};
}

TimeGrid mc_grid(const ControlModel& model, double t, const McConfig& mc) {
  TimeGrid g{t, model.horizon, mc.steps};
  g.check();
  return g;
}

struct SampleMean {
  double mean = 0.0;
  double se = 0.0;
};

SampleMean mean_and_se(const std::vector<double>& v) {
  SampleMean s;
  if (v.empty()) return s;
  for (double a : v) s.mean += a;
  s.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return s;
  double var = 0.0;
  for (double a : v) var += (a - s.mean) * (a - s.mean);
  var /= static_cast<double>(v.size() - 1);
  s.se = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

// Stratified node indices in [0, N) and evenly spaced path indices.
std::vector<std::size_t> sample_nodes(std::size_t N, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = std::min(N - 1, (2 * k + 1) * N / (2 * count));
    if (out.empty() || out.back() != i) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> sample_paths(std::size_t M, std::size_t count) {
  std::vector<std::size_t> out;
  count = std::min(count, M);
  for (std::size_t k = 0; k < count; ++k) out.push_back(k * M / count);
  return out;
}

struct MembershipTally {
  std::size_t member = 0, non_member = 0, inconclusive = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::string first_failure;

  void add(const MembershipResult& r, double t, double x) {
    worst_margin = std::max(worst_margin, r.margin);
    if (r.verdict == Membership::member) {
      ++member;
    } else {
      if (r.verdict == Membership::non_member) ++non_member;
      else ++inconclusive;
      if (first_failure.empty())
        first_failure = to_string(r.verdict) + " at (" + fmt_double(t) + ", " + fmt_double(x) + ")";
    }
  }
  std::size_t total() const { return member + non_member + inconclusive; }

  ConditionRecord record(const std::string& name, double member_rate) const {
    ConditionRecord c;
    c.name = name;
    const double rate = total() ? static_cast<double>(member) / static_cast<double>(total()) : 0.0;
    c.slack = 1.0 - rate;
    c.tolerance = 1.0 - member_rate;
    if (non_member > 0) c.verdict = Verdict::fail;
    else if (total() == 0 || rate < member_rate) c.verdict = Verdict::inconclusive;
    else c.verdict = Verdict::pass;
    std::ostringstream note;
    note << member << " member, " << non_member << " non-member, " << inconclusive
         << " inconclusive; worst margin " << fmt_double(worst_margin);
    if (!first_failure.empty()) note << "; first: " << first_failure;
    c.note = note.str();
    return c;
  }
};

using NodeFilter = std::function<bool(double, double)>;

std::string excluded_note(std::size_t skipped, std::size_t total) {
  if (skipped == 0) return "";
  return "; " + std::to_string(skipped) + " of " + std::to_string(total) + " path nodes outside the table box skipped";
}

// Relative mean-square mismatch of p sigma against Z over all nodes and paths.
ConditionRecord z_matching(const ControlModel& model, const PathEnsemble& e, const RbsdeSolution& sol,
                           const std::function<double(double, double)>& p_of, double tol_z,
                           const NodeFilter& inside = {}) {
  double diff = 0.0, zz = 0.0, ps = 0.0;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < e.steps(); ++i) {
    const double r = e.grid.node(i);
    for (std::size_t m = 0; m < e.paths; ++m) {
      const double x = e.state(m, i);
      if (inside && !inside(r, x)) {
        ++skipped;
        continue;
      }
      const double psig = p_of(r, x) * model.sigma(r, x, e.control(m, i)[0]);
      const double z = sol.z(m, i);
      diff += (psig - z) * (psig - z);
      zz += z * z;
      ps += psig * psig;
    }
  }
  const double scale = std::max(zz, ps);
  ConditionRecord c;
  c.name = "(ii) p sigma = Z";
  c.slack = scale > 0.0 ? diff / scale : 0.0;
  c.tolerance = tol_z;
  c.verdict = leq(c.slack, tol_z);
  c.note = "relative mean-square mismatch" + excluded_note(skipped, e.steps() * e.paths);
  return c;
}

// E int [q + H(s, X, Y, p, P, u)] ds - 3 SE <= tol.
ConditionRecord integral_condition(const ControlModel& model, const PathEnsemble& e, const RbsdeSolution& sol,
                                   const std::function<SuperdiffCandidate(double, double)>& triple,
                                   const std::string& name, double tol, const NodeFilter& inside = {}) {
  const double dt = e.grid.dt();
  std::vector<double> per_path(e.paths, 0.0);
  std::size_t skipped = 0;
  for (std::size_t m = 0; m < e.paths; ++m) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.steps(); ++i) {
      const double r = e.grid.node(i);
      const double x = e.state(m, i);
      if (inside && !inside(r, x)) {
        ++skipped;
        continue;
      }
      const auto c = triple(r, x);
      s += (c.q + hamiltonian(model, r, x, sol.y(m, i), c.p, c.P, e.control(m, i)[0])) * dt;
    }
    per_path[m] = s;
  }
  const auto ms = mean_and_se(per_path);
  ConditionRecord c;
  c.name = name;
  c.slack = ms.mean - 3.0 * ms.se;
  c.tolerance = tol;
  c.verdict = leq(c.slack, tol);
  c.note = "mean " + fmt_double(ms.mean) + ", SE " + fmt_double(ms.se) + excluded_note(skipped, e.steps() * e.paths);
  return c;
}

ConditionRecord battery_condition(const ControlModel& model, double w, double t, double x,
                                  const std::vector<OpenLoopControl>& battery, const McConfig& mc,
                                  const std::string& name) {
  const std::vector<double> x0{x};
  const auto grid = mc_grid(model, t, mc);
  double worst = -std::numeric_limits<double>::infinity();
  std::string worst_label;
  for (const auto& u : battery) {
    const auto est = cost_functional(model, t, x0, u, grid, mc.paths, mc.seed, mc.solver);
    const double slack = w - est.value - 3.0 * est.standard_error;
    if (slack > worst) {
      worst = slack;
      worst_label = u.label() + " (J=" + fmt_double(est.value) + ", SE=" + fmt_double(est.standard_error) + ")";
    }
  }
  ConditionRecord c;
  c.name = name;
  c.slack = battery.empty() ? 0.0 : worst;
  c.tolerance = mc.bias_budget;
  c.verdict = leq(c.slack, c.tolerance);
  c.note = battery.empty() ? "empty battery" : "worst control " + worst_label;
  return c;
}

}  // namespace

std::vector<OpenLoopControl> make_battery(const ControlModel& model, double t, std::size_t random_count, int switches,
                                          std::uint64_t seed) {
  std::vector<OpenLoopControl> out;
  const std::size_t K = model.controls.grid_size();
  const auto m = static_cast<std::size_t>(model.control_dim());
  for (std::size_t k = 0; k < K; ++k) {
    const auto u = model.controls.grid_point(k);
    std::vector<double> v(u.begin(), u.end());
    std::string label = "constant(";
    for (std::size_t a = 0; a < m; ++a) label += (a ? "," : "") + fmt_double(v[a]);
    out.push_back(OpenLoopControl::of_time(
        static_cast<int>(m), [v](double, std::span<double> o) { std::copy(v.begin(), v.end(), o.begin()); },
        label + ")"));
  }
  const double T = model.horizon;
  for (std::size_t r = 0; r < random_count; ++r) {
    std::uint64_t counter = 0;
    std::vector<double> times;
    for (int s = 0; s < switches; ++s) times.push_back(t + (T - t) * counter_uniform(seed, r, counter++));
    std::sort(times.begin(), times.end());
    std::vector<std::vector<double>> values;
    for (int s = 0; s <= switches; ++s) {
      const auto k = std::min<std::size_t>(K - 1, static_cast<std::size_t>(counter_uniform(seed, r, counter++) *
                                                                          static_cast<double>(K)));
      const auto u = model.controls.grid_point(k);
      values.emplace_back(u.begin(), u.end());
    }
    auto fn = [times, values](double tt, std::span<double> o) {
      const auto k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), tt) - times.begin());
      std::copy(values[k].begin(), values[k].end(), o.begin());
    };
    out.push_back(OpenLoopControl::of_time(static_cast<int>(m), fn, "random-" + std::to_string(r)));
  }
  return out;
}

VerificationReport verify_classical(const ControlModel& model, const ValueSurface& surface, double t, double x,
                                    const FeedbackLaw& law, const std::vector<OpenLoopControl>& battery,
                                    const McConfig& mc) {
  if (!surface.kinks().empty())
    throw ConfigError("E_VERIFY_KINKS",
                      "surface declares kink columns; use the viscosity verification (verify_viscosity_conditions)");
  VerificationReport rep;
  rep.theorem = "classical verification";
  add_fingerprint(rep, mc, t, x);
  const double w = surface.value_at(t, x);

  rep.add(battery_condition(model, w, t, x, battery, mc, "A: W <= J(u) over battery"));

  const auto grid = mc_grid(model, t, mc);
  const auto est = evaluate_feedback(model, law, t, x, grid, mc.paths, mc.seed, mc.solver, true);
  ConditionRecord b;
  b.name = "B: W = J(law)";
  b.slack = std::fabs(w - est.value) - 3.0 * est.standard_error;
  b.tolerance = mc.bias_budget;
  b.verdict = leq(b.slack, b.tolerance);
  b.note = "W=" + fmt_double(w) + ", J=" + fmt_double(est.value) + ", SE=" + fmt_double(est.standard_error);
  rep.add(b);

  const auto reg = check_law_regularity(law);
  ConditionRecord c;
  c.name = "C: law in class L";
  c.slack = reg.max_jump - reg.jump_threshold;
  c.tolerance = 0.0;
  c.verdict = reg.member ? Verdict::pass : Verdict::fail;
  c.note = "Lipschitz " + fmt_double(reg.lipschitz) + (reg.note.empty() ? "" : "; " + reg.note);
  rep.add(c);
  return rep;
}

VerificationReport verify_viscosity_conditions(const ControlModel& model, const ValueSurface& surface, double t,
                                               double x, const OpenLoopControl& control, const TripleFn& triple,
                                               const McConfig& mc, const std::vector<OpenLoopControl>& battery) {
  if (!model.scalar()) throw ConfigError("E_VERIFY_DIMS", "verification handles scalar models only");
  VerificationReport rep;
  rep.theorem = "viscosity verification";
  add_fingerprint(rep, mc, t, x);

  const std::vector<double> x0{x};
  const auto grid = mc_grid(model, t, mc);
  const auto ens = simulate_paths(model, t, x0, control, grid, mc.paths, mc.seed, mc.solver.workers);
  const auto sol = solve_reflected(model, ens, mc.solver);

  MembershipTally tally;
  std::map<std::pair<double, double>, MembershipResult> cache;
  for (std::size_t i : sample_nodes(ens.steps(), mc.sample_times)) {
    const double r = grid.node(i);
    for (std::size_t m : sample_paths(ens.paths, mc.sample_paths)) {
      const double xs = ens.state(m, i);
      auto it = cache.find({r, xs});
      if (it == cache.end()) {
        auto cand = triple(r, xs);
        cand.t = r, cand.x = xs;
        it = cache.emplace(std::make_pair(r, xs), check_superdiff_membership(surface, cand, mc.probe)).first;
      }
      tally.add(it->second, r, xs);
    }
  }
  rep.add(tally.record("(i) triple in right superdifferential", mc.member_rate));
  rep.add(z_matching(model, ens, sol, [&](double r, double xs) { return triple(r, xs).p; }, mc.tol_z));
  rep.add(integral_condition(model, ens, sol, triple, "(iii) E int [q + H] ds <= 0", mc.bias_budget));

  if (!battery.empty()) {
    const double w = surface.value_at(t, x);
    auto c = battery_condition(model, w, t, x, battery, mc, "W = V: W <= J(u) over battery");
    const double gap = std::fabs(w - sol.value());
    const auto se = bootstrap_standard_error(sol.pathwise, mc.solver.bootstrap_resamples, mc.solver.bootstrap_seed);
    c.slack = std::max(c.slack, gap - 3.0 * se);
    c.verdict = leq(c.slack, c.tolerance);
    c.note += "; |W - J(control)| = " + fmt_double(gap);
    rep.add(c);
  }
  return rep;
}

TripleTables TripleTables::constant(const SpaceTimeGrid& grid, double q, double p, double P) {
  const std::size_t n = grid.rows() * grid.cols();
  return TripleTables{grid, std::vector<double>(n, q), std::vector<double>(n, p), std::vector<double>(n, P)};
}

TripleTables TripleTables::from_surface(const ValueSurface& surface) {
  const auto& g = surface.grid();
  const std::size_t n = g.rows() * g.cols();
  TripleTables tt{g, std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const auto k = g.index(i, j);
      if (surface.is_kink_column(j) && j > 0 && j < g.space_steps) {
        const auto [left, right] = surface.one_sided_slopes(i, j);
        tt.q[k] = surface.wt(i, j);
        tt.p[k] = 0.5 * (left + right);
        tt.P[k] = 0.0;
      } else {
        const auto d = surface.derivatives(i, j);
        tt.q[k] = d.wt, tt.p[k] = d.wx, tt.P[k] = d.wxx;
      }
    }
  return tt;
}

SuperdiffCandidate TripleTables::at(std::size_t i, std::size_t j) const {
  const auto k = grid.index(i, j);
  return {grid.t(i), grid.x(j), q[k], p[k], P[k]};
}

SuperdiffCandidate TripleTables::interpolate(double t, double x) const {
  const double ft = std::clamp((t - grid.t0) / grid.dt(), 0.0, static_cast<double>(grid.time_steps));
  const double fx = std::clamp((x - grid.x_lo) / grid.dx(), 0.0, static_cast<double>(grid.space_steps));
  const auto i = std::min(static_cast<std::size_t>(ft), grid.time_steps - 1);
  const auto j = std::min(static_cast<std::size_t>(fx), grid.space_steps - 1);
  const double a = ft - static_cast<double>(i), b = fx - static_cast<double>(j);
  auto mix = [&](const std::vector<double>& v) {
    return (1 - a) * ((1 - b) * v[grid.index(i, j)] + b * v[grid.index(i, j + 1)]) +
           a * ((1 - b) * v[grid.index(i + 1, j)] + b * v[grid.index(i + 1, j + 1)]);
  };
  return {t, x, mix(q), mix(p), mix(P)};
}

SuperdiffCandidate TripleTables::nearest(double t, double x) const {
  auto c = at(grid.nearest_time(t), grid.nearest_space(x));
  c.t = t, c.x = x;
  return c;
}

VerificationReport verify_feedback_optimality(const ControlModel& model, const ValueSurface& surface,
                                              const FeedbackLaw& law, const TripleTables& tables, double t, double x,
                                              const McConfig& mc) {
  if (!model.scalar()) throw ConfigError("E_VERIFY_DIMS", "verification handles scalar models only");
  if (!(tables.grid == surface.grid()))
    throw ConfigError("E_VERIFY_TABLES", "triple tables are not aligned with the surface grid");
  const std::size_t n = surface.grid().rows() * surface.grid().cols();
  if (tables.q.size() != n || tables.p.size() != n || tables.P.size() != n)
    throw ConfigError("E_VERIFY_TABLES", "triple tables do not match the grid shape");

  VerificationReport rep;
  rep.theorem = "feedback optimality";
  add_fingerprint(rep, mc, t, x);

  const std::vector<double> x0{x};
  const auto grid = mc_grid(model, t, mc);
  const auto ens = simulate_closed_loop(model, law, t, x0, grid, mc.paths, mc.seed, mc.solver.workers);
  const auto sol = solve_reflected(model, ens, mc.solver);

  // Surface nodes visited by the closed loop.
  const auto& g = surface.grid();
  std::vector<std::pair<std::size_t, std::size_t>> nodes;
  for (std::size_t i : sample_nodes(ens.steps(), mc.sample_times))
    for (std::size_t m : sample_paths(ens.paths, mc.sample_paths))
      nodes.emplace_back(std::min(g.nearest_time(grid.node(i)), g.time_steps - 1), g.nearest_space(ens.state(m, i)));
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  MembershipTally tally;
  double worst_pointwise = -std::numeric_limits<double>::infinity();
  std::string worst_at;
  for (const auto& [i, j] : nodes) {
    const auto cand = tables.at(i, j);
    tally.add(check_superdiff_membership(surface, cand, mc.probe), cand.t, cand.x);
    const double w = surface.at(i, j);
    const double lhs = cand.q + inf_hamiltonian(model, cand.t, cand.x, w, cand.p, cand.P).value;
    const double gap = (w - model.h(cand.t, cand.x)) - lhs;
    if (gap > worst_pointwise) {
      worst_pointwise = gap;
      worst_at = "(" + fmt_double(cand.t) + ", " + fmt_double(cand.x) + ")";
    }
  }
  rep.add(tally.record("tables in right superdifferential", mc.member_rate));
  ConditionRecord pw;
  pw.name = "inf [q + H] >= W - h";
  pw.slack = nodes.empty() ? 0.0 : worst_pointwise;
  pw.tolerance = mc.tol_pointwise;
  pw.verdict = leq(pw.slack, pw.tolerance);
  pw.note = std::to_string(nodes.size()) + " nodes; worst at " + worst_at;
  rep.add(pw);

  auto triple = [&](double r, double xs) { return tables.interpolate(r, xs); };
  const NodeFilter inside = [&](double, double xs) { return xs >= g.x_lo && xs <= g.x_hi; };
  rep.add(integral_condition(model, ens, sol, triple, "(i) E int [q + H(law)] ds <= 0", mc.bias_budget, inside));
  rep.add(z_matching(model, ens, sol, [&](double r, double xs) { return tables.interpolate(r, xs).p; }, mc.tol_z,
                     inside));
  return rep;
}

VerificationReport check_viscosity_inequalities(const ValueSurface& surface, const ControlModel& model,
                                                const std::vector<InequalitySample>& samples, double tol,
                                                const MembershipProbe& probe) {
  VerificationReport rep;
  rep.theorem = "viscosity inequalities";
  rep.fingerprint = {{"tol", fmt_double(tol)}, {"probe_tol", fmt_double(probe.tol)}};
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    auto pr = probe;
    pr.kind = s.kind;
    const auto mem = check_superdiff_membership(surface, s.triple, pr);
    const std::string where = "(" + fmt_double(s.triple.t) + ", " + fmt_double(s.triple.x) + ")";
    if (mem.verdict != Membership::member)
      throw ConfigError("E_VERIFY_UNVALIDATED", "sample " + std::to_string(k) + " at " + where + " is " +
                                                    to_string(mem.verdict) + " of the " +
                                                    (s.kind == DiffKind::super ? "super" : "sub") + "differential");
    const double w = surface.value_at(s.triple.t, s.triple.x);
    const double inf = inf_hamiltonian(model, s.triple.t, s.triple.x, w, s.triple.p, s.triple.P).value;
    const double val = std::max(w - model.h(s.triple.t, s.triple.x), -s.triple.q - inf);
    ConditionRecord c;
    c.name = std::string(s.kind == DiffKind::super ? "super" : "sub") + " sample " + std::to_string(k) + " " + where;
    c.slack = s.kind == DiffKind::super ? val : -val;
    c.tolerance = tol;
    c.verdict = leq(c.slack, tol);
    c.note = "max expression " + fmt_double(val);
    rep.add(c);
  }
  return rep;
}

D1D2Report check_D1_D2(const ValueSurface& surface, double delta) {
  const auto& g = surface.grid();
  if (!(delta > 0.0) || !(delta < g.t1 - g.t0))
    throw ConfigError("E_D1D2_DELTA", "delta must lie in (0, T)");
  D1D2Report rep;
  rep.delta = delta;
  rep.kink_second_difference = std::numeric_limits<double>::quiet_NaN();
  const double limit = g.t1 - delta + 1e-12 * (g.t1 - g.t0);
  const double dt = g.dt(), dx2 = g.dx() * g.dx();
  rep.max_second_difference = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.rows() && g.t(i) <= limit; ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (i + 1 < g.rows() && g.t(i + 1) <= limit) {
        const double q = std::fabs(surface.at(i + 1, j) - surface.at(i, j)) / ((1.0 + std::fabs(g.x(j))) * dt);
        rep.c1 = std::max(rep.c1, q);
      }
      if (j == 0 || j == g.space_steps) continue;
      const double sd = (surface.at(i, j + 1) - 2.0 * surface.at(i, j) + surface.at(i, j - 1)) / dx2;
      if (surface.is_kink_column(j)) {
        rep.has_kink = true;
        rep.kink_second_difference =
            std::isnan(rep.kink_second_difference) ? sd : std::max(rep.kink_second_difference, sd);
      } else {
        rep.max_second_difference = std::max(rep.max_second_difference, sd);
      }
    }
  }
  rep.c2 = std::max(0.0, rep.max_second_difference) / 2.0;
  rep.d1_pass = std::isfinite(rep.c1);
  rep.d2_pass = std::isfinite(rep.c2) && (!rep.has_kink || rep.kink_second_difference <= 2.0 * rep.c2);
  return rep;
}

}  // namespace rfbsde
