#include "rfbsde/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/parallel.hpp"

namespace rfbsde {

FeedbackLaw::FeedbackLaw(SpaceTimeGrid grid, ControlSet controls, std::vector<double> table,
                         LawInterpolation interpolation, std::string tie_break, std::string provenance)
    : grid_(grid),
      controls_(std::move(controls)),
      table_(std::move(table)),
      interpolation_(interpolation),
      tie_break_(std::move(tie_break)),
      provenance_(std::move(provenance)) {
  grid_.check();
  const auto m = static_cast<std::size_t>(controls_.dim());
  if (table_.size() != grid_.rows() * grid_.cols() * m)
    throw ConfigError("E_LAW_SHAPE", "law table does not match the grid shape");
  for (std::size_t k = 0; k < grid_.rows() * grid_.cols(); ++k)
    if (!controls_.contains(std::span<const double>(table_.data() + k * m, m)))
      throw ConfigError("E_LAW_OUTSIDE_U", "law table entry " + std::to_string(k) + " lies outside the control set");
}

FeedbackLaw FeedbackLaw::constant(const SpaceTimeGrid& grid, const ControlSet& controls, std::vector<double> value) {
  if (value.size() != static_cast<std::size_t>(controls.dim()))
    throw ConfigError("E_LAW_SHAPE", "constant law value has the wrong dimension");
  std::vector<double> table;
  table.reserve(grid.rows() * grid.cols() * value.size());
  for (std::size_t k = 0; k < grid.rows() * grid.cols(); ++k) table.insert(table.end(), value.begin(), value.end());
  return FeedbackLaw(grid, controls, std::move(table), LawInterpolation::nearest, "lexicographic-min", "constant");
}

std::span<const double> FeedbackLaw::at(std::size_t i, std::size_t j) const {
  const auto m = static_cast<std::size_t>(controls_.dim());
  return {table_.data() + grid_.index(i, j) * m, m};
}

void FeedbackLaw::evaluate(double t, double x, std::span<double> out) const {
  const auto m = static_cast<std::size_t>(controls_.dim());
  if (interpolation_ == LawInterpolation::nearest) {
    const auto v = at(grid_.nearest_time(t), grid_.nearest_space(x));
    std::copy(v.begin(), v.end(), out.begin());
    return;
  }
  const double ft = std::clamp((t - grid_.t0) / grid_.dt(), 0.0, static_cast<double>(grid_.time_steps));
  const double fx = std::clamp((x - grid_.x_lo) / grid_.dx(), 0.0, static_cast<double>(grid_.space_steps));
  const auto i = std::min(static_cast<std::size_t>(ft), grid_.time_steps - 1);
  const auto j = std::min(static_cast<std::size_t>(fx), grid_.space_steps - 1);
  const double a = ft - static_cast<double>(i), b = fx - static_cast<double>(j);
  for (std::size_t k = 0; k < m; ++k)
    out[k] = (1 - a) * ((1 - b) * at(i, j)[k] + b * at(i, j + 1)[k]) +
             a * ((1 - b) * at(i + 1, j)[k] + b * at(i + 1, j + 1)[k]);
  controls_.project(out.first(m));
}

FeedbackLaw extract_feedback(const ValueSurface& surface, const ControlModel& model, int workers) {
  if (!model.scalar()) throw ConfigError("E_SYNTHESIS_DIMS", "feedback extraction handles scalar models only");
  const auto& g = surface.grid();
  std::vector<double> table(g.rows() * g.cols());
  bool used_kink_rule = false;
  for (std::size_t j = 0; j < g.cols(); ++j) used_kink_rule = used_kink_rule || surface.is_kink_column(j);
  parallel_for(g.rows(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        double p, P;
        if (surface.is_kink_column(j) && j > 0 && j < g.space_steps) {
          const auto [left, right] = surface.one_sided_slopes(i, j);
          p = 0.5 * (left + right);
          P = 0.0;
        } else {
          const auto d = surface.derivatives(i, j);
          p = d.wx, P = d.wxx;
        }
        table[g.index(i, j)] = inf_hamiltonian(model, g.t(i), g.x(j), surface.at(i, j), p, P).canonical[0];
      }
    }
  });
  std::string provenance = "surface=" + (surface.provenance().empty() ? std::string("-") : surface.provenance());
  if (used_kink_rule) provenance += ";kink-rule=midpoint-slope-P0";
  return FeedbackLaw(g, model.controls, std::move(table), LawInterpolation::nearest, "lexicographic-min",
                     provenance);
}

LawRegularityReport check_law_regularity(const FeedbackLaw& law) {
  const auto& g = law.grid();
  const auto m = static_cast<std::size_t>(law.control_dim());
  LawRegularityReport rep;
  rep.jump_threshold = law.controls().max_width() / 2.0;
  auto dist = [&](std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t k = 0; k < m; ++k) d = std::max(d, std::fabs(a[k] - b[k]));
    return d;
  };
  rep.slice_max_jump.assign(g.rows(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j + 1 < g.cols(); ++j) {
      const double jump = dist(law.at(i, j), law.at(i, j + 1));
      rep.slice_max_jump[i] = std::max(rep.slice_max_jump[i], jump);
    }
    rep.max_jump = std::max(rep.max_jump, rep.slice_max_jump[i]);
    if (i + 1 < g.rows())
      for (std::size_t j = 0; j < g.cols(); ++j)
        rep.time_variation = std::max(rep.time_variation, dist(law.at(i, j), law.at(i + 1, j)));
  }
  rep.lipschitz = rep.max_jump / g.dx();
  if (rep.jump_threshold > 0.0 && rep.max_jump > rep.jump_threshold) {
    rep.member = false;
    for (std::size_t i = 0; i < g.rows(); ++i)
      if (rep.slice_max_jump[i] > rep.jump_threshold) {
        rep.note = "jump of " + fmt_double(rep.slice_max_jump[i]) + " across one cell at t=" + fmt_double(g.t(i)) +
                   "; use the viscosity verification path";
        break;
      }
  }
  return rep;
}

CostEstimate evaluate_feedback(const ControlModel& model, const FeedbackLaw& law, double t, double x,
                               const TimeGrid& grid, std::size_t paths, std::uint64_t seed, const SolverConfig& config,
                               bool override_admissibility) {
  if (!override_admissibility) {
    const auto rep = check_law_regularity(law);
    if (!rep.member)
      throw ConfigError("E_LAW_NOT_ADMISSIBLE", "feedback law fails the regularity check (" + rep.note +
                                                    "); set the override to evaluate anyway");
  }
  const std::vector<double> x0{x};
  const auto ensemble = simulate_closed_loop(model, law, t, x0, grid, paths, seed, config.workers);
  return summarize(solve_reflected(model, ensemble, config), config);
}

void write_law_csv(std::ostream& out, const FeedbackLaw& law) {
  if (law.control_dim() != 1) throw ConfigError("E_LAW_CSV", "law CSV export handles scalar controls only");
  const auto& g = law.grid();
  const auto& b = law.controls().bounds()[0];
  out << "# kind=law tie_break=" << law.tie_break()
      << " interpolation=" << (law.interpolation() == LawInterpolation::nearest ? "nearest" : "bilinear")
      << " provenance=" << (law.provenance().empty() ? "-" : law.provenance()) << " control_lo=" << fmt_double(b.lo)
      << " control_hi=" << fmt_double(b.hi) << " control_points=" << law.controls().grid_points()[0]
      << " t0=" << fmt_double(g.t0) << " t1=" << fmt_double(g.t1) << " time_steps=" << g.time_steps
      << " x_lo=" << fmt_double(g.x_lo) << " x_hi=" << fmt_double(g.x_hi) << " space_steps=" << g.space_steps
      << "\n";
  out << "t";
  for (std::size_t j = 0; j < g.cols(); ++j) out << ',' << fmt_double(g.x(j));
  out << "\n";
  for (std::size_t i = 0; i < g.rows(); ++i) {
    out << fmt_double(g.t(i));
    for (std::size_t j = 0; j < g.cols(); ++j) out << ',' << fmt_double(law.at(i, j)[0]);
    out << "\n";
  }
}

FeedbackLaw read_law_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# kind=law", 0) != 0)
    throw ConfigError("E_LAW_CSV", "missing law header line");
  SpaceTimeGrid g;
  std::string tie = "lexicographic-min", provenance;
  LawInterpolation interp = LawInterpolation::nearest;
  double lo = 0.0, hi = 0.0;
  int points = 2;
  for (const auto& [k, v] : parse_header_pairs(line.substr(1))) {
    if (k == "tie_break") tie = v;
    else if (k == "interpolation") interp = v == "bilinear" ? LawInterpolation::bilinear : LawInterpolation::nearest;
    else if (k == "provenance") provenance = v == "-" ? "" : v;
    else if (k == "control_lo") lo = parse_double(v);
    else if (k == "control_hi") hi = parse_double(v);
    else if (k == "control_points") points = static_cast<int>(parse_double(v));
    else if (k == "t0") g.t0 = parse_double(v);
    else if (k == "t1") g.t1 = parse_double(v);
    else if (k == "time_steps") g.time_steps = static_cast<std::size_t>(parse_double(v));
    else if (k == "x_lo") g.x_lo = parse_double(v);
    else if (k == "x_hi") g.x_hi = parse_double(v);
    else if (k == "space_steps") g.space_steps = static_cast<std::size_t>(parse_double(v));
  }
  g.check();
  if (!std::getline(in, line)) throw ConfigError("E_LAW_CSV", "missing column header row");
  std::vector<double> table;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != g.cols() + 1) throw ConfigError("E_LAW_CSV", "law row has the wrong number of columns");
    for (std::size_t j = 1; j < cells.size(); ++j) table.push_back(parse_double(cells[j]));
    ++rows;
  }
  if (rows != g.rows()) throw ConfigError("E_LAW_CSV", "law has the wrong number of rows");
  return FeedbackLaw(g, ControlSet::interval(lo, hi, points), std::move(table), interp, tie, provenance);
}

}  // namespace rfbsde
