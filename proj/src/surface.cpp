#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "rfbsde/csv.hpp"
#include "rfbsde/error.hpp"
#include "rfbsde/hjb.hpp"

namespace rfbsde {

namespace {

std::string header_token(std::string s) {
  std::replace(s.begin(), s.end(), ' ', '_');
  return s.empty() ? "-" : s;
}

}  // namespace

ValueSurface::ValueSurface(SpaceTimeGrid grid, std::vector<double> values, std::string provenance,
                           std::vector<double> kinks)
    : grid_(grid), values_(std::move(values)), provenance_(std::move(provenance)), kinks_(std::move(kinks)) {
  grid_.check();
  if (values_.size() != grid_.rows() * grid_.cols())
    throw ConfigError("E_SURFACE_SHAPE", "surface values do not match the grid shape");
}

bool ValueSurface::is_kink_column(std::size_t j) const {
  const double dx = grid_.dx();
  const double lo = grid_.x(j) - (j > 0 ? dx : 0.0);
  const double hi = grid_.x(j) + (j < grid_.space_steps ? dx : 0.0);
  const double eps = 1e-9 * dx;
  for (double k : kinks_)
    if (k > lo + eps && k < hi - eps) return true;
  return false;
}

double ValueSurface::value_at(double t, double x) const {
  if (exact_) return exact_(t, x);
  const double ft = std::clamp((t - grid_.t0) / grid_.dt(), 0.0, static_cast<double>(grid_.time_steps));
  const double fx = std::clamp((x - grid_.x_lo) / grid_.dx(), 0.0, static_cast<double>(grid_.space_steps));
  const auto i = std::min(static_cast<std::size_t>(ft), grid_.time_steps - 1);
  const auto j = std::min(static_cast<std::size_t>(fx), grid_.space_steps - 1);
  const double a = ft - static_cast<double>(i), b = fx - static_cast<double>(j);
  return (1 - a) * ((1 - b) * at(i, j) + b * at(i, j + 1)) + a * ((1 - b) * at(i + 1, j) + b * at(i + 1, j + 1));
}

double ValueSurface::wt(std::size_t i, std::size_t j) const {
  const double dt = grid_.dt();
  if (i < grid_.time_steps) return (at(i + 1, j) - at(i, j)) / dt;
  return (at(i, j) - at(i - 1, j)) / dt;
}

double ValueSurface::wx(std::size_t i, std::size_t j) const {
  const double dx = grid_.dx();
  const std::size_t n = grid_.space_steps;
  if (j == 0) return (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * dx);
  if (j == n) return (3.0 * at(i, n) - 4.0 * at(i, n - 1) + at(i, n - 2)) / (2.0 * dx);
  return (at(i, j + 1) - at(i, j - 1)) / (2.0 * dx);
}

SurfaceDerivatives ValueSurface::derivatives(std::size_t i, std::size_t j) const {
  if (i > grid_.time_steps || j > grid_.space_steps)
    throw ConfigError("E_SURFACE_INDEX", "derivative requested outside the grid");
  if (is_kink_column(j))
    throw ConfigError("E_SURFACE_KINK", "second derivative refused at kink column " + std::to_string(j) +
                                            " (x=" + fmt_double(grid_.x(j)) + ")");
  const double dx2 = grid_.dx() * grid_.dx();
  const std::size_t n = grid_.space_steps;
  SurfaceDerivatives d;
  d.wt = wt(i, j);
  d.wx = wx(i, j);
  if (j == 0) {
    d.wxx = n >= 3 ? (2.0 * at(i, 0) - 5.0 * at(i, 1) + 4.0 * at(i, 2) - at(i, 3)) / dx2
                   : (at(i, 0) - 2.0 * at(i, 1) + at(i, 2)) / dx2;
  } else if (j == n) {
    d.wxx = n >= 3 ? (2.0 * at(i, n) - 5.0 * at(i, n - 1) + 4.0 * at(i, n - 2) - at(i, n - 3)) / dx2
                   : (at(i, n) - 2.0 * at(i, n - 1) + at(i, n - 2)) / dx2;
  } else {
    d.wxx = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / dx2;
  }
  return d;
}

std::pair<double, double> ValueSurface::one_sided_slopes(std::size_t i, std::size_t j) const {
  if (j == 0 || j >= grid_.space_steps)
    throw ConfigError("E_SURFACE_INDEX", "one-sided slopes need an interior column");
  const double dx = grid_.dx();
  return {(at(i, j) - at(i, j - 1)) / dx, (at(i, j + 1) - at(i, j)) / dx};
}

void write_surface_csv(std::ostream& out, const ValueSurface& s) {
  const auto& g = s.grid();
  out << "# kind=surface model=" << header_token(s.model_name) << " provenance=" << header_token(s.provenance())
      << " scheme=" << header_token(s.scheme) << " substeps=" << s.substeps << " t0=" << fmt_double(g.t0)
      << " t1=" << fmt_double(g.t1) << " time_steps=" << g.time_steps << " x_lo=" << fmt_double(g.x_lo)
      << " x_hi=" << fmt_double(g.x_hi) << " space_steps=" << g.space_steps << " kinks=";
  if (s.kinks().empty()) out << "-";
  for (std::size_t k = 0; k < s.kinks().size(); ++k) out << (k ? ";" : "") << fmt_double(s.kinks()[k]);
  out << "\n";
  out << "t";
  for (std::size_t j = 0; j < g.cols(); ++j) out << ',' << fmt_double(g.x(j));
  out << "\n";
  for (std::size_t i = 0; i < g.rows(); ++i) {
    out << fmt_double(g.t(i));
    for (std::size_t j = 0; j < g.cols(); ++j) out << ',' << fmt_double(s.at(i, j));
    out << "\n";
  }
}

ValueSurface read_surface_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# kind=surface", 0) != 0)
    throw ConfigError("E_SURFACE_CSV", "missing surface header line");
  SpaceTimeGrid g;
  std::string model, provenance, scheme;
  std::size_t substeps = 1;
  std::vector<double> kinks;
  for (const auto& [k, v] : parse_header_pairs(line.substr(1))) {
    if (k == "model") model = v;
    else if (k == "provenance") provenance = v;
    else if (k == "scheme") scheme = v;
    else if (k == "substeps") substeps = static_cast<std::size_t>(parse_double(v));
    else if (k == "t0") g.t0 = parse_double(v);
    else if (k == "t1") g.t1 = parse_double(v);
    else if (k == "time_steps") g.time_steps = static_cast<std::size_t>(parse_double(v));
    else if (k == "x_lo") g.x_lo = parse_double(v);
    else if (k == "x_hi") g.x_hi = parse_double(v);
    else if (k == "space_steps") g.space_steps = static_cast<std::size_t>(parse_double(v));
    else if (k == "kinks" && v != "-") {
      std::size_t pos = 0;
      while (pos <= v.size()) {
        const auto semi = v.find(';', pos);
        kinks.push_back(parse_double(v.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos)));
        if (semi == std::string::npos) break;
        pos = semi + 1;
      }
    }
  }
  g.check();
  if (!std::getline(in, line)) throw ConfigError("E_SURFACE_CSV", "missing column header row");
  std::vector<double> values;
  values.reserve(g.rows() * g.cols());
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != g.cols() + 1)
      throw ConfigError("E_SURFACE_CSV", "row " + std::to_string(rows) + " has the wrong number of columns");
    for (std::size_t j = 1; j < cells.size(); ++j) values.push_back(parse_double(cells[j]));
    ++rows;
  }
  if (rows != g.rows()) throw ConfigError("E_SURFACE_CSV", "surface has the wrong number of rows");
  ValueSurface s(g, std::move(values), provenance == "-" ? "" : provenance, std::move(kinks));
  s.model_name = model == "-" ? "" : model;
  s.scheme = scheme == "-" ? "" : scheme;
  s.substeps = substeps;
  return s;
}

ValueSurface candidate_surface(const std::string& name, const SpaceTimeGrid& grid, double horizon) {
  grid.check();
  SurfaceFn fn;
  std::vector<double> kinks;
  std::string model;
  if (name == "candidate-classical") {
    fn = [horizon](double t, double x) { return x * std::exp(2.0 * horizon - 2.0 * t); };
    model = "example-classical";
  } else if (name == "candidate-viscosity") {
    fn = [horizon](double t, double x) { return x > 0.0 ? x : x * std::exp(3.0 * horizon - 3.0 * t); };
    kinks = {0.0};
    model = "example-viscosity";
  } else if (name == "candidate-zero") {
    fn = [](double, double) { return 0.0; };
    model = "zero";
  } else {
    std::string known;
    for (const auto& n : candidate_catalog()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("E_CONFIG_UNKNOWN_SURFACE", "unknown candidate surface '" + name + "' (known: " + known + ")");
  }
  std::vector<double> values(grid.rows() * grid.cols());
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j) values[grid.index(i, j)] = fn(grid.t(i), grid.x(j));
  ValueSurface s(grid, std::move(values), name, std::move(kinks));
  s.set_exact(fn);
  s.model_name = model;
  s.scheme = "closed-form";
  return s;
}

std::vector<std::string> candidate_catalog() {
  return {"candidate-classical", "candidate-viscosity", "candidate-zero"};
}

std::vector<double> declared_kinks(const std::string& model_name) {
  if (model_name == "example-viscosity") return {0.0};
  return {};
}

}  // namespace rfbsde
