#include <algorithm>
#include <cmath>
#include <vector>

#include "rfbsde/error.hpp"
#include "rfbsde/rbsde.hpp"

namespace rfbsde {

namespace {

struct Composite {
  const ControlModel& model;
  const StateFeedback& control;

  double u(double r, double x) const {
    const double v = control(r, x);
    const double w[1] = {v};
    if (!model.controls.contains(w))
      throw ConfigError("E_TREE_CONTROL", "tree control value " + std::to_string(v) + " lies outside U");
    return v;
  }
  double B(double r, double x) const { return model.b(r, x, u(r, x)); }
  double S(double r, double x) const { return model.sigma(r, x, u(r, x)); }
};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Central difference in x; one-sided in t near the horizon.
struct Derivs {
  double v, x, xx, t;
};

template <class F>
Derivs differentiate(F fn, double r, double x, double horizon) {
  const double ex = 1e-4 * (1.0 + std::fabs(x));
  const double et = 1e-5;
  Derivs d;
  d.v = fn(r, x);
  const double p = fn(r, x + ex), m = fn(r, x - ex);
  d.x = (p - m) / (2.0 * ex);
  d.xx = (p - 2.0 * d.v + m) / (ex * ex);
  d.t = r + et <= horizon ? (fn(r + et, x) - d.v) / et : (d.v - fn(r - et, x)) / et;
  return d;
}

// Solves y = a + w f(y) by fixed-point iteration; w f is a contraction for small steps.
template <class F>
double implicit_solve(double a, double w, F f) {
  double y = a;
  for (int it = 0; it < 500; ++it) {
    const double next = a + w * f(y);
    if (!std::isfinite(next)) throw NumericalError("E_TREE_NONFINITE", "non-finite value in tree driver step");
    const double change = std::fabs(next - y);
    y = next;
    if (change <= 1e-13 * (1.0 + std::fabs(y))) return y;
  }
  throw NumericalError("E_TREE_DRIVER", "implicit driver step did not converge in the tree");
}

}  // namespace

double tree_oracle(const ControlModel& model, double t, double x, const StateFeedback& control, int depth,
                   TreeScheme scheme) {
  model.check();
  if (!model.scalar()) throw ConfigError("E_TREE_DIMS", "the tree oracle needs a scalar model");
  if (depth < 1 || depth > 20) throw ConfigError("E_TREE_DEPTH", "tree depth must lie in [1, 20]");
  if (!(t < model.horizon)) throw ConfigError("E_TREE_TIME", "tree start time must precede the horizon");
  if (!control) throw ConfigError("E_TREE_CONTROL", "tree oracle needs a control");

  const Composite co{model, control};
  const double T = model.horizon;
  const double dt = (T - t) / depth;
  const double sq = std::sqrt(dt);
  const auto D = static_cast<std::size_t>(depth);
  auto node_time = [&](std::size_t i) { return i == D ? T : t + static_cast<double>(i) * dt; };

  // Forward: level i holds 2^i states; children of j are 2j (down) and 2j+1 (up).
  std::vector<std::vector<double>> X(D + 1);
  std::vector<std::vector<double>> Ssign(D);
  X[0] = {x};
  for (std::size_t i = 0; i < D; ++i) {
    const double r = node_time(i);
    const auto& cur = X[i];
    auto& nxt = X[i + 1];
    nxt.resize(cur.size() * 2);
    Ssign[i].resize(cur.size());
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const double xj = cur[j];
      double mean, var, s;
      if (scheme == TreeScheme::mc_consistent) {
        s = co.S(r, xj);
        mean = xj + co.B(r, xj) * dt;
        var = s * s * dt;
      } else {
        const auto b = differentiate([&](double rr, double xx) { return co.B(rr, xx); }, r, xj, T);
        const auto sd = differentiate([&](double rr, double xx) { return co.S(rr, xx); }, r, xj, T);
        s = sd.v;
        const double s2 = s * s;
        mean = xj + b.v * dt + 0.5 * dt * dt * (b.t + b.v * b.x + 0.5 * s2 * b.xx);
        var = s2 * dt +
              dt * dt * (b.v * s * sd.x + s2 * b.x + 0.5 * s2 * sd.x * sd.x + 0.5 * s2 * s * sd.xx + s * sd.t);
        if (!(var >= 0.0)) var = s2 * dt;
      }
      const double spread = std::sqrt(var);
      nxt[2 * j] = mean - spread;
      nxt[2 * j + 1] = mean + spread;
      Ssign[i][j] = sign(s);
    }
  }

  // Leaves: Y = Phi, Z = sigma Phi'.
  std::vector<double> Y(X[D].size()), Z(X[D].size()), F(X[D].size());
  for (std::size_t j = 0; j < Y.size(); ++j) {
    const double xj = X[D][j];
    Y[j] = model.phi(xj);
    if (scheme == TreeScheme::second_order) {
      const double e = 1e-4 * (1.0 + std::fabs(xj));
      const double dphi = (model.phi(xj + e) - model.phi(xj - e)) / (2.0 * e);
      Z[j] = co.S(T, xj) * dphi;
      F[j] = model.f(T, xj, Y[j], Z[j], co.u(T, xj));
    }
  }

  for (std::size_t ii = D; ii-- > 0;) {
    const std::size_t i = ii;
    const double r = node_time(i);
    const auto& cur = X[i];
    std::vector<double> y(cur.size()), z(cur.size()), fv(cur.size());
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const double xj = cur[j];
      const double uj = co.u(r, xj);
      const double lo = Y[2 * j], hi = Y[2 * j + 1];
      const double c = 0.5 * (lo + hi);
      const double zj = Ssign[i][j] * (hi - lo) / (2.0 * sq);
      auto f = [&](double yy) { return model.f(r, xj, yy, zj, uj); };
      double yj;
      if (scheme == TreeScheme::mc_consistent) {
        yj = implicit_solve(c, dt, f);
      } else {
        const double fnext = 0.5 * (F[2 * j] + F[2 * j + 1]);
        yj = implicit_solve(c + 0.5 * dt * fnext, 0.5 * dt, f);
      }
      yj = std::min(yj, model.h(r, xj));
      y[j] = yj;
      z[j] = zj;
      if (scheme == TreeScheme::second_order) fv[j] = f(yj);
    }
    Y = std::move(y);
    Z = std::move(z);
    F = std::move(fv);
  }
  return Y[0];
}

}  // namespace rfbsde
