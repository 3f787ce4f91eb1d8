#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "rfbsde/error.hpp"
#include "rfbsde/rbsde.hpp"

namespace rfbsde {

namespace {

// Exponent tuples of total degree <= degree over `vars` variables, constant first.
std::vector<std::vector<int>> monomials(int vars, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(static_cast<std::size_t>(vars), 0);
  for (int total = 0; total <= degree; ++total) {
    // Enumerate compositions of `total` into `vars` parts.
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == vars - 1) {
        e[static_cast<std::size_t>(pos)] = left;
        out.push_back(e);
        return;
      }
      for (int k = left; k >= 0; --k) {
        e[static_cast<std::size_t>(pos)] = k;
        rec(pos + 1, left - k);
      }
    };
    if (vars == 0) {
      out.push_back({});
      break;
    }
    rec(0, total);
  }
  return out;
}

}  // namespace

ConditionalExpectation::ConditionalExpectation(std::span<const double> states, std::size_t paths, int state_dim,
                                               const SolverConfig& config)
    : paths_(paths) {
  const auto n = static_cast<std::size_t>(state_dim);

  // Standardize each coordinate; coordinates without spread carry no information.
  std::vector<double> mean(n, 0.0), scale(n, 0.0);
  std::vector<std::size_t> active;
  for (std::size_t a = 0; a < n; ++a) {
    double s = 0.0;
    for (std::size_t p = 0; p < paths; ++p) s += states[p * n + a];
    mean[a] = s / static_cast<double>(paths);
    double v = 0.0;
    for (std::size_t p = 0; p < paths; ++p) v += (states[p * n + a] - mean[a]) * (states[p * n + a] - mean[a]);
    scale[a] = std::sqrt(v / static_cast<double>(paths));
    if (scale[a] > 1e-12 * (1.0 + std::fabs(mean[a]))) active.push_back(a);
  }
  if (active.empty() || paths < 2) {
    mode_ = Mode::mean;
    return;
  }

  if (config.estimator == EstimatorKind::binning) {
    setup_binning(states, state_dim, config.bins);
    return;
  }

  const auto terms = monomials(static_cast<int>(active.size()), config.degree);
  basis_size_ = terms.size();
  basis_.assign(paths * basis_size_, 0.0);
  std::vector<double> xs(active.size());
  for (std::size_t p = 0; p < paths; ++p) {
    for (std::size_t k = 0; k < active.size(); ++k)
      xs[k] = (states[p * n + active[k]] - mean[active[k]]) / scale[active[k]];
    for (std::size_t b = 0; b < basis_size_; ++b) {
      double v = 1.0;
      for (std::size_t k = 0; k < active.size(); ++k)
        for (int e = 0; e < terms[b][k]; ++e) v *= xs[k];
      basis_[p * basis_size_ + b] = v;
    }
  }

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> B(
      basis_.data(), static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(basis_size_));
  const Eigen::MatrixXd gram = (B.transpose() * B) / static_cast<double>(paths);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0) || !(lmin > 1e-12 * lmax)) {
    fallback_ = true;
    basis_.clear();
    setup_binning(states, state_dim, config.bins);
    return;
  }
  const Eigen::MatrixXd inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
  gram_inverse_.assign(inv.data(), inv.data() + inv.size());
  mode_ = Mode::regression;
}

void ConditionalExpectation::setup_binning(std::span<const double> states, int state_dim, int bins) {
  if (bins < 1) throw ConfigError("E_SOLVER_BINS", "bin count must be positive");
  const auto n = static_cast<std::size_t>(state_dim);
  std::vector<std::size_t> order(paths_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return states[a * n] < states[b * n]; });
  bin_count_ = std::min<std::size_t>(static_cast<std::size_t>(bins), paths_);
  bin_of_.assign(paths_, 0);
  for (std::size_t r = 0; r < paths_; ++r) bin_of_[order[r]] = r * bin_count_ / paths_;
  mode_ = Mode::binning;
}

void ConditionalExpectation::project(std::span<const double> target, std::span<double> out) const {
  switch (mode_) {
    case Mode::mean: {
      double s = 0.0;
      for (std::size_t p = 0; p < paths_; ++p) s += target[p];
      const double m = s / static_cast<double>(paths_);
      std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(paths_), m);
      return;
    }
    case Mode::binning: {
      std::vector<double> sum(bin_count_, 0.0);
      std::vector<std::size_t> count(bin_count_, 0);
      for (std::size_t p = 0; p < paths_; ++p) {
        sum[bin_of_[p]] += target[p];
        ++count[bin_of_[p]];
      }
      for (std::size_t p = 0; p < paths_; ++p) out[p] = sum[bin_of_[p]] / static_cast<double>(count[bin_of_[p]]);
      return;
    }
    case Mode::regression: {
      const std::size_t K = basis_size_;
      std::vector<double> rhs(K, 0.0);
      for (std::size_t p = 0; p < paths_; ++p) {
        const double* row = basis_.data() + p * K;
        for (std::size_t b = 0; b < K; ++b) rhs[b] += row[b] * target[p];
      }
      for (double& v : rhs) v /= static_cast<double>(paths_);
      std::vector<double> coef(K, 0.0);
      for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b) coef[a] += gram_inverse_[b * K + a] * rhs[b];
      for (std::size_t p = 0; p < paths_; ++p) {
        const double* row = basis_.data() + p * K;
        double v = 0.0;
        for (std::size_t b = 0; b < K; ++b) v += row[b] * coef[b];
        out[p] = v;
      }
      return;
    }
  }
}

}  // namespace rfbsde
