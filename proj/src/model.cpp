#include "tvspec/model.hpp"

#include "tvspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tvspec {

Eigen::MatrixXd basis_matrix(std::span<const double> freqs, int basis_size, BasisKind kind) {
  if (basis_size < 2) throw InvalidArgument("basis truncation S must be at least 2");
  if (freqs.empty()) throw InvalidArgument("frequency list is empty");
  const Eigen::Index rows = static_cast<Eigen::Index>(freqs.size());
  Eigen::MatrixXd out(rows, basis_size);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double w = freqs[static_cast<std::size_t>(i)];
    if (kind == BasisKind::kEven) {
      out(i, 0) = 1.0;
      for (int s = 1; s < basis_size; ++s) out(i, s) = std::cos(two_pi * s * w);
    } else {
      for (int s = 1; s <= basis_size; ++s) out(i, s - 1) = std::sin(two_pi * s * w);
    }
  }
  return out;
}

double clamp_log_psi(double value, long* clamp_events) {
  if (value > kLogPsiClamp || value < -kLogPsiClamp) {
    if (clamp_events) ++*clamp_events;
    return std::clamp(value, -kLogPsiClamp, kLogPsiClamp);
  }
  return value;
}

std::vector<CholeskyPair> reconstruct_cholesky(const ComponentLayout& layout,
                                               const Eigen::MatrixXd& local,
                                               std::span<const double> freqs,
                                               long* clamp_events) {
  const int n = layout.dim();
  if (local.cols() != layout.size()) {
    throw InvalidArgument("coefficient matrix has wrong number of components");
  }
  if (!local.allFinite()) throw InvalidState("non-finite spline coefficient");
  const int basis_size = static_cast<int>(local.rows());
  const Eigen::MatrixXd even = basis_matrix(freqs, basis_size, BasisKind::kEven);
  const Eigen::MatrixXd odd = basis_matrix(freqs, basis_size, BasisKind::kOdd);
  const Eigen::MatrixXd even_vals = even * local;
  const Eigen::MatrixXd odd_vals = odd * local;

  std::vector<CholeskyPair> out(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    CholeskyPair& pair = out[i];
    pair.theta = Eigen::MatrixXcd::Identity(n, n);
    pair.psi.resize(n);
    for (int j = 0; j < n; ++j) {
      pair.psi(j) = std::exp(clamp_log_psi(even_vals(row, layout.log_psi(j)), clamp_events));
      for (int k = 0; k < j; ++k) {
        pair.theta(j, k) = cdouble(even_vals(row, layout.re_theta(j, k)),
                                   odd_vals(row, layout.im_theta(j, k)));
      }
    }
  }
  return out;
}

Eigen::MatrixXcd spectrum_from_cholesky(const CholeskyPair& pair) {
  const Eigen::Index n = pair.psi.size();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(pair.psi(j) > 0.0)) throw InvalidState("psi must be positive");
  }
  // A = Theta^{-1}; f = A^* Psi A.
  const Eigen::MatrixXcd a = pair.theta.triangularView<Eigen::UnitLower>().solve(
      Eigen::MatrixXcd::Identity(n, n));
  Eigen::MatrixXcd f = a.adjoint() * pair.psi.cast<cdouble>().asDiagonal() * a;
  const Eigen::MatrixXcd sym = 0.5 * (f + f.adjoint());
  return sym;
}

double coherence(const Eigen::MatrixXcd& f, int j, int k) {
  const double fjj = f(j, j).real();
  const double fkk = f(k, k).real();
  if (!(fjj > 0.0) || !(fkk > 0.0)) throw InvalidState("auto-spectrum must be positive");
  return std::norm(f(j, k)) / (fjj * fkk);
}

ComponentRunMap component_runs(const Partition& partition, int n_components) {
  const int m = partition.segments();
  ComponentRunMap map;
  map.runs.resize(static_cast<std::size_t>(n_components));
  for (int c = 0; c < n_components; ++c) {
    int first = 0;
    for (int q = 1; q < m; ++q) {
      if (contains(partition.phi[q - 1], c)) {
        map.runs[c].push_back({first, q - 1});
        first = q;
      }
    }
    map.runs[c].push_back({first, m - 1});
  }
  return map;
}

std::vector<ChangeSet> change_sets_from_runs(const ComponentRunMap& map, int segments) {
  std::vector<ChangeSet> phi(static_cast<std::size_t>(std::max(segments - 1, 0)), 0);
  for (std::size_t c = 0; c < map.runs.size(); ++c) {
    for (const Run& run : map.runs[c]) {
      if (run.first > 0) phi[run.first - 1] |= ChangeSet{1} << c;
    }
  }
  return phi;
}

}  // namespace tvspec
