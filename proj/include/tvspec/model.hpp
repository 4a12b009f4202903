#ifndef TVSPEC_MODEL_HPP
#define TVSPEC_MODEL_HPP

#include "tvspec/types.hpp"

#include <span>
#include <vector>

namespace tvspec {

enum class BasisKind { kEven, kOdd };

inline BasisKind basis_kind(const ComponentIndex& idx) {
  return idx.is_even() ? BasisKind::kEven : BasisKind::kOdd;
}

// Demmler-Reinsch truncated bases for periodic linear splines.
//   even: [1, cos(2 pi w), ..., cos(2 pi (S-1) w)]
//   odd:  [sin(2 pi w), ..., sin(2 pi S w)]
// Always |freqs| x S. Throws InvalidArgument for S < 2 or no frequencies.
Eigen::MatrixXd basis_matrix(std::span<const double> freqs, int basis_size, BasisKind kind);

inline constexpr double kLogPsiClamp = 50.0;

// Clamps a log-psi value into [-50, 50]; bumps *clamp_events when it bites.
double clamp_log_psi(double value, long* clamp_events = nullptr);

// Evaluates the modified-Cholesky components on one segment.
// `local` holds one coefficient column per component in canonical order
// (see ComponentLayout). Throws InvalidState on non-finite coefficients.
std::vector<CholeskyPair> reconstruct_cholesky(const ComponentLayout& layout,
                                               const Eigen::MatrixXd& local,
                                               std::span<const double> freqs,
                                               long* clamp_events = nullptr);

// f = Theta^{-*} Psi Theta^{-1}, via a unit-lower triangular solve.
Eigen::MatrixXcd spectrum_from_cholesky(const CholeskyPair& pair);

// |f_jk|^2 / (f_jj f_kk).
double coherence(const Eigen::MatrixXcd& f, int j, int k);

// Runs of each component implied by the partition's change-sets.
ComponentRunMap component_runs(const Partition& partition, int n_components);

// Inverse of component_runs: a boundary at delta_q for component c becomes
// membership of c in phi_q.
std::vector<ChangeSet> change_sets_from_runs(const ComponentRunMap& map, int segments);

}  // namespace tvspec

#endif  // TVSPEC_MODEL_HPP
