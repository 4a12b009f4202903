#ifndef TVSPEC_WHITTLE_HPP
#define TVSPEC_WHITTLE_HPP

#include "tvspec/dft.hpp"
#include "tvspec/types.hpp"

namespace tvspec {

// Sum of log Whittle likelihoods over segments and Fourier frequencies,
//   -sum_q sum_l { log|f(u_q, w_ql)| + y* f^{-1} y },
// evaluated through log|f| = sum_j log psi_jj and
// y* f^{-1} y = sum_j |(Theta* y)_j|^2 / psi_jj.
// Throws InvalidState (naming segment and frequency) on non-finite terms.
double whittle_loglik(const LocalDftSet& dfts, const SegmentCoefficients& coeffs,
                      const Partition& partition);

// Log-likelihood contribution of one segment given its coefficient columns.
double segment_whittle_loglik(const SegmentDft& dft, const ComponentLayout& layout,
                              const Eigen::MatrixXd& local);

// Offset of each component-run block in the flattened coefficient vector:
// component-major, then run, then coefficient index.
std::vector<std::vector<int>> coefficient_offsets(const SegmentCoefficients& coeffs);
Eigen::VectorXd flatten(const SegmentCoefficients& coeffs);
void unflatten(const Eigen::VectorXd& flat, SegmentCoefficients& coeffs);

// Analytic gradient of whittle_loglik with respect to every coefficient,
// laid out as flatten().
Eigen::VectorXd whittle_grad(const LocalDftSet& dfts, const SegmentCoefficients& coeffs,
                             const Partition& partition);

}  // namespace tvspec

#endif  // TVSPEC_WHITTLE_HPP
