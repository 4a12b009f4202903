#ifndef TVSPEC_PRIORS_HPP
#define TVSPEC_PRIORS_HPP

#include "tvspec/types.hpp"

#include <random>

namespace tvspec {

using Rng = std::mt19937_64;

struct PriorConfig {
  int max_segments = 10;      // M
  int n_min = 60;             // minimum segment length in samples
  int basis_size = 10;        // S
  double kappa = 1e5;         // upper bound of the uniform prior on lambda^2
  double sigma_alpha2 = 1e4;  // intercept prior variance

  // Throws ConfigError. Requires M <= floor(T / n_min), n_min >= 2S, S >= 4.
  void validate(int length) const;
};

// log Pr(m) + sum_q log(1 / alpha_q),
// alpha_q = T - delta_{q-1} - (m - q + 1) n_min + 1, Pr(m) = 1/M.
double log_prior_partition(const Partition& partition, const PriorConfig& config);

// -(m - 1) log(2^{N^2} - 1). Throws InvalidArgument on an empty change-set.
double log_prior_phi(const std::vector<ChangeSet>& phi, int dim);

// log(2^{N^2} - 1), stable for N^2 up to 64.
double log_nonempty_subsets(int n_components);

// Prior variance of coefficient index `i` of a block (intercept or s-th term).
double coefficient_prior_variance(bool even, int i, double lambda2, double sigma_alpha2);
// Diagonal prior precision D^{-1} of one block.
Eigen::VectorXd coefficient_prior_precision(bool even, int basis_size, double lambda2,
                                            double sigma_alpha2);

// Gaussian log-density of one component-run block under N(0, D).
double log_prior_block(const Eigen::VectorXd& coef, bool even, double lambda2,
                       double sigma_alpha2);

// Sum over all component-runs. Throws InvalidState if any lambda^2 is
// outside (0, kappa].
double log_prior_coeffs(const SegmentCoefficients& coeffs, const ComponentLayout& layout,
                        const PriorConfig& config);

// R = 1/2 sum_s (2 pi s)^2 a_s^2 over the lambda-scaled coefficients.
// `scaled` excludes the intercept for even components.
double lambda_rate(const Eigen::VectorXd& scaled);

// Draw from p(lambda^2 | a) on (0, kappa], proportional to
// (lambda^2)^{-n/2} exp(-R / lambda^2): 1/lambda^2 is Gamma(n/2 - 1, R)
// truncated to [1/kappa, inf). R == 0 falls back to Uniform(0, kappa] and
// sets *fallback when given.
double sample_lambda_conditional(const Eigen::VectorXd& scaled, double kappa, Rng& rng,
                                 bool* fallback = nullptr);

// CDF of that truncated law, used as an independent reference in tests.
double lambda_conditional_cdf(double lambda2, double shape, double rate, double kappa);

// Scaled (non-intercept) part of a block.
Eigen::VectorXd lambda_scaled_part(const Eigen::VectorXd& coef, bool even);

}  // namespace tvspec

#endif  // TVSPEC_PRIORS_HPP
