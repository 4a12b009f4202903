#include "tvspec/priors.hpp"

#include "tvspec/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace tvspec {
namespace {

constexpr double kTailMass = 1e-6;

double two_pi_s(int s) { return 2.0 * std::numbers::pi * s; }

// Gamma(shape, rate) restricted to x >= x0 when x0 sits far in the upper
// tail. Shifted-exponential envelope; exact for shape == 1.
double gamma_tail_draw(double shape, double rate, double x0, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double b = shape > 1.0 ? rate - (shape - 1.0) / x0 : rate;
  for (;;) {
    const double x = x0 + expo(rng) / b;
    const double log_accept = shape > 1.0
                                  ? (shape - 1.0) * (std::log(x / x0) - (x - x0) / x0)
                                  : (shape - 1.0) * std::log(x / x0);
    if (std::log(unif(rng)) <= log_accept) return x;
  }
}

}  // namespace

void PriorConfig::validate(int length) const {
  if (basis_size < 4) throw ConfigError("basis size S must be at least 4");
  if (n_min < 2 * basis_size) throw ConfigError("n_min must be at least 2S");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(sigma_alpha2 > 0.0)) throw ConfigError("sigma_alpha2 must be positive");
  if (max_segments < 1) throw ConfigError("M must be at least 1");
  if (length > 0 && max_segments > length / n_min) {
    throw ConfigError("M = " + std::to_string(max_segments) + " exceeds floor(T / n_min) = " +
                      std::to_string(length / n_min));
  }
}

double log_prior_partition(const Partition& partition, const PriorConfig& config) {
  const int m = partition.segments();
  const int length = partition.length();
  double lp = -std::log(static_cast<double>(config.max_segments));
  for (int q = 1; q <= m - 1; ++q) {
    const long alpha = static_cast<long>(length) - partition.breaks[q - 1] -
                       static_cast<long>(m - q + 1) * config.n_min + 1;
    if (alpha <= 0) {
      throw InvalidPartition("no admissible location for breakpoint " + std::to_string(q));
    }
    lp -= std::log(static_cast<double>(alpha));
  }
  return lp;
}

double log_nonempty_subsets(int n_components) {
  // log(2^n - 1) = n log 2 + log1p(-2^-n)
  return n_components * std::numbers::ln2 + std::log1p(-std::exp2(-n_components));
}

double log_prior_phi(const std::vector<ChangeSet>& phi, int dim) {
  for (std::size_t q = 0; q < phi.size(); ++q) {
    if (phi[q] == 0) {
      throw InvalidArgument("empty change-set at breakpoint " + std::to_string(q + 1));
    }
  }
  return -static_cast<double>(phi.size()) * log_nonempty_subsets(dim * dim);
}

double coefficient_prior_variance(bool even, int i, double lambda2, double sigma_alpha2) {
  if (even) {
    if (i == 0) return sigma_alpha2;
    return lambda2 / (two_pi_s(i) * two_pi_s(i));
  }
  return lambda2 / (two_pi_s(i + 1) * two_pi_s(i + 1));
}

Eigen::VectorXd coefficient_prior_precision(bool even, int basis_size, double lambda2,
                                            double sigma_alpha2) {
  Eigen::VectorXd prec(basis_size);
  for (int i = 0; i < basis_size; ++i) {
    prec(i) = 1.0 / coefficient_prior_variance(even, i, lambda2, sigma_alpha2);
  }
  return prec;
}

double log_prior_block(const Eigen::VectorXd& coef, bool even, double lambda2,
                       double sigma_alpha2) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < coef.size(); ++i) {
    const double var = coefficient_prior_variance(even, static_cast<int>(i), lambda2, sigma_alpha2);
    lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * coef(i) * coef(i) / var;
  }
  return lp;
}

double log_prior_coeffs(const SegmentCoefficients& coeffs, const ComponentLayout& layout,
                        const PriorConfig& config) {
  double lp = 0.0;
  for (std::size_t c = 0; c < coeffs.runs.size(); ++c) {
    const bool even = layout[static_cast<int>(c)].is_even();
    for (const auto& rc : coeffs.runs[c]) {
      if (!(rc.lambda2 > 0.0) || rc.lambda2 > config.kappa) {
        throw InvalidState("smoothing parameter outside (0, kappa]");
      }
      lp += log_prior_block(rc.coef, even, rc.lambda2, config.sigma_alpha2);
    }
  }
  return lp;
}

Eigen::VectorXd lambda_scaled_part(const Eigen::VectorXd& coef, bool even) {
  return even ? Eigen::VectorXd(coef.tail(coef.size() - 1)) : coef;
}

double lambda_rate(const Eigen::VectorXd& scaled) {
  double rate = 0.0;
  for (Eigen::Index i = 0; i < scaled.size(); ++i) {
    const double w = two_pi_s(static_cast<int>(i) + 1);
    rate += w * w * scaled(i) * scaled(i);
  }
  return 0.5 * rate;
}

double sample_lambda_conditional(const Eigen::VectorXd& scaled, double kappa, Rng& rng,
                                 bool* fallback) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double rate = lambda_rate(scaled);
  const double shape = 0.5 * static_cast<double>(scaled.size()) - 1.0;
  if (fallback) *fallback = false;
  if (!(shape > 0.0)) throw InvalidArgument("lambda conditional needs more than 2 coefficients");
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    if (fallback) *fallback = true;
    // (0, kappa]
    return kappa * (1.0 - unif(rng));
  }
  // y = rate / lambda^2 ~ Gamma(shape, 1) restricted to y >= rate / kappa
  const double x0 = rate / kappa;
  const double upper_mass = boost::math::gamma_q(shape, x0);
  double x;
  if (upper_mass >= kTailMass) {
    double v = upper_mass * unif(rng);
    if (v <= 0.0) v = std::numeric_limits<double>::min();
    x = boost::math::gamma_q_inv(shape, v);
  } else {
    x = gamma_tail_draw(shape, 1.0, x0, rng);
  }
  x = std::max(x, x0);
  return std::min(rate / x, kappa);
}

double lambda_conditional_cdf(double lambda2, double shape, double rate, double kappa) {
  if (lambda2 <= 0.0) return 0.0;
  if (lambda2 >= kappa) return 1.0;
  return boost::math::gamma_q(shape, rate / lambda2) / boost::math::gamma_q(shape, rate / kappa);
}

}  // namespace tvspec
