#ifndef TVSPEC_SIMGEN_HPP
#define TVSPEC_SIMGEN_HPP

#include "tvspec/priors.hpp"
#include "tvspec/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tvspec {

struct Regime {
  std::vector<Eigen::MatrixXd> lags;  // Phi_1, Phi_2, ...
  Eigen::MatrixXd sigma;              // innovation covariance
};

// Piecewise linear process driven by Gaussian innovations.
//   VMA: X_t = e_t + sum_l Phi_l(t) e_{t-l}
//   VAR: X_t = sum_l Phi_l(t) X_{t-l} + e_t
// Regime r covers samples (ends[r-1], ends[r]] (one-based, ends.back() == T).
struct ProcessSpec {
  enum class Kind { kVma, kVar };

  Kind kind = Kind::kVma;
  int length = 0;
  int dim = 0;
  std::vector<int> ends;
  std::vector<Regime> regimes;
  // Time-varying lag matrices at sample t; overrides the regime lags.
  std::function<std::vector<Eigen::MatrixXd>(int t)> lags_at;

  int regime_of(int t) const;
  std::vector<Eigen::MatrixXd> lags(int t) const;
  const Eigen::MatrixXd& sigma(int t) const;
  // Throws InvalidArgument on inconsistent boundaries, shapes or a
  // non-positive-definite covariance.
  void validate() const;
};

// Unit-variance innovation covariance with a common off-diagonal correlation.
Eigen::MatrixXd equicorrelation(int dim, double rho);

// Trivariate piecewise VMA(2) with a change after sample T/2.
ProcessSpec piecewise_vma_spec(int length = 600);
// Bivariate VMA(2) with slowly varying lag-1 diagonal.
ProcessSpec slowvarying_vma_spec(int length = 1024);
// Bivariate four-regime VAR(2); T and boundaries scale with `scale`
// (1 -> T = 12000, boundaries 400 / 5000 / 10000).
ProcessSpec piecewise_var_spec(double scale = 1.0);

// Generator by name: "piecewise_vma", "slowvarying_vma", "piecewise_var".
// `length` is ignored for piecewise_var, `scale` only used by it.
ProcessSpec process_by_name(const std::string& name, int length, double scale);

// VAR simulation discards a 500-sample pre-period run under regime 1.
MultivariateSeries simulate(const ProcessSpec& spec, Rng& rng);

MultivariateSeries gen_piecewise_vma(Rng& rng, int length = 600);
MultivariateSeries gen_slowvarying_vma(Rng& rng, int length = 1024);
// Throws InvalidArgument when a scaled regime is shorter than n_min.
MultivariateSeries gen_piecewise_var(Rng& rng, double scale = 1.0, int n_min = 60);

// f(u, w) of the coefficients in force at sample t = clamp(ceil(u T), 1, T).
//   VMA: Phi(w) Sigma Phi(w)^*, Phi(w) = I + sum_l Phi_l e^{-2 pi i w l}
//   VAR: Phi(w)^{-1} Sigma Phi(w)^{-*}, Phi(w) = I - sum_l Phi_l e^{-2 pi i w l}
// The VAR form throws InvalidState when Phi(w) is singular.
Eigen::MatrixXcd true_spectrum(const ProcessSpec& spec, double u, double omega);
Eigen::MatrixXcd true_spectrum_vma(const ProcessSpec& spec, double u, double omega);
Eigen::MatrixXcd true_spectrum_var(const ProcessSpec& spec, double u, double omega);

SpectrumGrid true_spectrum_grid(const ProcessSpec& spec, const std::vector<double>& time_grid,
                                const std::vector<double>& freq_grid);

}  // namespace tvspec

#endif  // TVSPEC_SIMGEN_HPP
