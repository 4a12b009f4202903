#ifndef TVSPEC_POSTERIOR_HPP
#define TVSPEC_POSTERIOR_HPP

#include "tvspec/sampler.hpp"
#include "tvspec/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tvspec {

// Scalar functional of a spectral matrix. Indices are zero-based; names use
// one-based indices: "f11", "logf11", "rho21".
struct Functional {
  enum class Kind { kSpectrum, kLogSpectrum, kCoherence };

  Kind kind = Kind::kSpectrum;
  int row = 0;
  int col = 0;

  static Functional spectrum(int j) { return {Kind::kSpectrum, j, j}; }
  static Functional log_spectrum(int j) { return {Kind::kLogSpectrum, j, j}; }
  // Squared coherence between channels j > k.
  static Functional coherence(int j, int k) { return {Kind::kCoherence, j, k}; }
  // Throws InvalidArgument on unknown names.
  static Functional parse(std::string_view name);

  std::string name() const;
  double operator()(const Eigen::MatrixXcd& f) const;
};

// f_jj for every channel and rho^2_jk for every pair j > k.
std::vector<Functional> standard_functionals(int dim);

// Time grid entries are scaled times u in [0, 1]; u maps to sample
// t = clamp(ceil(u T), 1, T). Grids must be non-decreasing in u.
std::vector<int> time_grid_samples(std::span<const double> time_grid, int length);

// Pointwise posterior mean of f(u, w). Throws InvalidArgument on an empty
// snapshot list.
SpectrumGrid posterior_spectrum(std::span<const Snapshot> snapshots,
                                std::span<const double> time_grid,
                                std::span<const double> freq_grid);

// Pointwise posterior mean of a functional, evaluated per snapshot before
// averaging.
ScalarGrid posterior_functional(std::span<const Snapshot> snapshots, const Functional& functional,
                                std::span<const double> time_grid,
                                std::span<const double> freq_grid);

struct CredibleBands {
  double level = 0.95;
  ScalarGrid lower;
  ScalarGrid upper;
};

// Pointwise equal-tailed percentile bands across snapshots (linear
// interpolation between order statistics).
CredibleBands credible_bands(std::span<const Snapshot> snapshots, const Functional& functional,
                             double level, std::span<const double> time_grid,
                             std::span<const double> freq_grid);

struct LocationHistogram {
  int m = 0;  // number of segments
  int q = 0;  // breakpoint index, 1..m-1
  std::vector<int> support;
  std::vector<double> probability;

  int mode() const;
};

struct ChangepointPosterior {
  int length = 0;
  std::vector<double> pm;  // pm[k - 1] = Pr(m = k | data), k = 1..M
  std::vector<LocationHistogram> ploc;

  int mode_m() const;
  // Histogram modes of delta_1..delta_{m-1} given m.
  std::vector<int> conditional_mode(int m) const;
};

// Breakpoint delta_q is the last (one-based) sample of segment q.
ChangepointPosterior changepoint_posterior(std::span<const Snapshot> snapshots, int max_segments,
                                           int length);

// Functional applied cell-wise to a spectrum grid.
ScalarGrid functional_grid(const SpectrumGrid& grid, const Functional& functional);

// Mean squared difference over the lattice. Throws InvalidArgument when the
// grids are not congruent.
double ase(const ScalarGrid& estimate, const ScalarGrid& truth);

// Discrete total variation along time, one entry per frequency column.
Eigen::VectorXd time_total_variation(const ScalarGrid& grid);

}  // namespace tvspec

#endif  // TVSPEC_POSTERIOR_HPP
