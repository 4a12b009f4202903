#ifndef TVSPEC_TESTS_ORACLES_HPP
#define TVSPEC_TESTS_ORACLES_HPP

// Independent reference implementations used by the tests. None of these
// call into the library's numerical code paths.

#include "tvspec/model.hpp"
#include "tvspec/priors.hpp"
#include "tvspec/types.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, int rows, int cols,
                                       double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = z(rng);
  return out;
}

// Direct summation of the mean-centred local transform of samples
// start+1..end, l = 1..floor((n-1)/2), absolute one-based t.
inline Eigen::MatrixXcd dft(const Eigen::MatrixXd& x, int start, int end) {
  const int n = end - start;
  const int count = (n - 1) / 2;
  Eigen::MatrixXcd y(count, x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (int t = start; t < end; ++t) mean += x(t, c);
    mean /= n;
    for (int l = 1; l <= count; ++l) {
      cd acc = 0.0;
      for (int t = start + 1; t <= end; ++t) {
        const double angle = -kTwoPi * static_cast<double>(l) * t / n;
        acc += (x(t - 1, c) - mean) * std::polar(1.0, angle);
      }
      y(l - 1, c) = acc / std::sqrt(static_cast<double>(n));
    }
  }
  return y;
}

inline double even_curve(const Eigen::VectorXd& coef, double w) {
  double v = coef(0);
  for (int s = 1; s < coef.size(); ++s) v += coef(s) * std::cos(kTwoPi * s * w);
  return v;
}

inline double odd_curve(const Eigen::VectorXd& coef, double w) {
  double v = 0.0;
  for (int s = 1; s <= coef.size(); ++s) v += coef(s - 1) * std::sin(kTwoPi * s * w);
  return v;
}

// Spectral matrix at w from one segment's coefficient columns, built as
// inverse(Theta Psi^{-1} Theta^*) with dense inversion.
inline Eigen::MatrixXcd spectrum(const tvspec::ComponentLayout& layout,
                                 const Eigen::MatrixXd& local, double w) {
  const int n = layout.dim();
  Eigen::MatrixXcd theta = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd psi_inv = Eigen::MatrixXcd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    psi_inv(j, j) = std::exp(-even_curve(local.col(layout.log_psi(j)), w));
    for (int k = 0; k < j; ++k) {
      theta(j, k) = cd(even_curve(local.col(layout.re_theta(j, k)), w),
                       odd_curve(local.col(layout.im_theta(j, k)), w));
    }
  }
  const Eigen::MatrixXcd f_inv = theta * psi_inv * theta.adjoint();
  return f_inv.inverse();
}

// Whittle log-likelihood from dense spectral matrices:
// -sum { log det f + y^* f^{-1} y }.
inline double whittle(const Eigen::MatrixXd& x, const tvspec::Partition& partition,
                      const tvspec::SegmentCoefficients& coeffs, double* quad_sum = nullptr) {
  const tvspec::ComponentLayout layout(static_cast<int>(x.cols()));
  double total = 0.0;
  for (int q = 0; q < partition.segments(); ++q) {
    const int start = partition.breaks[q];
    const int end = partition.breaks[q + 1];
    const int n = end - start;
    const Eigen::MatrixXcd y = dft(x, start, end);
    const Eigen::MatrixXd local = coeffs.local(q);
    for (int l = 1; l <= y.rows(); ++l) {
      const Eigen::MatrixXcd f = spectrum(layout, local, static_cast<double>(l) / n);
      const Eigen::VectorXcd yl = y.row(l - 1).transpose();
      const cd quad = (yl.adjoint() * f.inverse() * yl)(0, 0);
      total -= std::log(f.determinant().real()) + quad.real();
      if (quad_sum) *quad_sum += quad.real();
    }
  }
  return total;
}

// Run labels of each component by walking the breakpoints: segment q+1 opens
// a new run of c exactly when c is in phi_{q+1}.
inline std::vector<std::vector<int>> run_labels(const tvspec::Partition& partition,
                                                int n_components) {
  const int m = partition.segments();
  std::vector<std::vector<int>> labels(n_components, std::vector<int>(m, 0));
  for (int c = 0; c < n_components; ++c) {
    for (int q = 1; q < m; ++q) {
      const bool changes = ((partition.phi[q - 1] >> c) & 1U) != 0;
      labels[c][q] = labels[c][q - 1] + (changes ? 1 : 0);
    }
  }
  return labels;
}

// Random partition of [0, length) with segments of at least n_min and
// random non-empty change-sets.
inline tvspec::Partition random_partition(std::mt19937_64& rng, int length, int m, int n_min,
                                          int n_components) {
  tvspec::Partition p;
  std::vector<int> cuts;
  const int slack = length - m * n_min;
  std::uniform_int_distribution<int> pick(0, slack);
  for (int i = 0; i < m - 1; ++i) cuts.push_back(pick(rng));
  std::sort(cuts.begin(), cuts.end());
  p.breaks.push_back(0);
  for (int i = 0; i < m - 1; ++i) p.breaks.push_back(cuts[i] + (i + 1) * n_min);
  p.breaks.push_back(length);
  const std::uint64_t all = (n_components >= 64) ? ~0ULL : ((1ULL << n_components) - 1);
  std::uniform_int_distribution<std::uint64_t> subset(1, all);
  for (int i = 0; i < m - 1; ++i) p.phi.push_back(subset(rng));
  return p;
}

inline tvspec::SegmentCoefficients random_coeffs(std::mt19937_64& rng, const tvspec::Partition& p,
                                                 int n_components, int basis_size, double sd) {
  tvspec::SegmentCoefficients coeffs =
      tvspec::SegmentCoefficients::zeros(tvspec::component_runs(p, n_components), basis_size);
  for (auto& list : coeffs.runs)
    for (auto& rc : list) rc.coef = gaussian_matrix(rng, basis_size, 1, sd);
  return coeffs;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Sum of exp(log prior) over every admissible partition with m segments.
inline double partition_mass(int length, int m, int n_min, const tvspec::PriorConfig& config) {
  double total = 0.0;
  std::vector<int> breaks{0};
  auto rec = [&](auto&& self, int depth) -> void {
    if (depth == m - 1) {
      if (length - breaks.back() < n_min) return;
      tvspec::Partition p;
      p.breaks = breaks;
      p.breaks.push_back(length);
      total += std::exp(tvspec::log_prior_partition(p, config));
      return;
    }
    for (int b = breaks.back() + n_min; b <= length - n_min; ++b) {
      breaks.push_back(b);
      self(self, depth + 1);
      breaks.pop_back();
    }
  };
  rec(rec, 0);
  return total;
}

// Density of lambda^2 given the coefficients, divided by its value at x_ref.
inline double lambda_density(double x, double shape, double rate, double x_ref) {
  return std::exp(-(shape + 1.0) * std::log(x / x_ref) - rate / x + rate / x_ref);
}

// CDF of the truncated law by Gauss-Kronrod quadrature, evaluated at sorted
// points.
inline std::vector<double> lambda_quadrature_cdf(const std::vector<double>& sorted, double shape,
                                                 double rate, double kappa) {
  using boost::math::quadrature::gauss_kronrod;
  const double x_ref = std::min(rate / (shape + 1.0), kappa);
  auto f = [&](double x) { return lambda_density(x, shape, rate, x_ref); };
  // density relative to the truncation point is below e^-200 under lo
  const double lo = 1.0 / (1.0 / kappa + 200.0 / rate);
  std::vector<double> edges{lo};
  for (double e = lo * 1.5; e < kappa; e *= 1.5) edges.push_back(e);
  edges.push_back(kappa);
  double norm = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    norm += gauss_kronrod<double, 31>::integrate(f, edges[i], edges[i + 1]);

  std::vector<double> cdf(sorted.size());
  double acc = 0.0;
  double prev = lo;
  std::size_t e = 1;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::max(sorted[i], lo);
    while (e < edges.size() && edges[e] < x) {
      acc += gauss_kronrod<double, 31>::integrate(f, prev, edges[e], 0);
      prev = edges[e++];
    }
    acc += gauss_kronrod<double, 31>::integrate(f, prev, x, 0);
    prev = x;
    cdf[i] = acc / norm;
  }
  return cdf;
}

inline double ks_statistic(const std::vector<double>& sorted, const std::vector<double>& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    d = std::max({d, std::abs(cdf[i] - static_cast<double>(i) / n),
                  std::abs(static_cast<double>(i + 1) / n - cdf[i])});
  }
  return d;
}

}  // namespace oracle

#endif  // TVSPEC_TESTS_ORACLES_HPP
