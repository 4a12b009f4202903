#include "tvspec/simgen.hpp"

#include "tvspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tvspec {
namespace {

constexpr int kVarPrePeriod = 500;

Eigen::MatrixXd diag2(double a, double b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Eigen::MatrixXcd lag_polynomial(const std::vector<Eigen::MatrixXd>& lags, int dim, double omega,
                                double sign) {
  Eigen::MatrixXcd poly = Eigen::MatrixXcd::Identity(dim, dim);
  for (std::size_t l = 0; l < lags.size(); ++l) {
    const double arg = -2.0 * std::numbers::pi * omega * static_cast<double>(l + 1);
    poly += sign * std::polar(1.0, arg) * lags[l].cast<cdouble>();
  }
  return poly;
}

int sample_at(const ProcessSpec& spec, double u) {
  const double t = std::ceil(u * spec.length - 1e-9);
  return std::clamp(static_cast<int>(t), 1, spec.length);
}

Eigen::VectorXd draw_innovation(const Eigen::MatrixXd& chol, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(chol.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return chol * z;
}

}  // namespace

int ProcessSpec::regime_of(int t) const {
  const auto it = std::lower_bound(ends.begin(), ends.end(), t);
  if (it == ends.end()) return static_cast<int>(ends.size()) - 1;
  return static_cast<int>(it - ends.begin());
}

std::vector<Eigen::MatrixXd> ProcessSpec::lags(int t) const {
  if (lags_at) return lags_at(t);
  return regimes[regime_of(t)].lags;
}

const Eigen::MatrixXd& ProcessSpec::sigma(int t) const { return regimes[regime_of(t)].sigma; }

void ProcessSpec::validate() const {
  if (length < 1 || dim < 1) throw InvalidArgument("process needs positive length and dimension");
  if (ends.empty() || ends.size() != regimes.size()) {
    throw InvalidArgument("one regime end per regime required");
  }
  for (std::size_t r = 0; r < ends.size(); ++r) {
    const int prev = r == 0 ? 0 : ends[r - 1];
    if (ends[r] <= prev) throw InvalidArgument("regime boundaries must be strictly increasing");
  }
  if (ends.back() != length) throw InvalidArgument("last regime must end at T");
  for (const Regime& regime : regimes) {
    if (regime.sigma.rows() != dim || regime.sigma.cols() != dim) {
      throw InvalidArgument("innovation covariance has wrong shape");
    }
    if (!regime.sigma.isApprox(regime.sigma.transpose())) {
      throw InvalidArgument("innovation covariance must be symmetric");
    }
    if (regime.sigma.llt().info() != Eigen::Success) {
      throw InvalidArgument("innovation covariance must be positive definite");
    }
    for (const auto& lag : regime.lags) {
      if (lag.rows() != dim || lag.cols() != dim) throw InvalidArgument("lag matrix has wrong shape");
    }
  }
}

Eigen::MatrixXd equicorrelation(int dim, double rho) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(dim, dim, rho);
  sigma.diagonal().setOnes();
  return sigma;
}

ProcessSpec piecewise_vma_spec(int length) {
  if (length < 2) throw InvalidArgument("piecewise VMA needs T >= 2");
  Eigen::MatrixXd phi11(3, 3);
  phi11 << 0.6, 0.0, 0.0,
           0.2, -0.5, 0.0,
           0.1, 0.3, 0.4;
  Eigen::MatrixXd phi21(3, 3);
  phi21 << 0.6, 0.0, 0.0,
           0.2, 0.5, 0.0,
           -0.1, -0.3, 0.4;
  const Eigen::MatrixXd phi2 = Eigen::Vector3d(0.3, 0.3, 0.0).asDiagonal();
  const Eigen::MatrixXd sigma = equicorrelation(3, 0.5);

  ProcessSpec spec;
  spec.kind = ProcessSpec::Kind::kVma;
  spec.length = length;
  spec.dim = 3;
  spec.ends = {length / 2, length};
  spec.regimes = {{{phi11, phi2}, sigma}, {{phi21, phi2}, sigma}};
  return spec;
}

ProcessSpec slowvarying_vma_spec(int length) {
  ProcessSpec spec;
  spec.kind = ProcessSpec::Kind::kVma;
  spec.length = length;
  spec.dim = 2;
  spec.ends = {length};
  const Eigen::MatrixXd phi2 = diag2(0.5, -1.2);
  spec.regimes = {{{Eigen::MatrixXd::Zero(2, 2), phi2}, equicorrelation(2, 0.2)}};
  spec.lags_at = [phi2](int t) {
    const double pi = std::numbers::pi;
    Eigen::MatrixXd phi1(2, 2);
    phi1 << 1.122 * (1.0 - 1.781 * std::sin(pi * t / 2048.0)), -1.0,
            -1.0, 1.122 * (1.0 - 1.781 * std::cos(0.8 * pi * t / 2048.0));
    return std::vector<Eigen::MatrixXd>{phi1, phi2};
  };
  return spec;
}

ProcessSpec piecewise_var_spec(double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
  auto scaled = [scale](int t) { return static_cast<int>(std::lround(t * scale)); };
  const Eigen::MatrixXd sigma1 = equicorrelation(2, 0.5);
  const Eigen::MatrixXd sigma2 = equicorrelation(2, 0.8);
  const Eigen::MatrixXd phi2 = diag2(0.0, -0.5);

  ProcessSpec spec;
  spec.kind = ProcessSpec::Kind::kVar;
  spec.length = scaled(12000);
  spec.dim = 2;
  spec.ends = {scaled(400), scaled(5000), scaled(10000), scaled(12000)};
  spec.regimes = {{{diag2(0.5, -0.6), phi2}, sigma1},
                  {{diag2(0.5, 0.6), phi2}, sigma1},
                  {{diag2(0.5, 0.6), phi2}, sigma2},
                  {{diag2(1.32, 0.6), diag2(-0.81, -0.5)}, sigma2}};
  return spec;
}

ProcessSpec process_by_name(const std::string& name, int length, double scale) {
  if (name == "piecewise_vma") return piecewise_vma_spec(length > 0 ? length : 600);
  if (name == "slowvarying_vma") return slowvarying_vma_spec(length > 0 ? length : 1024);
  if (name == "piecewise_var") return piecewise_var_spec(scale);
  throw InvalidArgument("unknown generator: " + name);
}

MultivariateSeries simulate(const ProcessSpec& spec, Rng& rng) {
  spec.validate();
  const int n = spec.dim;
  std::vector<Eigen::MatrixXd> chol;
  for (const Regime& regime : spec.regimes) chol.push_back(regime.sigma.llt().matrixL());
  Eigen::MatrixXd out(spec.length, n);

  if (spec.kind == ProcessSpec::Kind::kVma) {
    const int order = static_cast<int>(spec.lags(1).size());
    // eps[t + order - 1] holds e_t for t = 1 - order .. T
    std::vector<Eigen::VectorXd> eps;
    for (int t = 1 - order; t <= spec.length; ++t) {
      eps.push_back(draw_innovation(chol[spec.regime_of(std::max(t, 1))], rng));
    }
    for (int t = 1; t <= spec.length; ++t) {
      const auto lags = spec.lags(t);
      Eigen::VectorXd x = eps[t + order - 1];
      for (std::size_t l = 0; l < lags.size(); ++l) {
        x += lags[l] * eps[t + order - 1 - static_cast<int>(l) - 1];
      }
      out.row(t - 1) = x.transpose();
    }
    return MultivariateSeries(std::move(out));
  }

  const int order = static_cast<int>(spec.lags(1).size());
  std::vector<Eigen::VectorXd> history(static_cast<std::size_t>(order), Eigen::VectorXd::Zero(n));
  auto step = [&](int t) {
    const auto lags = spec.lags(t);
    Eigen::VectorXd x = draw_innovation(chol[spec.regime_of(t)], rng);
    for (std::size_t l = 0; l < lags.size(); ++l) x += lags[l] * history[l];
    history.insert(history.begin(), x);
    history.pop_back();
    return x;
  };
  for (int i = 0; i < kVarPrePeriod; ++i) step(1);
  for (int t = 1; t <= spec.length; ++t) out.row(t - 1) = step(t).transpose();
  if (!out.allFinite()) throw InvalidState("simulated VAR diverged");
  return MultivariateSeries(std::move(out));
}

MultivariateSeries gen_piecewise_vma(Rng& rng, int length) {
  return simulate(piecewise_vma_spec(length), rng);
}

MultivariateSeries gen_slowvarying_vma(Rng& rng, int length) {
  return simulate(slowvarying_vma_spec(length), rng);
}

MultivariateSeries gen_piecewise_var(Rng& rng, double scale, int n_min) {
  const ProcessSpec spec = piecewise_var_spec(scale);
  int prev = 0;
  for (int end : spec.ends) {
    if (end - prev < n_min) {
      throw InvalidArgument("scaled regime (" + std::to_string(prev + 1) + ", " +
                            std::to_string(end) + ") is shorter than n_min");
    }
    prev = end;
  }
  return simulate(spec, rng);
}

Eigen::MatrixXcd true_spectrum_vma(const ProcessSpec& spec, double u, double omega) {
  const int t = sample_at(spec, u);
  const Eigen::MatrixXcd poly = lag_polynomial(spec.lags(t), spec.dim, omega, 1.0);
  const Eigen::MatrixXcd f = poly * spec.sigma(t).cast<cdouble>() * poly.adjoint();
  return 0.5 * (f + f.adjoint());
}

Eigen::MatrixXcd true_spectrum_var(const ProcessSpec& spec, double u, double omega) {
  const int t = sample_at(spec, u);
  const Eigen::MatrixXcd poly = lag_polynomial(spec.lags(t), spec.dim, omega, -1.0);
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(poly);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12) {
    throw InvalidState("AR polynomial singular at frequency " + std::to_string(omega));
  }
  const Eigen::MatrixXcd inv = lu.inverse();
  const Eigen::MatrixXcd f = inv * spec.sigma(t).cast<cdouble>() * inv.adjoint();
  return 0.5 * (f + f.adjoint());
}

Eigen::MatrixXcd true_spectrum(const ProcessSpec& spec, double u, double omega) {
  return spec.kind == ProcessSpec::Kind::kVma ? true_spectrum_vma(spec, u, omega)
                                              : true_spectrum_var(spec, u, omega);
}

SpectrumGrid true_spectrum_grid(const ProcessSpec& spec, const std::vector<double>& time_grid,
                                const std::vector<double>& freq_grid) {
  SpectrumGrid grid;
  grid.time_points = time_grid;
  grid.freq_points = freq_grid;
  grid.dim = spec.dim;
  grid.values.reserve(time_grid.size() * freq_grid.size());
  for (double u : time_grid) {
    for (double w : freq_grid) grid.values.push_back(true_spectrum(spec, u, w));
  }
  return grid;
}

}  // namespace tvspec
