#include "oracles.hpp"

#include "tvspec/error.hpp"
#include "tvspec/posterior.hpp"
#include "tvspec/simgen.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

using namespace tvspec;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ProcessSpec single_regime(ProcessSpec::Kind kind, int dim, std::vector<Eigen::MatrixXd> lags,
                          Eigen::MatrixXd sigma, int length = 100) {
  ProcessSpec spec;
  spec.kind = kind;
  spec.length = length;
  spec.dim = dim;
  spec.ends = {length};
  spec.regimes = {{std::move(lags), std::move(sigma)}};
  return spec;
}

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// Periodogram of samples start+1..end averaged over replicates; row l-1 is
// the mean |y_l|^2 per channel.
Eigen::MatrixXd mean_periodogram(const ProcessSpec& spec, int replicates, int start, int end,
                                 std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd acc;
  for (int r = 0; r < replicates; ++r) {
    const MultivariateSeries x = simulate(spec, rng);
    const Eigen::MatrixXd p = oracle::dft(x.values(), start, end).cwiseAbs2();
    if (r == 0) acc = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    acc += p;
  }
  return acc / replicates;
}

}  // namespace

TEST_CASE("piecewise vma/coefficients and boundaries") {
  const ProcessSpec spec = piecewise_vma_spec();
  REQUIRE(spec.dim == 3);
  REQUIRE(spec.ends == std::vector<int>{300, 600});
  Eigen::RowVector3d row2(0.2, -0.5, 0.0);
  CHECK(spec.regimes[0].lags[0].row(1) == row2);
  CHECK(spec.regimes[0].lags[1] == Eigen::Vector3d(0.3, 0.3, 0.0).asDiagonal().toDenseMatrix());
  CHECK(spec.regimes[1].lags[1] == spec.regimes[0].lags[1]);
  CHECK(spec.regimes[0].sigma == equicorrelation(3, 0.5));
  CHECK(spec.regime_of(300) == 0);
  CHECK(spec.regime_of(301) == 1);
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("slowvarying vma/lag-one diagonal at t = 0") {
  const ProcessSpec spec = slowvarying_vma_spec();
  const auto lags = spec.lags(0);
  CHECK_THAT(lags[0](0, 0), WithinAbs(1.122, 1e-15));
  CHECK_THAT(lags[0](1, 1), WithinAbs(-0.876282, 1e-12));
  CHECK(lags[0](0, 1) == -1.0);
  CHECK(lags[0](1, 0) == -1.0);
  CHECK(lags[1](1, 1) == -1.2);
  CHECK(spec.sigma(10)(0, 1) == 0.2);
  const double t = 700.0;
  CHECK_THAT(spec.lags(700)[0](0, 0),
             WithinAbs(1.122 * (1 - 1.781 * std::sin(std::numbers::pi * t / 2048)), 1e-14));
}

TEST_CASE("piecewise var/regimes and scaling") {
  const ProcessSpec full = piecewise_var_spec();
  CHECK(full.length == 12000);
  CHECK(full.ends == std::vector<int>{400, 5000, 10000, 12000});
  const ProcessSpec half = piecewise_var_spec(0.5);
  CHECK(half.length == 6000);
  CHECK(half.ends == std::vector<int>{200, 2500, 5000, 6000});
  CHECK(full.regimes[3].lags[0](0, 0) == 1.32);
  CHECK(full.regimes[3].lags[1](0, 0) == -0.81);
  CHECK(full.regimes[1].sigma(0, 1) == 0.5);
  CHECK(full.regimes[2].sigma(0, 1) == 0.8);

  // roots of 1 - 1.32 z + 0.81 z^2 are a complex pair outside the unit circle
  const std::complex<double> disc = std::sqrt(std::complex<double>(1.32 * 1.32 - 4 * 0.81));
  const std::complex<double> root = (1.32 + disc) / (2 * 0.81);
  CHECK(root.imag() != 0.0);
  CHECK_THAT(std::norm(root), WithinRel(1.0 / 0.81, 1e-12));
  CHECK(std::abs(root) > 1.0);

  Rng rng(1);
  CHECK_THROWS_AS(gen_piecewise_var(rng, 0.1, 60), InvalidArgument);
  CHECK_THROWS_AS(piecewise_var_spec(0.0), InvalidArgument);
  CHECK_THROWS_AS(process_by_name("nope", 0, 1.0), InvalidArgument);
}

TEST_CASE("process/validation") {
  ProcessSpec spec = single_regime(ProcessSpec::Kind::kVma, 2, {}, equicorrelation(2, 0.3));
  CHECK_NOTHROW(spec.validate());
  ProcessSpec bad = spec;
  bad.ends = {50};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = spec;
  bad.regimes[0].sigma = equicorrelation(2, 1.5);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = spec;
  bad.regimes[0].lags = {Eigen::MatrixXd::Zero(3, 3)};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = piecewise_vma_spec();
  bad.ends = {400, 300};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("true spectrum/closed forms") {
  const Eigen::MatrixXd sigma = equicorrelation(2, 0.4);
  const ProcessSpec white = single_regime(ProcessSpec::Kind::kVma, 2, {Eigen::MatrixXd::Zero(2, 2)}, sigma);
  const ProcessSpec white_ar = single_regime(ProcessSpec::Kind::kVar, 2, {Eigen::MatrixXd::Zero(2, 2)}, sigma);
  for (double w : {0.0, 0.13, 0.5}) {
    CHECK((true_spectrum(white, 0.5, w) - sigma.cast<std::complex<double>>()).norm() < 1e-15);
    CHECK((true_spectrum(white_ar, 0.5, w) - sigma.cast<std::complex<double>>()).norm() < 1e-15);
  }
  const double theta = 0.7;
  const double s2 = 2.5;
  const ProcessSpec ma1 = single_regime(ProcessSpec::Kind::kVma, 1, {scalar(theta)}, scalar(s2));
  const ProcessSpec ar1 = single_regime(ProcessSpec::Kind::kVar, 1, {scalar(theta)}, scalar(s2));
  for (double w = 0.0; w <= 0.5; w += 0.05) {
    const std::complex<double> z = std::polar(1.0, -2.0 * std::numbers::pi * w);
    CHECK_THAT(true_spectrum(ma1, 0.3, w)(0, 0).real(), WithinRel(std::norm(1.0 + theta * z) * s2, 1e-13));
    CHECK_THAT(true_spectrum(ar1, 0.3, w)(0, 0).real(), WithinRel(s2 / std::norm(1.0 - theta * z), 1e-13));
  }
  const ProcessSpec unit_root = single_regime(ProcessSpec::Kind::kVar, 1, {scalar(1.0)}, scalar(1.0));
  CHECK_THROWS_AS(true_spectrum(unit_root, 0.5, 0.0), InvalidState);
}

TEST_CASE("true spectrum/Hermitian positive definite for all generators") {
  const auto fg = uniform_freq_grid(51);
  for (const ProcessSpec& spec : {piecewise_vma_spec(), slowvarying_vma_spec(), piecewise_var_spec(0.5)}) {
    const SpectrumGrid g = true_spectrum_grid(spec, uniform_time_grid(60), fg);
    for (const auto& f : g.values) {
      CHECK((f - f.adjoint()).norm() < 1e-12 * f.norm());
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(f);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("true spectrum/slowly varying coherence is continuous in time") {
  const ProcessSpec spec = slowvarying_vma_spec();
  const ScalarGrid rho = functional_grid(
      true_spectrum_grid(spec, uniform_time_grid(spec.length), uniform_freq_grid(51)),
      Functional::coherence(1, 0));
  const double jump = (rho.values.bottomRows(spec.length - 1) - rho.values.topRows(spec.length - 1))
                          .cwiseAbs()
                          .maxCoeff();
  CHECK(jump < 0.05);
  // the piecewise process does jump at its boundary
  const ProcessSpec piece = piecewise_vma_spec();
  const ScalarGrid rho_p = functional_grid(
      true_spectrum_grid(piece, {300.0 / 600, 301.0 / 600}, uniform_freq_grid(51)),
      Functional::coherence(1, 0));
  CHECK((rho_p.values.row(1) - rho_p.values.row(0)).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("generators/finite and reproducible from seed") {
  for (const std::string name : {"piecewise_vma", "slowvarying_vma", "piecewise_var"}) {
    const ProcessSpec spec = process_by_name(name, 0, 0.5);
    Rng a(42);
    Rng b(42);
    Rng c(43);
    const MultivariateSeries xa = simulate(spec, a);
    const MultivariateSeries xb = simulate(spec, b);
    const MultivariateSeries xc = simulate(spec, c);
    CHECK(xa.length() == spec.length);
    CHECK(xa.dim() == spec.dim);
    CHECK(xa.values().allFinite());
    CHECK(xa.values() == xb.values());
    CHECK(xa.values() != xc.values());
  }
}

TEST_CASE("piecewise vma/autocovariance cuts off after lag two") {
  Rng rng(5);
  const MultivariateSeries x = gen_piecewise_vma(rng);
  for (int half = 0; half < 2; ++half) {
    const Eigen::MatrixXd seg = x.values().middleRows(300 * half, 300);
    const Eigen::RowVectorXd mean = seg.colwise().mean();
    const Eigen::MatrixXd c = seg.rowwise() - mean;
    for (int lag = 3; lag <= 6; ++lag) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const double acov = c.col(j).head(300 - lag).dot(c.col(k).tail(300 - lag)) / 300.0;
          const double sd = std::sqrt(c.col(j).squaredNorm() * c.col(k).squaredNorm()) / 300.0;
          CHECK(std::abs(acov / sd) < 4.0 / std::sqrt(300.0));
        }
      }
    }
  }
}

TEST_CASE("piecewise vma/channel variance integrates the true spectrum") {
  const ProcessSpec spec = piecewise_vma_spec();
  Rng rng(6);
  const int reps = 400;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(2, 3);
  for (int r = 0; r < reps; ++r) {
    const MultivariateSeries x = simulate(spec, rng);
    for (int half = 0; half < 2; ++half) {
      var.row(half) += x.values().middleRows(300 * half, 300).colwise().squaredNorm() / 300.0;
    }
  }
  var /= reps;
  const int grid = 2000;
  for (int half = 0; half < 2; ++half) {
    const double u = half == 0 ? 0.25 : 0.75;
    Eigen::Vector3d integral = Eigen::Vector3d::Zero();
    // f is even in w: integral over (-1/2, 1/2] is twice the midpoint sum on (0, 1/2)
    for (int i = 0; i < grid; ++i) {
      const double w = 0.5 * (i + 0.5) / grid;
      integral += 2.0 * true_spectrum(spec, u, w).diagonal().real() * (0.5 / grid);
    }
    for (int j = 0; j < 3; ++j) {
      // standard error of a mean of reps * 300 correlated squares, generously bounded
      CHECK_THAT(var(half, j), WithinRel(integral(j), 0.03));
    }
  }
}

TEST_CASE("piecewise vma/periodogram converges to the true spectrum") {
  const ProcessSpec spec = piecewise_vma_spec();
  const Eigen::MatrixXd p = mean_periodogram(spec, 1000, 0, 300, 7);
  const auto fg = uniform_freq_grid(51);
  int checked = 0;
  for (double w : fg) {
    const int l = static_cast<int>(std::lround(w * 300));
    if (l < 3 || l > 146) continue;
    // average of five neighbouring Fourier frequencies
    const Eigen::RowVectorXd local = p.middleRows(l - 3, 5).colwise().mean();
    Eigen::Vector3d truth = Eigen::Vector3d::Zero();
    for (int d = -2; d <= 2; ++d) truth += true_spectrum(spec, 0.25, (l + d) / 300.0).diagonal().real() / 5.0;
    for (int j = 0; j < 3; ++j) {
      CHECK_THAT(local(j), WithinRel(truth(j), 0.10));
      ++checked;
    }
  }
  CHECK(checked >= 140);

  // single cell of the first half against the oracle periodogram
  const int l = 30;
  const double f11 = true_spectrum(spec, 0.25, l / 300.0)(0, 0).real();
  CHECK_THAT(p(l - 1, 0), WithinRel(f11, 0.15));
}

TEST_CASE("piecewise var/regime four resonance") {
  const ProcessSpec full = piecewise_var_spec();
  ProcessSpec spec = single_regime(ProcessSpec::Kind::kVar, 2, full.regimes[3].lags, full.regimes[3].sigma, 2048);
  const double root_freq =
      std::atan2(std::sqrt(4 * 0.81 - 1.32 * 1.32), 1.32) / (2.0 * std::numbers::pi);
  double best_w = 0.0;
  double best = 0.0;
  for (int i = 0; i <= 5000; ++i) {
    const double w = 0.5 * i / 5000;
    const double f = true_spectrum(spec, 0.5, w)(0, 0).real();
    if (f > best) {
      best = f;
      best_w = w;
    }
  }
  CHECK(std::abs(best_w - root_freq) < 0.005);

  const Eigen::MatrixXd p = mean_periodogram(spec, 24, 0, 2048, 8);
  int peak = 0;
  double peak_value = 0.0;
  for (int l = 3; l + 3 < p.rows(); ++l) {
    const double smooth = p.col(0).segment(l - 3, 7).mean();
    if (smooth > peak_value) {
      peak_value = smooth;
      peak = l;
    }
  }
  CHECK(std::abs(peak / 2048.0 - best_w) < 0.005);
}
