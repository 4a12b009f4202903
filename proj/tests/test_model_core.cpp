#include "oracles.hpp"

#include "tvspec/error.hpp"
#include "tvspec/model.hpp"
#include "tvspec/types.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace tvspec;
using Catch::Matchers::WithinAbs;

TEST_CASE("basis/rows at simple frequencies") {
  const std::vector<double> zero{0.0};
  const Eigen::MatrixXd even = basis_matrix(zero, 5, BasisKind::kEven);
  const Eigen::MatrixXd odd = basis_matrix(zero, 5, BasisKind::kOdd);
  CHECK(even.rows() == 1);
  CHECK(even.cols() == 5);
  CHECK(odd.cols() == 5);
  for (int s = 0; s < 5; ++s) {
    CHECK(even(0, s) == 1.0);
    CHECK(odd(0, s) == 0.0);
  }

  const std::vector<double> quarter{0.25};
  const Eigen::MatrixXd e3 = basis_matrix(quarter, 3, BasisKind::kEven);
  CHECK_THAT(e3(0, 0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(e3(0, 1), WithinAbs(0.0, 1e-15));
  CHECK_THAT(e3(0, 2), WithinAbs(-1.0, 1e-15));

  const Eigen::MatrixXd o3 = basis_matrix(quarter, 3, BasisKind::kOdd);
  CHECK_THAT(o3(0, 0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(o3(0, 1), WithinAbs(0.0, 1e-15));
  CHECK_THAT(o3(0, 2), WithinAbs(-1.0, 1e-15));
}

TEST_CASE("basis/invalid arguments") {
  const std::vector<double> none;
  const std::vector<double> one{0.1};
  CHECK_THROWS_AS(basis_matrix(none, 4, BasisKind::kEven), InvalidArgument);
  CHECK_THROWS_AS(basis_matrix(one, 1, BasisKind::kOdd), InvalidArgument);
}

TEST_CASE("layout/canonical component order") {
  const ComponentLayout two(2);
  REQUIRE(two.size() == 4);
  CHECK(two.log_psi(0) == 0);
  CHECK(two.log_psi(1) == 1);
  CHECK(two.re_theta(1, 0) == 2);
  CHECK(two.im_theta(1, 0) == 3);
  CHECK(two[3].kind == ComponentKind::kImTheta);
  CHECK_FALSE(two[3].is_even());
  CHECK(two[2].is_even());
  CHECK(two[0].name() == "logpsi_11");
  CHECK(two[2].name() == "retheta_21");

  const ComponentLayout three(3);
  REQUIRE(three.size() == 9);
  CHECK(three.re_theta(1, 0) == 3);
  CHECK(three.re_theta(2, 0) == 4);
  CHECK(three.re_theta(2, 1) == 5);
  CHECK(three.im_theta(1, 0) == 6);
  CHECK(three.im_theta(2, 1) == 8);
  for (int c = 0; c < three.size(); ++c) CHECK(three.index_of(three[c]) == c);
}

TEST_CASE("cholesky/zero coefficients give identity") {
  const ComponentLayout layout(3);
  const Eigen::MatrixXd local = Eigen::MatrixXd::Zero(6, layout.size());
  const std::vector<double> freqs{0.0, 0.1, 0.37, 0.5};
  for (const auto& pair : reconstruct_cholesky(layout, local, freqs)) {
    CHECK(pair.theta.isApprox(Eigen::MatrixXcd::Identity(3, 3)));
    CHECK(pair.psi.isApprox(Eigen::VectorXd::Ones(3)));
  }
}

TEST_CASE("cholesky/intercept only gives constant psi") {
  const ComponentLayout layout(2);
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(5, layout.size());
  local(0, layout.log_psi(0)) = std::log(2.0);
  const std::vector<double> freqs{0.0, 0.2, 0.45};
  for (const auto& pair : reconstruct_cholesky(layout, local, freqs)) {
    CHECK_THAT(pair.psi(0), WithinAbs(2.0, 1e-14));
    CHECK_THAT(pair.psi(1), WithinAbs(1.0, 1e-14));
  }
}

TEST_CASE("cholesky/inverse identity against dense oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const ComponentLayout layout(n);
    const Eigen::MatrixXd local = oracle::gaussian_matrix(rng, 6, layout.size(), 0.4);
    std::uniform_real_distribution<double> w(0.0, 0.5);
    const std::vector<double> freqs{w(rng), w(rng)};
    const auto pairs = reconstruct_cholesky(layout, local, freqs);
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      const Eigen::MatrixXcd f = spectrum_from_cholesky(pairs[i]);
      const Eigen::MatrixXcd f_inv = pairs[i].theta *
                                     pairs[i].psi.cwiseInverse().cast<cdouble>().asDiagonal() *
                                     pairs[i].theta.adjoint();
      CHECK((f.inverse() - f_inv).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + f_inv.norm()));
      CHECK((f - oracle::spectrum(layout, local, freqs[i])).norm() < 1e-10 * f.norm());
    }
  }
}

TEST_CASE("cholesky/non-finite coefficients rejected") {
  const ComponentLayout layout(2);
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(4, layout.size());
  local(1, 2) = std::nan("");
  const std::vector<double> freqs{0.1};
  CHECK_THROWS_AS(reconstruct_cholesky(layout, local, freqs), InvalidState);
}

TEST_CASE("spectrum/diagonal cases") {
  CholeskyPair pair{Eigen::MatrixXcd::Identity(2, 2), Eigen::VectorXd::Ones(2)};
  CHECK(spectrum_from_cholesky(pair).isApprox(Eigen::MatrixXcd::Identity(2, 2)));
  pair.psi << 3.0, 0.5;
  const Eigen::MatrixXcd f = spectrum_from_cholesky(pair);
  CHECK_THAT(f(0, 0).real(), WithinAbs(3.0, 1e-15));
  CHECK_THAT(f(1, 1).real(), WithinAbs(0.5, 1e-15));
  CHECK(std::abs(f(1, 0)) == 0.0);
  pair.psi(1) = 0.0;
  CHECK_THROWS_AS(spectrum_from_cholesky(pair), InvalidState);
}

TEST_CASE("spectrum/random pairs are Hermitian positive definite") {
  std::mt19937_64 rng(11);
  const ComponentLayout layout(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd local = oracle::gaussian_matrix(rng, 8, layout.size(), 0.8);
    const std::vector<double> freqs{0.05 + 0.009 * trial};
    const Eigen::MatrixXcd f = spectrum_from_cholesky(reconstruct_cholesky(layout, local, freqs)[0]);
    CHECK((f - f.adjoint()).norm() < 1e-12 * f.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(f);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("coherence/simple values and bounds") {
  Eigen::MatrixXcd diag = Eigen::MatrixXcd::Zero(2, 2);
  diag(0, 0) = 2.0;
  diag(1, 1) = 5.0;
  CHECK(coherence(diag, 1, 0) == 0.0);

  Eigen::MatrixXcd f(2, 2);
  f << 1.0, 0.5, 0.5, 1.0;
  CHECK_THAT(coherence(f, 1, 0), WithinAbs(0.25, 1e-15));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd re = oracle::gaussian_matrix(rng, 3, 3);
    const Eigen::MatrixXd im = oracle::gaussian_matrix(rng, 3, 3);
    Eigen::MatrixXcd b(3, 3);
    b.real() = re;
    b.imag() = im;
    const Eigen::MatrixXcd pd = b * b.adjoint() + 1e-3 * Eigen::MatrixXcd::Identity(3, 3);
    for (int j = 1; j < 3; ++j) {
      for (int k = 0; k < j; ++k) {
        const double rho = coherence(pd, j, k);
        CHECK(rho >= 0.0);
        CHECK(rho < 1.0);
      }
    }
  }
}

TEST_CASE("runs/single segment and full change-sets") {
  const int c = 4;
  const ComponentRunMap one = component_runs(Partition::single(300), c);
  for (int k = 0; k < c; ++k) {
    REQUIRE(one.runs[k].size() == 1);
    CHECK(one.runs[k][0] == Run{0, 0});
  }
  Partition two{{0, 150, 300}, {full_change_set(c)}};
  const ComponentRunMap split = component_runs(two, c);
  for (int k = 0; k < c; ++k) {
    REQUIRE(split.runs[k].size() == 2);
    CHECK(split.runs[k][0] == Run{0, 0});
    CHECK(split.runs[k][1] == Run{1, 1});
  }
}

TEST_CASE("runs/exhaustive change-sets match scan oracle") {
  const int c = 4;  // N = 2
  for (int m = 2; m <= 4; ++m) {
    Partition p;
    for (int q = 0; q <= m; ++q) p.breaks.push_back(100 * q);
    p.phi.assign(m - 1, 1);
    long cases = 0;
    // every tuple of non-empty subsets of the 4 components
    std::vector<int> digits(m - 1, 1);
    for (;;) {
      for (int i = 0; i < m - 1; ++i) p.phi[i] = static_cast<ChangeSet>(digits[i]);
      const ComponentRunMap map = component_runs(p, c);
      const auto labels = oracle::run_labels(p, c);
      for (int k = 0; k < c; ++k) {
        CHECK(static_cast<int>(map.runs[k].size()) == labels[k].back() + 1);
        for (int q = 0; q < m; ++q) CHECK(map.run_of(k, q) == labels[k][q]);
      }
      CHECK(change_sets_from_runs(map, m) == p.phi);
      ++cases;
      int i = 0;
      while (i < m - 1 && ++digits[i] > 15) digits[i++] = 1;
      if (i == m - 1) break;
    }
    CHECK(cases == static_cast<long>(std::pow(15, m - 1)));
  }
}

TEST_CASE("partition/accessors and validation") {
  Partition p{{0, 200, 450, 600}, {1, 3}};
  CHECK(p.segments() == 3);
  CHECK(p.length() == 600);
  CHECK(p.segment_length(1) == 250);
  CHECK(p.segment_of(1) == 0);
  CHECK(p.segment_of(200) == 0);
  CHECK(p.segment_of(201) == 1);
  CHECK(p.segment_of(600) == 2);
  CHECK_THAT(p.midpoint(0), WithinAbs(100.0 / 600.0, 1e-15));
  CHECK_NOTHROW(p.validate(60, 4, 5));
  CHECK_THROWS_AS(p.validate(210, 4, 5), InvalidPartition);
  CHECK_THROWS_AS(p.validate(60, 4, 2), InvalidPartition);
  Partition empty_phi{{0, 300, 600}, {0}};
  CHECK_THROWS_AS(empty_phi.validate(60, 4, 5), InvalidPartition);
  Partition outside{{0, 300, 600}, {1U << 4}};
  CHECK_THROWS_AS(outside.validate(60, 4, 5), InvalidPartition);
  Partition mismatch{{0, 300, 600}, {}};
  CHECK_THROWS_AS(mismatch.validate(60, 4, 5), InvalidPartition);
}

TEST_CASE("model/log psi clamp counts events") {
  long events = 0;
  CHECK(clamp_log_psi(3.0, &events) == 3.0);
  CHECK(events == 0);
  CHECK(clamp_log_psi(75.0, &events) == kLogPsiClamp);
  CHECK(clamp_log_psi(-80.0, &events) == -kLogPsiClamp);
  CHECK(events == 2);
}

TEST_CASE("series/minimum length") {
  const MultivariateSeries series(Eigen::MatrixXd::Zero(100, 2));
  CHECK(series.length() == 100);
  CHECK(series.dim() == 2);
  CHECK_NOTHROW(series.require_min_length(50));
  CHECK_THROWS_AS(series.require_min_length(51), InvalidArgument);
}

TEST_CASE("coefficients/local columns follow runs") {
  Partition p{{0, 100, 200, 300}, {0b01, 0b10}};
  const ComponentRunMap map = component_runs(p, 4);
  SegmentCoefficients coeffs = SegmentCoefficients::zeros(map, 3);
  for (int c = 0; c < 4; ++c)
    for (std::size_t r = 0; r < coeffs.runs[c].size(); ++r)
      coeffs.runs[c][r].coef.setConstant(10.0 * c + static_cast<double>(r));
  CHECK(coeffs.parameter_count() == 3 * (2 + 2 + 1 + 1));
  const Eigen::MatrixXd l2 = coeffs.local(2);
  CHECK(l2(0, 0) == 1.0);
  CHECK(l2(0, 1) == 11.0);
  CHECK(l2(0, 2) == 20.0);
  CHECK(coeffs.run_map() == map);
}
