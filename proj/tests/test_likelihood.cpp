#include "oracles.hpp"

#include "tvspec/dft.hpp"
#include "tvspec/error.hpp"
#include "tvspec/model.hpp"
#include "tvspec/whittle.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

using namespace tvspec;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

using oracle::random_coeffs;
using oracle::relative_error;

TEST_CASE("dft/fft path matches direct summation") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 700, 3);
  const MultivariateSeries series(x);
  for (int n : {100, 128, 301}) {
    for (int start : {0, 37}) {
      const SegmentDft got = segment_dft(series, start, start + n);
      const Eigen::MatrixXcd want = oracle::dft(x, start, start + n);
      REQUIRE(got.count == (n - 1) / 2);
      REQUIRE(got.y.rows() == want.rows());
      CHECK((got.y - want).cwiseAbs().maxCoeff() < 1e-10);
      CHECK_THAT(got.freqs.front(), WithinAbs(1.0 / n, 1e-15));
      CHECK_THAT(got.freqs.back(), WithinAbs(static_cast<double>(got.count) / n, 1e-15));
    }
  }
}

TEST_CASE("dft/short segments use the direct sum") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 40, 2);
  const MultivariateSeries series(x);
  for (int n : {5, 9, 15}) {
    const SegmentDft a = segment_dft(series, 3, 3 + n);
    const SegmentDft b = naive_segment_dft(series, 3, 3 + n);
    CHECK((a.y - oracle::dft(x, 3, 3 + n)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dft/constant series transforms to zero") {
  const MultivariateSeries series(Eigen::MatrixXd::Constant(256, 2, 4.5));
  const SegmentDft d = segment_dft(series, 0, 256);
  CHECK(d.y.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dft/cosine at a Fourier frequency concentrates energy") {
  const int n = 128;
  const int l0 = 9;
  const int start = 50;
  Eigen::MatrixXd x(start + n, 1);
  for (int t = 1; t <= start + n; ++t) x(t - 1, 0) = std::cos(2.0 * std::numbers::pi * t * l0 / n);
  const SegmentDft d = segment_dft(MultivariateSeries(x), start, start + n);
  for (int l = 1; l <= d.count; ++l) {
    const double power = std::norm(d.y(l - 1, 0));
    if (l == l0) {
      CHECK_THAT(power, WithinRel(n / 4.0, 1e-10));
    } else {
      CHECK(power < 1e-18 * n);
    }
  }
}

TEST_CASE("dft/local transforms and cache") {
  std::mt19937_64 rng(8);
  const MultivariateSeries series(oracle::gaussian_matrix(rng, 300, 2));
  const Partition p{{0, 120, 300}, {3}};
  const LocalDftSet set = local_dft(series, p);
  REQUIRE(set.segments.size() == 2);
  CHECK(set.segments[1]->start == 120);
  CHECK(set.segments[1]->n == 180);
  CHECK(set.segments[1]->count == 89);

  DftCache cache(series, 4);
  const auto a = cache.get(0, 120);
  CHECK(cache.get(0, 120) == a);
  CHECK(cache.size() == 1);
  const LocalDftSet cached = cache.for_partition(p);
  CHECK(cached.segments[0] == a);
  CHECK((cached.segments[1]->y - set.segments[1]->y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("whittle/unit spectrum reduces to periodogram sum") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 400, 1);
  const MultivariateSeries series(x);
  const Partition p{{0, 170, 400}, {1}};
  const SegmentCoefficients zero = SegmentCoefficients::zeros(component_runs(p, 1), 6);
  double want = 0.0;
  for (int q = 0; q < 2; ++q) want -= oracle::dft(x, p.breaks[q], p.breaks[q + 1]).cwiseAbs2().sum();
  CHECK_THAT(whittle_loglik(local_dft(series, p), zero, p), WithinRel(want, 1e-12));
}

TEST_CASE("whittle/cholesky shortcut matches dense inverse") {
  std::mt19937_64 rng(10);
  const auto started = std::chrono::steady_clock::now();
  int checked = 0;
  for (int n = 1; n <= 3; ++n) {
    const int comps = n * n;
    for (int m = 1; m <= 3; ++m) {
      for (int rep = 0; rep < 12; ++rep) {
        const int length = 240;
        const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, length, n);
        const MultivariateSeries series(x);
        const Partition p = oracle::random_partition(rng, length, m, 40, comps);
        const SegmentCoefficients coeffs = random_coeffs(rng, p, comps, 5, 0.3);
        const double got = whittle_loglik(local_dft(series, p), coeffs, p);
        const double want = oracle::whittle(x, p, coeffs);
        CHECK(std::abs(got - want) < 1e-8 * std::abs(want));
        ++checked;
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  CHECK(checked == 108);
  CHECK(secs < 1.0);
}

TEST_CASE("whittle/doubling psi shifts log det and halves the quadratic") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 300, 2);
  const MultivariateSeries series(x);
  const Partition p{{0, 140, 300}, {0b1011}};
  SegmentCoefficients coeffs = random_coeffs(rng, p, 4, 6, 0.3);
  double quad = 0.0;
  const double base = oracle::whittle(x, p, coeffs, &quad);
  for (int j = 0; j < 2; ++j)
    for (auto& rc : coeffs.runs[j]) rc.coef(0) += std::log(2.0);
  const double total_l = fourier_count(140) + fourier_count(160);
  const double want = base - total_l * 2 * std::log(2.0) + 0.5 * quad;
  CHECK_THAT(whittle_loglik(local_dft(series, p), coeffs, p), WithinRel(want, 1e-10));
}

TEST_CASE("whittle/clamped log psi stays finite") {
  std::mt19937_64 rng(13);
  const MultivariateSeries series(oracle::gaussian_matrix(rng, 200, 1));
  const Partition p = Partition::single(200);
  SegmentCoefficients coeffs = SegmentCoefficients::zeros(component_runs(p, 1), 4);
  coeffs.runs[0][0].coef(0) = 400.0;
  const double ll = whittle_loglik(local_dft(series, p), coeffs, p);
  CHECK(std::isfinite(ll));
  CHECK(ll < -50.0 * fourier_count(200) + 1.0);
}

TEST_CASE("whittle/non-finite terms and bad runs rejected") {
  std::mt19937_64 rng(14);
  const MultivariateSeries series(oracle::gaussian_matrix(rng, 200, 2));
  const Partition p{{0, 100, 200}, {15}};
  SegmentCoefficients coeffs = SegmentCoefficients::zeros(component_runs(p, 4), 4);
  coeffs.runs[2][1].coef(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(whittle_loglik(local_dft(series, p), coeffs, p), InvalidState);

  const SegmentCoefficients single =
      SegmentCoefficients::zeros(component_runs(Partition::single(200), 4), 4);
  CHECK_THROWS_AS(whittle_loglik(local_dft(series, p), single, p), InvalidArgument);
}

TEST_CASE("gradient/matches central differences") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const int comps = n * n;
    const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 260, n);
    const MultivariateSeries series(x);
    const Partition p = oracle::random_partition(rng, 260, 1 + trial % 3, 60, comps);
    SegmentCoefficients coeffs = random_coeffs(rng, p, comps, 5, 0.3);
    const LocalDftSet dfts = local_dft(series, p);
    const Eigen::VectorXd grad = whittle_grad(dfts, coeffs, p);
    Eigen::VectorXd flat = flatten(coeffs);
    REQUIRE(grad.size() == flat.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      SegmentCoefficients plus = coeffs;
      SegmentCoefficients minus = coeffs;
      Eigen::VectorXd fp = flat;
      Eigen::VectorXd fm = flat;
      fp(i) += h;
      fm(i) -= h;
      unflatten(fp, plus);
      unflatten(fm, minus);
      const double fd = (whittle_loglik(dfts, plus, p) - whittle_loglik(dfts, minus, p)) / (2 * h);
      CHECK(relative_error(grad(i), fd) < 1e-5);
    }
  }
}

TEST_CASE("gradient/intercepts at the zero point") {
  std::mt19937_64 rng(16);
  const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 301, 2);
  const MultivariateSeries series(x);
  const Partition p = Partition::single(301);
  const SegmentCoefficients zero = SegmentCoefficients::zeros(component_runs(p, 4), 5);
  const Eigen::VectorXd grad = whittle_grad(local_dft(series, p), zero, p);
  const Eigen::MatrixXcd y = oracle::dft(x, 0, 301);
  const auto offsets = coefficient_offsets(zero);
  for (int j = 0; j < 2; ++j) {
    const double want = (y.col(j).cwiseAbs2().array() - 1.0).sum();
    CHECK_THAT(grad(offsets[j][0]), WithinRel(want, 1e-10));
  }
}

TEST_CASE("gradient/shared run sums per-segment gradients") {
  std::mt19937_64 rng(17);
  const MultivariateSeries series(oracle::gaussian_matrix(rng, 300, 2));
  const Partition shared{{0, 130, 300}, {0b0001}};  // only log psi_11 changes
  const Partition split{{0, 130, 300}, {0b1111}};
  SegmentCoefficients a = random_coeffs(rng, shared, 4, 5, 0.3);
  SegmentCoefficients b = SegmentCoefficients::zeros(component_runs(split, 4), 5);
  for (int c = 0; c < 4; ++c)
    for (int q = 0; q < 2; ++q) b.runs[c][q].coef = a.coef_for(c, q);
  const Eigen::VectorXd ga = whittle_grad(local_dft(series, shared), a, shared);
  const Eigen::VectorXd gb = whittle_grad(local_dft(series, split), b, split);
  const auto oa = coefficient_offsets(a);
  const auto ob = coefficient_offsets(b);
  for (int c = 1; c < 4; ++c) {
    const Eigen::VectorXd sum = gb.segment(ob[c][0], 5) + gb.segment(ob[c][1], 5);
    CHECK((ga.segment(oa[c][0], 5) - sum).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + sum.norm()));
  }
  CHECK_THAT(whittle_loglik(local_dft(series, shared), a, shared),
             WithinRel(whittle_loglik(local_dft(series, split), b, split), 1e-13));
}

TEST_CASE("coefficients/flatten round trip") {
  std::mt19937_64 rng(18);
  const Partition p{{0, 100, 200, 300}, {0b0110, 0b1001}};
  const SegmentCoefficients coeffs = random_coeffs(rng, p, 4, 4, 1.0);
  const Eigen::VectorXd flat = flatten(coeffs);
  CHECK(flat.size() == coeffs.parameter_count());
  SegmentCoefficients copy = SegmentCoefficients::zeros(coeffs.run_map(), 4);
  unflatten(flat, copy);
  for (int c = 0; c < 4; ++c)
    for (std::size_t r = 0; r < coeffs.runs[c].size(); ++r)
      CHECK(copy.runs[c][r].coef == coeffs.runs[c][r].coef);
  const auto offsets = coefficient_offsets(coeffs);
  CHECK(offsets[1][1] == 3 * 4);
  CHECK_THROWS_AS(unflatten(Eigen::VectorXd::Zero(3), copy), InvalidArgument);
}
