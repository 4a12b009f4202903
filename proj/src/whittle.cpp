#include "tvspec/whittle.hpp"

#include "tvspec/error.hpp"
#include "tvspec/model.hpp"

#include <cmath>
#include <sstream>

namespace tvspec {
namespace {

int dim_for(int n_components) {
  int n = 1;
  while (n * n < n_components) ++n;
  if (n * n != n_components) throw InvalidArgument("component count is not a square");
  return n;
}

void check_cover(const LocalDftSet& dfts, const SegmentCoefficients& coeffs,
                 const Partition& partition) {
  if (static_cast<int>(dfts.segments.size()) != partition.segments()) {
    throw InvalidArgument("DFT set does not match partition");
  }
  for (const auto& list : coeffs.runs) {
    if (list.empty() || list.front().run.first != 0 ||
        list.back().run.last != partition.segments() - 1) {
      throw InvalidArgument("coefficient runs do not cover the partition");
    }
  }
}

struct SegmentCurves {
  Eigen::MatrixXd even;  // L x N^2, even-basis evaluations
  Eigen::MatrixXd odd;   // L x N^2, odd-basis evaluations
};

SegmentCurves evaluate_curves(const SegmentDft& dft, const Eigen::MatrixXd& local) {
  const int basis_size = static_cast<int>(local.rows());
  SegmentCurves out;
  out.even = basis_matrix(dft.freqs, basis_size, BasisKind::kEven) * local;
  out.odd = basis_matrix(dft.freqs, basis_size, BasisKind::kOdd) * local;
  return out;
}

[[noreturn]] void non_finite(int q, int l) {
  std::ostringstream msg;
  msg << "non-finite Whittle term at segment " << q + 1 << ", frequency index " << l;
  throw InvalidState(msg.str());
}

double segment_loglik_impl(const SegmentDft& dft, const ComponentLayout& layout,
                           const Eigen::MatrixXd& local, int q) {
  const int n = layout.dim();
  const SegmentCurves curves = evaluate_curves(dft, local);
  double total = 0.0;
  Eigen::VectorXcd w(n);
  for (int l = 0; l < dft.count; ++l) {
    double term = 0.0;
    for (int k = 0; k < n; ++k) {
      cdouble wk = dft.y(l, k);
      for (int j = k + 1; j < n; ++j) {
        const cdouble theta(curves.even(l, layout.re_theta(j, k)),
                            curves.odd(l, layout.im_theta(j, k)));
        wk += std::conj(theta) * dft.y(l, j);
      }
      const double g = clamp_log_psi(curves.even(l, layout.log_psi(k)));
      term += g + std::norm(wk) * std::exp(-g);
    }
    if (!std::isfinite(term)) non_finite(q, l + 1);
    total -= term;
  }
  return total;
}

}  // namespace

double segment_whittle_loglik(const SegmentDft& dft, const ComponentLayout& layout,
                              const Eigen::MatrixXd& local) {
  return segment_loglik_impl(dft, layout, local, 0);
}

double whittle_loglik(const LocalDftSet& dfts, const SegmentCoefficients& coeffs,
                      const Partition& partition) {
  check_cover(dfts, coeffs, partition);
  const ComponentLayout layout(dim_for(static_cast<int>(coeffs.runs.size())));
  double total = 0.0;
  for (int q = 0; q < partition.segments(); ++q) {
    total += segment_loglik_impl(*dfts.segments[q], layout, coeffs.local(q), q);
  }
  return total;
}

std::vector<std::vector<int>> coefficient_offsets(const SegmentCoefficients& coeffs) {
  std::vector<std::vector<int>> offsets(coeffs.runs.size());
  int pos = 0;
  for (std::size_t c = 0; c < coeffs.runs.size(); ++c) {
    for (std::size_t r = 0; r < coeffs.runs[c].size(); ++r) {
      offsets[c].push_back(pos);
      pos += coeffs.basis_size;
    }
  }
  return offsets;
}

Eigen::VectorXd flatten(const SegmentCoefficients& coeffs) {
  Eigen::VectorXd flat(coeffs.parameter_count());
  int pos = 0;
  for (const auto& list : coeffs.runs) {
    for (const auto& rc : list) {
      flat.segment(pos, coeffs.basis_size) = rc.coef;
      pos += coeffs.basis_size;
    }
  }
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, SegmentCoefficients& coeffs) {
  if (flat.size() != coeffs.parameter_count()) {
    throw InvalidArgument("flat coefficient vector has wrong length");
  }
  int pos = 0;
  for (auto& list : coeffs.runs) {
    for (auto& rc : list) {
      rc.coef = flat.segment(pos, coeffs.basis_size);
      pos += coeffs.basis_size;
    }
  }
}

Eigen::VectorXd whittle_grad(const LocalDftSet& dfts, const SegmentCoefficients& coeffs,
                             const Partition& partition) {
  check_cover(dfts, coeffs, partition);
  const ComponentLayout layout(dim_for(static_cast<int>(coeffs.runs.size())));
  const int n = layout.dim();
  const int basis_size = coeffs.basis_size;
  const auto offsets = coefficient_offsets(coeffs);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(coeffs.parameter_count());

  for (int q = 0; q < partition.segments(); ++q) {
    const SegmentDft& dft = *dfts.segments[q];
    const Eigen::MatrixXd even = basis_matrix(dft.freqs, basis_size, BasisKind::kEven);
    const Eigen::MatrixXd odd = basis_matrix(dft.freqs, basis_size, BasisKind::kOdd);
    const Eigen::MatrixXd local = coeffs.local(q);
    const Eigen::MatrixXd even_vals = even * local;
    const Eigen::MatrixXd odd_vals = odd * local;

    // d loglik / d (component value) at every frequency
    Eigen::MatrixXd dvals = Eigen::MatrixXd::Zero(dft.count, layout.size());
    for (int l = 0; l < dft.count; ++l) {
      for (int k = 0; k < n; ++k) {
        cdouble wk = dft.y(l, k);
        for (int j = k + 1; j < n; ++j) {
          const cdouble theta(even_vals(l, layout.re_theta(j, k)),
                              odd_vals(l, layout.im_theta(j, k)));
          wk += std::conj(theta) * dft.y(l, j);
        }
        const double raw = even_vals(l, layout.log_psi(k));
        const double g = clamp_log_psi(raw);
        const double inv_psi = std::exp(-g);
        const double r = std::norm(wk);
        if (!std::isfinite(r * inv_psi)) non_finite(q, l + 1);
        if (raw == g) dvals(l, layout.log_psi(k)) = -1.0 + r * inv_psi;
        for (int j = k + 1; j < n; ++j) {
          const cdouble cross = std::conj(wk) * dft.y(l, j);
          dvals(l, layout.re_theta(j, k)) = -2.0 * inv_psi * cross.real();
          dvals(l, layout.im_theta(j, k)) = -2.0 * inv_psi * cross.imag();
        }
      }
    }
    for (int c = 0; c < layout.size(); ++c) {
      const Eigen::MatrixXd& basis = layout[c].is_even() ? even : odd;
      const int r = coeffs.run_of(c, q);
      grad.segment(offsets[c][r], basis_size) += basis.transpose() * dvals.col(c);
    }
  }
  return grad;
}

}  // namespace tvspec
