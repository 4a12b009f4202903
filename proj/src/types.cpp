#include "tvspec/types.hpp"

#include "tvspec/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace tvspec {

MultivariateSeries::MultivariateSeries(Eigen::MatrixXd values,
                                       std::optional<double> sample_rate)
    : values_(std::move(values)), sample_rate_(sample_rate) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw InvalidArgument("series is empty");
  }
  if (values_.cols() > kMaxDim) {
    throw InvalidArgument("series dimension exceeds " + std::to_string(kMaxDim));
  }
  for (Eigen::Index t = 0; t < values_.rows(); ++t) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      if (!std::isfinite(values_(t, j))) {
        std::ostringstream msg;
        msg << "non-finite value at row " << t + 1 << ", column " << j + 1;
        throw InvalidArgument(msg.str());
      }
    }
  }
  if (sample_rate_ && !(*sample_rate_ > 0.0)) {
    throw InvalidArgument("sample rate must be positive");
  }
}

void MultivariateSeries::require_min_length(int n_min) const {
  if (length() < 2 * n_min) {
    throw InvalidArgument("series length " + std::to_string(length()) +
                          " is shorter than 2 * n_min = " + std::to_string(2 * n_min));
  }
}

std::string ComponentIndex::name() const {
  std::ostringstream out;
  switch (kind) {
    case ComponentKind::kLogPsi: out << "logpsi_" << row + 1 << row + 1; break;
    case ComponentKind::kReTheta: out << "retheta_" << row + 1 << col + 1; break;
    case ComponentKind::kImTheta: out << "imtheta_" << row + 1 << col + 1; break;
  }
  return out.str();
}

ComponentLayout::ComponentLayout(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw InvalidArgument("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  for (int j = 0; j < dim; ++j) components_.push_back({ComponentKind::kLogPsi, j, j});
  for (int j = 1; j < dim; ++j)
    for (int k = 0; k < j; ++k) components_.push_back({ComponentKind::kReTheta, j, k});
  for (int j = 1; j < dim; ++j)
    for (int k = 0; k < j; ++k) components_.push_back({ComponentKind::kImTheta, j, k});
}

int ComponentLayout::re_theta(int j, int k) const {
  return dim_ + j * (j - 1) / 2 + k;
}

int ComponentLayout::im_theta(int j, int k) const {
  return dim_ + dim_ * (dim_ - 1) / 2 + j * (j - 1) / 2 + k;
}

int ComponentLayout::index_of(const ComponentIndex& idx) const {
  switch (idx.kind) {
    case ComponentKind::kLogPsi: return log_psi(idx.row);
    case ComponentKind::kReTheta: return re_theta(idx.row, idx.col);
    case ComponentKind::kImTheta: return im_theta(idx.row, idx.col);
  }
  return -1;
}

ChangeSet full_change_set(int n_components) {
  if (n_components >= 64) return ~ChangeSet{0};
  return (ChangeSet{1} << n_components) - 1;
}

int popcount(ChangeSet set) { return std::popcount(set); }

Partition Partition::single(int length) { return Partition{{0, length}, {}}; }

double Partition::midpoint(int q) const {
  return (breaks[q] + breaks[q + 1]) / (2.0 * length());
}

int Partition::segment_of(int t) const {
  auto it = std::lower_bound(breaks.begin() + 1, breaks.end(), t);
  return static_cast<int>(it - breaks.begin()) - 1;
}

void Partition::validate(int n_min, int n_components, int max_segments) const {
  if (breaks.size() < 2 || breaks.front() != 0) {
    throw InvalidPartition("partition must start at 0 and have at least one segment");
  }
  const int m = segments();
  if (m > max_segments) {
    throw InvalidPartition("segment count " + std::to_string(m) + " exceeds M = " +
                           std::to_string(max_segments));
  }
  if (static_cast<int>(phi.size()) != m - 1) {
    throw InvalidPartition("change-set count does not match breakpoints");
  }
  for (int q = 0; q < m; ++q) {
    if (segment_length(q) < n_min) {
      throw InvalidPartition("segment " + std::to_string(q + 1) + " shorter than n_min");
    }
  }
  const ChangeSet all = full_change_set(n_components);
  for (std::size_t q = 0; q < phi.size(); ++q) {
    if (phi[q] == 0 || (phi[q] & ~all) != 0) {
      throw InvalidPartition("invalid change-set at breakpoint " + std::to_string(q + 1));
    }
  }
}

int ComponentRunMap::run_of(int c, int q) const {
  const auto& list = runs[c];
  for (std::size_t r = 0; r < list.size(); ++r) {
    if (list[r].covers(q)) return static_cast<int>(r);
  }
  throw InvalidState("segment not covered by any run");
}

int SegmentCoefficients::run_of(int c, int q) const {
  const auto& list = runs[c];
  for (std::size_t r = 0; r < list.size(); ++r) {
    if (list[r].run.covers(q)) return static_cast<int>(r);
  }
  throw InvalidState("segment not covered by any run");
}

const Eigen::VectorXd& SegmentCoefficients::coef_for(int c, int q) const {
  return runs[c][run_of(c, q)].coef;
}

ComponentRunMap SegmentCoefficients::run_map() const {
  ComponentRunMap map;
  map.runs.resize(runs.size());
  for (std::size_t c = 0; c < runs.size(); ++c) {
    for (const auto& rc : runs[c]) map.runs[c].push_back(rc.run);
  }
  return map;
}

Eigen::MatrixXd SegmentCoefficients::local(int q) const {
  Eigen::MatrixXd out(basis_size, static_cast<Eigen::Index>(runs.size()));
  for (std::size_t c = 0; c < runs.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = coef_for(static_cast<int>(c), q);
  }
  return out;
}

int SegmentCoefficients::parameter_count() const {
  int total = 0;
  for (const auto& list : runs) total += static_cast<int>(list.size()) * basis_size;
  return total;
}

SegmentCoefficients SegmentCoefficients::zeros(const ComponentRunMap& map, int basis_size) {
  SegmentCoefficients out;
  out.basis_size = basis_size;
  out.runs.resize(map.runs.size());
  for (std::size_t c = 0; c < map.runs.size(); ++c) {
    for (const Run& run : map.runs[c]) {
      out.runs[c].push_back({run, Eigen::VectorXd::Zero(basis_size), 1.0});
    }
  }
  return out;
}

std::vector<double> uniform_time_grid(int length) {
  std::vector<double> grid(static_cast<std::size_t>(length));
  for (int t = 1; t <= length; ++t) grid[t - 1] = static_cast<double>(t) / length;
  return grid;
}

std::vector<double> uniform_freq_grid(int count) {
  if (count < 2) throw InvalidArgument("frequency grid needs at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) grid[k] = 0.5 * k / (count - 1);
  return grid;
}

}  // namespace tvspec
