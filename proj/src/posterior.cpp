#include "tvspec/posterior.hpp"

#include "tvspec/error.hpp"
#include "tvspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tvspec {
namespace {

int dim_of(const Snapshot& snapshot) {
  const int components = static_cast<int>(snapshot.coeffs.runs.size());
  int n = 1;
  while (n * n < components) ++n;
  if (n * n != components) throw InvalidArgument("snapshot component count is not a square");
  return n;
}

void require_snapshots(std::span<const Snapshot> snapshots) {
  if (snapshots.empty()) throw InvalidArgument("no snapshots to summarize");
}

// Spectral matrices of every segment of a snapshot: out[q][k] at freq k.
std::vector<std::vector<Eigen::MatrixXcd>> segment_spectra(const Snapshot& snapshot,
                                                           std::span<const double> freqs) {
  const ComponentLayout layout(dim_of(snapshot));
  std::vector<std::vector<Eigen::MatrixXcd>> out;
  for (int q = 0; q < snapshot.partition.segments(); ++q) {
    const auto pairs = reconstruct_cholesky(layout, snapshot.coeffs.local(q), freqs);
    std::vector<Eigen::MatrixXcd> row;
    row.reserve(pairs.size());
    for (const auto& pair : pairs) row.push_back(spectrum_from_cholesky(pair));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd segment_functional(const Snapshot& snapshot, const Functional& functional,
                                   std::span<const double> freqs) {
  const auto spectra = segment_spectra(snapshot, freqs);
  Eigen::MatrixXd out(spectra.size(), freqs.size());
  for (std::size_t q = 0; q < spectra.size(); ++q) {
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      out(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) = functional(spectra[q][k]);
    }
  }
  return out;
}

// Time-grid index range [first, last) owned by each segment.
std::vector<std::pair<int, int>> segment_ranges(const Partition& partition,
                                                const std::vector<int>& samples) {
  std::vector<std::pair<int, int>> ranges;
  for (int q = 0; q < partition.segments(); ++q) {
    const auto lo = std::lower_bound(samples.begin(), samples.end(), partition.segment_start(q) + 1);
    const auto hi = std::lower_bound(samples.begin(), samples.end(), partition.segment_end(q) + 1);
    ranges.emplace_back(static_cast<int>(lo - samples.begin()), static_cast<int>(hi - samples.begin()));
  }
  return ranges;
}

void check_lengths(std::span<const Snapshot> snapshots) {
  const int length = snapshots.front().partition.length();
  for (const auto& s : snapshots) {
    if (s.partition.length() != length) throw InvalidArgument("snapshots disagree on series length");
  }
}

double interpolated_quantile(std::vector<double>& values, double p) {
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double x_lo = values[lo];
  if (lo + 1 >= values.size()) return x_lo;
  const double x_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

ScalarGrid empty_grid(std::span<const double> time_grid, std::span<const double> freq_grid) {
  ScalarGrid grid;
  grid.time_points.assign(time_grid.begin(), time_grid.end());
  grid.freq_points.assign(freq_grid.begin(), freq_grid.end());
  grid.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(time_grid.size()),
                                      static_cast<Eigen::Index>(freq_grid.size()));
  return grid;
}

}  // namespace

Functional Functional::parse(std::string_view name) {
  auto digit = [&](char c) {
    if (c < '1' || c > '9') throw InvalidArgument("bad functional name: " + std::string(name));
    return c - '1';
  };
  auto ends_with_pair = [&](std::string_view prefix) {
    return name.size() == prefix.size() + 2 && name.substr(0, prefix.size()) == prefix;
  };
  if (ends_with_pair("logf")) {
    const int j = digit(name[4]);
    if (digit(name[5]) != j) throw InvalidArgument("log spectrum must be diagonal: " + std::string(name));
    return log_spectrum(j);
  }
  if (ends_with_pair("rho")) {
    const int j = digit(name[3]);
    const int k = digit(name[4]);
    if (j <= k) throw InvalidArgument("coherence needs j > k: " + std::string(name));
    return coherence(j, k);
  }
  if (ends_with_pair("f")) {
    const int j = digit(name[1]);
    if (digit(name[2]) != j) throw InvalidArgument("spectrum must be diagonal: " + std::string(name));
    return spectrum(j);
  }
  throw InvalidArgument("unknown functional: " + std::string(name));
}

std::string Functional::name() const {
  const std::string j = std::to_string(row + 1);
  const std::string k = std::to_string(col + 1);
  switch (kind) {
    case Kind::kSpectrum:
      return "f" + j + k;
    case Kind::kLogSpectrum:
      return "logf" + j + k;
    case Kind::kCoherence:
      return "rho" + j + k;
  }
  return {};
}

double Functional::operator()(const Eigen::MatrixXcd& f) const {
  if (row >= f.rows() || col >= f.cols()) throw InvalidArgument("functional index out of range");
  switch (kind) {
    case Kind::kSpectrum:
      return f(row, row).real();
    case Kind::kLogSpectrum:
      return std::log(f(row, row).real());
    case Kind::kCoherence:
      return tvspec::coherence(f, row, col);
  }
  return 0.0;
}

std::vector<Functional> standard_functionals(int dim) {
  std::vector<Functional> out;
  for (int j = 0; j < dim; ++j) out.push_back(Functional::spectrum(j));
  for (int k = 0; k < dim; ++k)
    for (int j = k + 1; j < dim; ++j) out.push_back(Functional::coherence(j, k));
  return out;
}

std::vector<int> time_grid_samples(std::span<const double> time_grid, int length) {
  std::vector<int> samples;
  samples.reserve(time_grid.size());
  for (std::size_t i = 0; i < time_grid.size(); ++i) {
    const double u = time_grid[i];
    if (!std::isfinite(u)) throw InvalidArgument("non-finite time grid point");
    if (i > 0 && u < time_grid[i - 1]) throw InvalidArgument("time grid must be non-decreasing");
    const double t = std::ceil(u * length - 1e-9);
    samples.push_back(std::clamp(static_cast<int>(t), 1, length));
  }
  return samples;
}

SpectrumGrid posterior_spectrum(std::span<const Snapshot> snapshots,
                                std::span<const double> time_grid,
                                std::span<const double> freq_grid) {
  require_snapshots(snapshots);
  check_lengths(snapshots);
  const int dim = dim_of(snapshots.front());
  const auto samples = time_grid_samples(time_grid, snapshots.front().partition.length());
  const std::size_t nt = time_grid.size();
  const std::size_t nf = freq_grid.size();

  // Difference array over time-grid rows.
  std::vector<Eigen::MatrixXcd> diff((nt + 1) * nf, Eigen::MatrixXcd::Zero(dim, dim));
  for (const Snapshot& snapshot : snapshots) {
    const auto spectra = segment_spectra(snapshot, freq_grid);
    const auto ranges = segment_ranges(snapshot.partition, samples);
    for (std::size_t q = 0; q < ranges.size(); ++q) {
      const auto [first, last] = ranges[q];
      if (first == last) continue;
      for (std::size_t k = 0; k < nf; ++k) {
        diff[first * nf + k] += spectra[q][k];
        diff[last * nf + k] -= spectra[q][k];
      }
    }
  }

  SpectrumGrid grid;
  grid.time_points.assign(time_grid.begin(), time_grid.end());
  grid.freq_points.assign(freq_grid.begin(), freq_grid.end());
  grid.dim = dim;
  grid.values.assign(nt * nf, Eigen::MatrixXcd::Zero(dim, dim));
  const double scale = 1.0 / static_cast<double>(snapshots.size());
  for (std::size_t k = 0; k < nf; ++k) {
    Eigen::MatrixXcd running = Eigen::MatrixXcd::Zero(dim, dim);
    for (std::size_t i = 0; i < nt; ++i) {
      running += diff[i * nf + k];
      const Eigen::MatrixXcd mean = running * scale;
      grid.at(i, k) = 0.5 * (mean + mean.adjoint());
    }
  }
  return grid;
}

ScalarGrid posterior_functional(std::span<const Snapshot> snapshots, const Functional& functional,
                                std::span<const double> time_grid,
                                std::span<const double> freq_grid) {
  require_snapshots(snapshots);
  check_lengths(snapshots);
  const auto samples = time_grid_samples(time_grid, snapshots.front().partition.length());
  const auto nt = static_cast<Eigen::Index>(time_grid.size());
  const auto nf = static_cast<Eigen::Index>(freq_grid.size());

  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(nt + 1, nf);
  for (const Snapshot& snapshot : snapshots) {
    const Eigen::MatrixXd vals = segment_functional(snapshot, functional, freq_grid);
    const auto ranges = segment_ranges(snapshot.partition, samples);
    for (std::size_t q = 0; q < ranges.size(); ++q) {
      const auto [first, last] = ranges[q];
      if (first == last) continue;
      diff.row(first) += vals.row(static_cast<Eigen::Index>(q));
      diff.row(last) -= vals.row(static_cast<Eigen::Index>(q));
    }
  }

  ScalarGrid grid = empty_grid(time_grid, freq_grid);
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(nf);
  const double scale = 1.0 / static_cast<double>(snapshots.size());
  for (Eigen::Index i = 0; i < nt; ++i) {
    running += diff.row(i);
    grid.values.row(i) = running * scale;
  }
  return grid;
}

CredibleBands credible_bands(std::span<const Snapshot> snapshots, const Functional& functional,
                             double level, std::span<const double> time_grid,
                             std::span<const double> freq_grid) {
  require_snapshots(snapshots);
  check_lengths(snapshots);
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("band level must be in (0, 1)");
  const auto samples = time_grid_samples(time_grid, snapshots.front().partition.length());
  const std::size_t count = snapshots.size();
  const std::size_t nt = time_grid.size();
  const auto nf = static_cast<Eigen::Index>(freq_grid.size());

  std::vector<Eigen::MatrixXd> vals;
  vals.reserve(count);
  for (const Snapshot& s : snapshots) vals.push_back(segment_functional(s, functional, freq_grid));

  CredibleBands bands;
  bands.level = level;
  bands.lower = empty_grid(time_grid, freq_grid);
  bands.upper = empty_grid(time_grid, freq_grid);
  const double p_lo = 0.5 * (1.0 - level);
  const double p_hi = 1.0 - p_lo;

  std::vector<int> cursor(count, 0);
  std::vector<double> buffer(count);
  for (std::size_t i = 0; i < nt; ++i) {
    bool moved = (i == 0);
    for (std::size_t s = 0; s < count; ++s) {
      const Partition& part = snapshots[s].partition;
      while (samples[i] > part.segment_end(cursor[s])) {
        ++cursor[s];
        moved = true;
      }
    }
    const auto row = static_cast<Eigen::Index>(i);
    if (!moved) {
      bands.lower.values.row(row) = bands.lower.values.row(row - 1);
      bands.upper.values.row(row) = bands.upper.values.row(row - 1);
      continue;
    }
    for (Eigen::Index k = 0; k < nf; ++k) {
      for (std::size_t s = 0; s < count; ++s) buffer[s] = vals[s](cursor[s], k);
      bands.lower.values(row, k) = interpolated_quantile(buffer, p_lo);
      bands.upper.values(row, k) = interpolated_quantile(buffer, p_hi);
    }
  }
  return bands;
}

int LocationHistogram::mode() const {
  if (support.empty()) throw InvalidState("empty location histogram");
  const auto it = std::max_element(probability.begin(), probability.end());
  return support[static_cast<std::size_t>(it - probability.begin())];
}

int ChangepointPosterior::mode_m() const {
  const auto it = std::max_element(pm.begin(), pm.end());
  return static_cast<int>(it - pm.begin()) + 1;
}

std::vector<int> ChangepointPosterior::conditional_mode(int m) const {
  std::vector<int> out;
  for (const auto& h : ploc) {
    if (h.m == m) out.push_back(h.mode());
  }
  return out;
}

ChangepointPosterior changepoint_posterior(std::span<const Snapshot> snapshots, int max_segments,
                                           int length) {
  require_snapshots(snapshots);
  if (max_segments < 1) throw InvalidArgument("M must be at least 1");
  ChangepointPosterior out;
  out.length = length;
  out.pm.assign(static_cast<std::size_t>(max_segments), 0.0);
  std::vector<long> per_m(static_cast<std::size_t>(max_segments), 0);
  std::map<std::pair<int, int>, std::map<int, long>> counts;
  for (const Snapshot& s : snapshots) {
    const int m = s.partition.segments();
    if (m > max_segments) throw InvalidArgument("snapshot has more than M segments");
    ++per_m[m - 1];
    for (int q = 1; q < m; ++q) ++counts[{m, q}][s.partition.breaks[q]];
  }
  const double total = static_cast<double>(snapshots.size());
  for (int k = 0; k < max_segments; ++k) out.pm[k] = per_m[k] / total;
  for (const auto& [key, hist] : counts) {
    LocationHistogram h;
    h.m = key.first;
    h.q = key.second;
    const double n = static_cast<double>(per_m[h.m - 1]);
    for (const auto& [t, c] : hist) {
      h.support.push_back(t);
      h.probability.push_back(c / n);
    }
    out.ploc.push_back(std::move(h));
  }
  return out;
}

ScalarGrid functional_grid(const SpectrumGrid& grid, const Functional& functional) {
  ScalarGrid out = empty_grid(grid.time_points, grid.freq_points);
  for (std::size_t i = 0; i < grid.time_points.size(); ++i) {
    for (std::size_t k = 0; k < grid.freq_points.size(); ++k) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = functional(grid.at(i, k));
    }
  }
  return out;
}

double ase(const ScalarGrid& estimate, const ScalarGrid& truth) {
  if (estimate.values.rows() != truth.values.rows() || estimate.values.cols() != truth.values.cols()) {
    throw InvalidArgument("grids differ in shape");
  }
  if (estimate.values.size() == 0) throw InvalidArgument("empty grid");
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > 1e-9) return false;
    return true;
  };
  if (!close(estimate.time_points, truth.time_points) ||
      !close(estimate.freq_points, truth.freq_points)) {
    throw InvalidArgument("grids differ in axis points");
  }
  return (estimate.values - truth.values).array().square().mean();
}

Eigen::VectorXd time_total_variation(const ScalarGrid& grid) {
  const Eigen::Index nt = grid.values.rows();
  Eigen::VectorXd tv = Eigen::VectorXd::Zero(grid.values.cols());
  for (Eigen::Index i = 1; i < nt; ++i) {
    tv += (grid.values.row(i) - grid.values.row(i - 1)).cwiseAbs().transpose();
  }
  return tv;
}

}  // namespace tvspec
