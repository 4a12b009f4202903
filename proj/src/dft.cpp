#include "tvspec/dft.hpp"

#include "tvspec/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace tvspec {
namespace {

constexpr int kNaiveBelow = 16;

// FFTW planning is not thread-safe; execution with new-array functions is.
class PlanRegistry {
 public:
  static PlanRegistry& instance() {
    static PlanRegistry registry;
    return registry;
  }

  fftw_plan r2c(int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n));
    std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw InvalidState("FFTW failed to plan length " + std::to_string(n));
    plans_.emplace(n, plan);
    return plan;
  }

  ~PlanRegistry() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::unordered_map<int, fftw_plan> plans_;
};

Eigen::MatrixXd centred_block(const MultivariateSeries& series, int start, int end) {
  if (start < 0 || end > series.length() || end - start < 3) {
    throw InvalidArgument("segment bounds out of range");
  }
  Eigen::MatrixXd block = series.values().middleRows(start, end - start);
  block.rowwise() -= block.colwise().mean();
  return block;
}

SegmentDft empty_result(const MultivariateSeries& series, int start, int end) {
  SegmentDft out;
  out.start = start;
  out.end = end;
  out.n = end - start;
  out.count = fourier_count(out.n);
  out.y.resize(out.count, series.dim());
  out.freqs.resize(static_cast<std::size_t>(out.count));
  for (int l = 1; l <= out.count; ++l) out.freqs[l - 1] = static_cast<double>(l) / out.n;
  return out;
}

}  // namespace

SegmentDft naive_segment_dft(const MultivariateSeries& series, int start, int end) {
  const Eigen::MatrixXd block = centred_block(series, start, end);
  SegmentDft out = empty_result(series, start, end);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.n));
  for (int l = 1; l <= out.count; ++l) {
    for (int j = 0; j < series.dim(); ++j) {
      cdouble acc = 0.0;
      for (int tau = 0; tau < out.n; ++tau) {
        const long t = start + 1 + tau;
        // reduce l*t mod n before scaling to keep the phase exact
        const double phase = -2.0 * std::numbers::pi *
                             static_cast<double>((static_cast<long>(l) * t) % out.n) / out.n;
        acc += block(tau, j) * std::polar(1.0, phase);
      }
      out.y(l - 1, j) = acc * scale;
    }
  }
  return out;
}

SegmentDft segment_dft(const MultivariateSeries& series, int start, int end) {
  const int n = end - start;
  if (n < kNaiveBelow) return naive_segment_dft(series, start, end);
  const Eigen::MatrixXd block = centred_block(series, start, end);
  SegmentDft out = empty_result(series, start, end);
  fftw_plan plan = PlanRegistry::instance().r2c(n);
  std::vector<double> in(static_cast<std::size_t>(n));
  std::vector<fftw_complex> spec(static_cast<std::size_t>(n / 2 + 1));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const long offset = (start + 1) % n;
  for (int j = 0; j < series.dim(); ++j) {
    for (int tau = 0; tau < n; ++tau) in[tau] = block(tau, j);
    fftw_execute_dft_r2c(plan, in.data(), spec.data());
    for (int l = 1; l <= out.count; ++l) {
      // FFT indexes from tau = 0; shift to absolute t = start + 1 + tau.
      const double phase = -2.0 * std::numbers::pi *
                           static_cast<double>((static_cast<long>(l) * offset) % n) / n;
      out.y(l - 1, j) = cdouble(spec[l][0], spec[l][1]) * std::polar(scale, phase);
    }
  }
  return out;
}

LocalDftSet local_dft(const MultivariateSeries& series, const Partition& partition) {
  LocalDftSet set;
  for (int q = 0; q < partition.segments(); ++q) {
    set.segments.push_back(std::make_shared<const SegmentDft>(
        segment_dft(series, partition.segment_start(q), partition.segment_end(q))));
  }
  return set;
}

DftCache::DftCache(const MultivariateSeries& series, std::size_t capacity)
    : series_(&series), capacity_(capacity) {}

std::shared_ptr<const SegmentDft> DftCache::get(int start, int end) {
  const auto key = std::make_pair(start, end);
  auto it = entries_.find(key);
  if (it != entries_.end()) return it->second;
  if (entries_.size() >= capacity_) entries_.clear();
  auto dft = std::make_shared<const SegmentDft>(segment_dft(*series_, start, end));
  entries_.emplace(key, dft);
  return dft;
}

LocalDftSet DftCache::for_partition(const Partition& partition) {
  LocalDftSet set;
  for (int q = 0; q < partition.segments(); ++q) {
    set.segments.push_back(get(partition.segment_start(q), partition.segment_end(q)));
  }
  return set;
}

}  // namespace tvspec
