#ifndef TVSPEC_DFT_HPP
#define TVSPEC_DFT_HPP

#include "tvspec/types.hpp"

#include <map>
#include <memory>
#include <utility>
#include <vector>

namespace tvspec {

// Local DFT of one segment (delta_{q-1}, delta_q]:
//   y_l = n^{-1/2} sum_t X_t exp(-2 pi i l t / n),  l = 1..L,  L = floor((n-1)/2)
// with t the absolute one-based sample index and X mean-centred within the
// segment. Row l-1 of `y` holds y_l.
struct SegmentDft {
  int start = 0;  // delta_{q-1}
  int end = 0;    // delta_q
  int n = 0;
  int count = 0;  // L
  Eigen::MatrixXcd y;
  std::vector<double> freqs;  // l / n
};

struct LocalDftSet {
  std::vector<std::shared_ptr<const SegmentDft>> segments;
};

inline int fourier_count(int n) { return (n - 1) / 2; }

// Transform of samples start+1..end. Uses the FFT for n >= 16, the direct
// sum below that.
SegmentDft segment_dft(const MultivariateSeries& series, int start, int end);
// Direct O(n^2) summation, same conventions.
SegmentDft naive_segment_dft(const MultivariateSeries& series, int start, int end);

LocalDftSet local_dft(const MultivariateSeries& series, const Partition& partition);

// Memoises segment transforms keyed by (start, end). Not thread-safe: owned
// by a single chain.
class DftCache {
 public:
  explicit DftCache(const MultivariateSeries& series, std::size_t capacity = 8192);

  std::shared_ptr<const SegmentDft> get(int start, int end);
  LocalDftSet for_partition(const Partition& partition);
  std::size_t size() const { return entries_.size(); }

 private:
  const MultivariateSeries* series_;
  std::size_t capacity_;
  std::map<std::pair<int, int>, std::shared_ptr<const SegmentDft>> entries_;
};

}  // namespace tvspec

#endif  // TVSPEC_DFT_HPP
