#ifndef TVSPEC_TYPES_HPP
#define TVSPEC_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tvspec {

using cdouble = std::complex<double>;

// T x N observed series. Rows are time points t = 1..T (row t-1).
class MultivariateSeries {
 public:
  MultivariateSeries() = default;
  explicit MultivariateSeries(Eigen::MatrixXd values,
                              std::optional<double> sample_rate = std::nullopt);

  int length() const { return static_cast<int>(values_.rows()); }
  int dim() const { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXd& values() const { return values_; }
  std::optional<double> sample_rate() const { return sample_rate_; }

  // Throws InvalidArgument if T < 2 n_min.
  void require_min_length(int n_min) const;

 private:
  Eigen::MatrixXd values_;
  std::optional<double> sample_rate_;
};

enum class ComponentKind { kLogPsi, kReTheta, kImTheta };

// Position of a modified-Cholesky component. row > col for the theta kinds,
// row == col for log-psi. Zero-based.
struct ComponentIndex {
  ComponentKind kind;
  int row;
  int col;

  bool is_theta() const { return kind != ComponentKind::kLogPsi; }
  // Even components (Re theta, log psi) use the cosine basis with intercept.
  bool is_even() const { return kind != ComponentKind::kImTheta; }
  std::string name() const;
  friend bool operator==(const ComponentIndex&, const ComponentIndex&) = default;
};

// Canonical ordering of the N^2 components for dimension N:
//   [0, N)                    log psi_jj, j = 0..N-1
//   [N, N + N(N-1)/2)         Re theta_jk, row-major over j > k
//   [N + N(N-1)/2, N^2)       Im theta_jk, same order
// Change-sets, run maps, coefficient storage and gradients all use it.
class ComponentLayout {
 public:
  explicit ComponentLayout(int dim);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(components_.size()); }
  const ComponentIndex& operator[](int c) const { return components_[c]; }

  int log_psi(int j) const { return j; }
  int re_theta(int j, int k) const;
  int im_theta(int j, int k) const;
  int index_of(const ComponentIndex& idx) const;

 private:
  int dim_;
  std::vector<ComponentIndex> components_;
};

// Subset of component indices, bit c set when component c changes.
using ChangeSet = std::uint64_t;

inline constexpr int kMaxDim = 8;

ChangeSet full_change_set(int n_components);
inline bool contains(ChangeSet set, int c) { return ((set >> c) & 1U) != 0; }
int popcount(ChangeSet set);

// Segmentation 0 = delta_0 < delta_1 < ... < delta_m = T. phi[q-1] holds the
// change-set of interior breakpoint delta_q. Segments are zero-based here:
// segment q covers samples delta_q + 1 .. delta_{q+1} (one-based t).
struct Partition {
  std::vector<int> breaks;
  std::vector<ChangeSet> phi;

  static Partition single(int length);

  int segments() const { return static_cast<int>(breaks.size()) - 1; }
  int length() const { return breaks.back(); }
  int segment_start(int q) const { return breaks[q]; }
  int segment_end(int q) const { return breaks[q + 1]; }
  int segment_length(int q) const { return breaks[q + 1] - breaks[q]; }
  // Scaled midpoint u_q = (delta_q + delta_{q-1}) / 2T.
  double midpoint(int q) const;
  // Segment owning one-based sample t.
  int segment_of(int t) const;

  // Throws InvalidPartition on any violation.
  void validate(int n_min, int n_components, int max_segments) const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

// Maximal group of consecutive segments [first, last] over which a component
// does not change.
struct Run {
  int first;
  int last;

  bool covers(int q) const { return first <= q && q <= last; }
  friend bool operator==(const Run&, const Run&) = default;
};

// runs[c] tiles segments 0..m-1 in order.
struct ComponentRunMap {
  std::vector<std::vector<Run>> runs;

  int run_of(int c, int q) const;
  friend bool operator==(const ComponentRunMap&, const ComponentRunMap&) = default;
};

// Spline coefficients and smoothing parameter of one component-run.
// Even kinds: coef[0] intercept, coef[s] multiplies cos(2 pi s w), s=1..S-1.
// Odd kind:   coef[s-1] multiplies sin(2 pi s w), s = 1..S.
struct RunCoefficients {
  Run run;
  Eigen::VectorXd coef;
  double lambda2 = 1.0;
};

struct SegmentCoefficients {
  int basis_size = 10;
  std::vector<std::vector<RunCoefficients>> runs;  // [component][run]

  int run_of(int c, int q) const;
  const Eigen::VectorXd& coef_for(int c, int q) const;
  ComponentRunMap run_map() const;
  // Coefficient vectors in force on segment q, one column per component.
  Eigen::MatrixXd local(int q) const;
  // Total number of scalar coefficients.
  int parameter_count() const;
  // All zero coefficients with lambda2 = 1 on the given run map.
  static SegmentCoefficients zeros(const ComponentRunMap& map, int basis_size);
};

struct CholeskyPair {
  Eigen::MatrixXcd theta;  // unit lower triangular
  Eigen::VectorXd psi;     // positive
};

struct SpectrumGrid {
  std::vector<double> time_points;  // scaled times u in [0, 1]
  std::vector<double> freq_points;  // cycles per sample in [0, 0.5]
  int dim = 0;
  // values[i * freq_points.size() + k] is f(u_i, w_k).
  std::vector<Eigen::MatrixXcd> values;

  const Eigen::MatrixXcd& at(std::size_t i, std::size_t k) const {
    return values[i * freq_points.size() + k];
  }
  Eigen::MatrixXcd& at(std::size_t i, std::size_t k) {
    return values[i * freq_points.size() + k];
  }
};

// Real-valued functional evaluated on a time x frequency lattice, row-major
// with rows = time points.
struct ScalarGrid {
  std::vector<double> time_points;
  std::vector<double> freq_points;
  Eigen::MatrixXd values;
};

std::vector<double> uniform_time_grid(int length);
std::vector<double> uniform_freq_grid(int count);

}  // namespace tvspec

#endif  // TVSPEC_TYPES_HPP
