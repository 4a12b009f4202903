#ifndef TVSPEC_SAMPLER_HPP
#define TVSPEC_SAMPLER_HPP

#include "tvspec/dft.hpp"
#include "tvspec/priors.hpp"
#include "tvspec/types.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace tvspec {

struct HmcConfig {
  int leapfrog_steps = 20;
  double step_size = 0.01;
  double step_size_jitter = 0.2;  // trajectory step drawn from step * U(1 - j, 1 + j)
  bool adapt = true;              // dual averaging during burn-in only
  double target_accept = 0.8;
};

struct SamplerConfig {
  int iterations = 12000;
  int burn_in = 4000;
  int thin = 1;
  double prob_birth = 0.5;
  HmcConfig hmc;
  double relocate_local_prob = 0.5;
  int relocate_window = 30;
  // Adds or removes one component of an existing change-set per iteration.
  bool change_set_moves = true;
  // Start from a greedy evidence search instead of a single segment.
  bool initial_search = true;
  int newton_steps = 5;
  std::uint64_t seed = 1;
  int consistency_check_every = 500;
  // Replaces the likelihood by a constant; the chain then targets the prior.
  bool flat_likelihood = false;

  // Throws ConfigError.
  void validate() const;
};

struct MoveCounts {
  long proposed = 0;
  long accepted = 0;
  long skipped = 0;

  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
  MoveCounts& operator+=(const MoveCounts& other);
};

struct MoveDiagnostics {
  MoveCounts birth;
  MoveCounts death;
  MoveCounts relocate;
  MoveCounts change_set;
  MoveCounts hmc;
  long divergences = 0;
  long clamp_events = 0;
  long lambda_fallbacks = 0;
  double max_cache_drift = 0.0;

  MoveDiagnostics& operator+=(const MoveDiagnostics& other);
};

// Fourier-frequency basis matrices for one segment length, shared by every
// segment of that length.
struct SegmentBasis {
  Eigen::MatrixXd even;       // L x S
  Eigen::MatrixXd odd;        // L x S
  Eigen::MatrixXd even_gram;  // even' even
  Eigen::MatrixXd odd_gram;   // odd' odd

  const Eigen::MatrixXd& of(bool even_kind) const { return even_kind ? even : odd; }
  const Eigen::MatrixXd& gram(bool even_kind) const { return even_kind ? even_gram : odd_gram; }
};

// Per-chain model context: data, priors and the DFT / basis caches.
// Confined to one thread.
class ModelContext {
 public:
  ModelContext(const MultivariateSeries& series, PriorConfig prior, bool flat_likelihood = false,
               int newton_steps = 5);

  const MultivariateSeries& series() const { return *series_; }
  const ComponentLayout& layout() const { return layout_; }
  const PriorConfig& prior() const { return prior_; }
  bool flat() const { return flat_; }
  int length() const { return series_->length(); }
  int basis_size() const { return prior_.basis_size; }
  int newton_steps() const { return newton_steps_; }

  std::shared_ptr<const SegmentDft> dft(int start, int end) { return dfts_.get(start, end); }
  const SegmentBasis& basis(int n);

  long clamp_events = 0;

 private:
  const MultivariateSeries* series_;
  PriorConfig prior_;
  ComponentLayout layout_;
  bool flat_;
  int newton_steps_;
  DftCache dfts_;
  std::map<int, std::unique_ptr<SegmentBasis>> bases_;
};

// Cached evaluation of one segment: component curves at its Fourier
// frequencies and w = Theta* y.
struct SegmentFit {
  std::shared_ptr<const SegmentDft> dft;
  const SegmentBasis* basis = nullptr;
  Eigen::MatrixXd values;  // L x N^2, component values (log psi unclamped)
  Eigen::MatrixXcd w;      // L x N
  double loglik = 0.0;
};

struct ChainState {
  Partition partition;
  SegmentCoefficients coeffs;
  std::vector<SegmentFit> fits;
  double loglik = 0.0;
  long iteration = 0;
};

struct BlockRef {
  int component;
  int run;
  friend bool operator==(const BlockRef&, const BlockRef&) = default;
};

// Builds caches for (partition, coeffs). Coefficient runs must match the
// partition's run map.
ChainState make_state(ModelContext& ctx, Partition partition, SegmentCoefficients coeffs);

// m = 1 state with data-informed log-psi intercepts, polished by a few
// conditional-mode sweeps. With `search`, breakpoints are then added greedily
// while an approximate segment evidence improves.
ChainState initial_state(ModelContext& ctx, bool search = false);

// Recomputes every cache from scratch.
void rebuild_caches(ModelContext& ctx, ChainState& state);

// Replaces one block's coefficients and refreshes affected caches.
void set_block(ModelContext& ctx, ChainState& state, BlockRef block, const Eigen::VectorXd& coef);

// Log prior over partition, change-sets, coefficients and smoothing
// parameters (uniform on (0, kappa]).
double log_prior_total(const ModelContext& ctx, const ChainState& state);
double log_posterior(const ModelContext& ctx, const ChainState& state);

// Conditional log posterior of one block given the rest of the state.
// Theta blocks are exactly quadratic; log-psi blocks are not.
class BlockTarget {
 public:
  BlockTarget(ModelContext& ctx, const ChainState& state, BlockRef block);

  bool quadratic() const { return quadratic_; }
  int size() const { return static_cast<int>(prior_prec_.size()); }
  const Eigen::VectorXd& current() const { return current_; }

  double logp(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& beta) const;
  // Negative Hessian (positive definite).
  Eigen::MatrixXd precision(const Eigen::VectorXd& beta) const;
  // Precision independent of the block's own value: exact for theta blocks,
  // Fisher information plus prior for log-psi blocks.
  const Eigen::MatrixXd& mass() const { return mass_; }

  // Gaussian approximation: exact for theta, damped Newton from the current
  // value for log-psi.
  void laplace(int newton_steps, Eigen::VectorXd& mean, Eigen::MatrixXd& prec) const;

 private:
  bool quadratic_;
  Eigen::VectorXd current_;
  Eigen::VectorXd prior_prec_;
  Eigen::MatrixXd mass_;
  // quadratic: logp = -1/2 b' P b + h' b
  Eigen::MatrixXd quad_prec_;
  Eigen::VectorXd quad_lin_;
  // log-psi: stacked basis rows and |w|^2 per frequency
  Eigen::MatrixXd rows_;
  Eigen::VectorXd r_;
};

// Draws (rng != nullptr) or evaluates (target != nullptr) the blocks in
// order, each from the Gaussian approximation of its conditional given the
// state so far. Returns the log proposal density; the state ends up holding
// the drawn / target values.
double propose_blocks(ModelContext& ctx, ChainState& state, std::span<const BlockRef> blocks,
                      Rng* rng, const SegmentCoefficients* target);

// Canonical proposal order: per column k, theta blocks of that column, then
// log psi_kk.
std::vector<BlockRef> order_blocks(const ComponentLayout& layout, std::vector<BlockRef> blocks);

// Structural moves with provisional coefficients. split_state copies the
// parent's coefficients into both children and splits lambda^2 with u
// (one entry per component of phi in increasing order); merge_state uses the
// Fourier-count weighted average of the children and the geometric mean of
// their lambda^2; relocate_state keeps all coefficients.
ChainState split_state(ModelContext& ctx, const ChainState& state, int segment, int position,
                       ChangeSet phi, std::span<const double> u);
ChainState merge_state(ModelContext& ctx, const ChainState& state, int breakpoint);
ChainState relocate_state(ModelContext& ctx, const ChainState& state, int breakpoint,
                          int position);

// Blocks created by a split of `segment` (children of every phi component).
std::vector<BlockRef> split_blocks(const ComponentLayout& layout, const ChainState& split,
                                   int segment, ChangeSet phi);
// Merged blocks after removing breakpoint `breakpoint` (1-based interior).
std::vector<BlockRef> merge_blocks(const ComponentLayout& layout, const ChainState& merged,
                                   int breakpoint, ChangeSet phi);

struct MoveOutcome {
  bool skipped = false;
  bool accepted = false;
  double log_accept = 0.0;
};

double birth_probability(int m, int max_segments, double prob_birth);
int splittable_count(const Partition& partition, int n_min);

MoveOutcome birth_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg, Rng& rng,
                       MoveDiagnostics& diag);
MoveOutcome death_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg, Rng& rng,
                       MoveDiagnostics& diag);
MoveOutcome relocate_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                          Rng& rng, MoveDiagnostics& diag);
// Relocation to a caller-chosen position (tests use position == current).
MoveOutcome relocate_to(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                        int breakpoint, int position, Rng& rng, MoveDiagnostics& diag);

// Change-set moves at a fixed partition. split_component starts a new run of
// `component` at breakpoint `breakpoint` (children copy the parent, lambda^2
// split with u); merge_component joins its two runs there.
ChainState split_component(ModelContext& ctx, const ChainState& state, int breakpoint,
                           int component, double u);
ChainState merge_component(ModelContext& ctx, const ChainState& state, int breakpoint,
                           int component);
MoveOutcome change_set_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                            Rng& rng, MoveDiagnostics& diag);
// Toggles `component` at a chosen breakpoint (no-op when it would empty phi).
MoveOutcome toggle_component(ModelContext& ctx, ChainState& state, int breakpoint, int component,
                             Rng& rng, MoveDiagnostics& diag);

struct HmcTrajectory {
  Eigen::VectorXd proposal;
  double delta_h = 0.0;  // H(end) - H(start)
};

// One leapfrog trajectory on a block from momentum M^{1/2} z.
HmcTrajectory hmc_trajectory(const BlockTarget& target, double step_size, int steps,
                             const Eigen::VectorXd& z);

// Returns the mean acceptance probability over blocks.
double hmc_update(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                  double step_size, Rng& rng, MoveDiagnostics& diag);

void gibbs_lambda_update(ModelContext& ctx, ChainState& state, Rng& rng, MoveDiagnostics& diag);

struct Snapshot {
  long iteration = 0;
  Partition partition;
  SegmentCoefficients coeffs;
  double loglik = 0.0;
};

struct ChainResult {
  std::vector<Snapshot> snapshots;
  MoveDiagnostics diagnostics;
  std::vector<int> segment_trace;  // m at every iteration
  double final_step_size = 0.0;
  double seconds = 0.0;
};

// Throws ConfigError before sampling on invalid configs.
ChainResult run_chain(const MultivariateSeries& series, const PriorConfig& prior,
                      const SamplerConfig& cfg);

}  // namespace tvspec

#endif  // TVSPEC_SAMPLER_HPP
