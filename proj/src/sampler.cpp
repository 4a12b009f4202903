#include "tvspec/sampler.hpp"

#include "tvspec/error.hpp"
#include "tvspec/model.hpp"
#include "tvspec/whittle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace tvspec {
namespace {

constexpr double kDivergence = 1000.0;
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Eigen::VectorXd standard_normal(Rng& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

// Theta entry (row j, col k) enters w_k through conj(theta_jk) y_j, so a
// real change t in Re theta multiplies y_j and in Im theta multiplies -i y_j.
cdouble theta_direction(const ComponentIndex& comp, cdouble y_row) {
  return comp.kind == ComponentKind::kReTheta ? y_row : cdouble(0.0, -1.0) * y_row;
}

double segment_loglik(ModelContext& ctx, const SegmentFit& fit) {
  if (ctx.flat()) return 0.0;
  const ComponentLayout& layout = ctx.layout();
  double total = 0.0;
  for (int k = 0; k < layout.dim(); ++k) {
    const auto g_raw = fit.values.col(layout.log_psi(k));
    for (Eigen::Index l = 0; l < fit.values.rows(); ++l) {
      const double g = clamp_log_psi(g_raw(l), &ctx.clamp_events);
      total -= g + std::norm(fit.w(l, k)) * std::exp(-g);
    }
  }
  if (!std::isfinite(total)) throw InvalidState("non-finite segment log-likelihood");
  return total;
}

void compute_w(const ComponentLayout& layout, SegmentFit& fit) {
  const Eigen::MatrixXcd& y = fit.dft->y;
  fit.w = y;
  for (int j = 1; j < layout.dim(); ++j) {
    for (int k = 0; k < j; ++k) {
      const auto re = fit.values.col(layout.re_theta(j, k));
      const auto im = fit.values.col(layout.im_theta(j, k));
      for (Eigen::Index l = 0; l < y.rows(); ++l) {
        fit.w(l, k) += cdouble(re(l), -im(l)) * y(l, j);
      }
    }
  }
}

SegmentFit build_fit(ModelContext& ctx, const Partition& partition,
                     const SegmentCoefficients& coeffs, int q) {
  const ComponentLayout& layout = ctx.layout();
  SegmentFit fit;
  fit.dft = ctx.dft(partition.segment_start(q), partition.segment_end(q));
  fit.basis = &ctx.basis(partition.segment_length(q));
  fit.values.resize(fit.dft->count, layout.size());
  for (int c = 0; c < layout.size(); ++c) {
    fit.values.col(c) = fit.basis->of(layout[c].is_even()) * coeffs.coef_for(c, q);
  }
  compute_w(layout, fit);
  fit.loglik = segment_loglik(ctx, fit);
  return fit;
}

void sum_loglik(ChainState& state) {
  double total = 0.0;
  for (const auto& fit : state.fits) total += fit.loglik;
  state.loglik = total;
}

int fourier_total(const Partition& partition, const Run& run) {
  int total = 0;
  for (int q = run.first; q <= run.last; ++q) total += fourier_count(partition.segment_length(q));
  return total;
}

double log_jacobian(double lambda2, double u) { return std::log(2.0 * lambda2 / (u * (1.0 - u))); }

bool lambdas_in_range(const SegmentCoefficients& coeffs, double kappa) {
  for (const auto& list : coeffs.runs)
    for (const auto& rc : list)
      if (!(rc.lambda2 > 0.0) || rc.lambda2 > kappa) return false;
  return true;
}

std::vector<BlockRef> all_blocks(const ChainState& state) {
  std::vector<BlockRef> blocks;
  for (std::size_t c = 0; c < state.coeffs.runs.size(); ++c)
    for (std::size_t r = 0; r < state.coeffs.runs[c].size(); ++r)
      blocks.push_back({static_cast<int>(c), static_cast<int>(r)});
  return blocks;
}

// Dual averaging of the log step size (Hoffman & Gelman defaults).
class StepSizeAdapter {
 public:
  StepSizeAdapter(double initial, double target)
      : mu_(std::log(10.0 * initial)), target_(target), log_step_(std::log(initial)) {}

  double update(double accept) {
    ++t_;
    const double eta = 1.0 / (t_ + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept);
    log_step_ = mu_ - std::sqrt(static_cast<double>(t_)) / kGamma * h_bar_;
    const double w = std::pow(static_cast<double>(t_), -kKappa);
    log_step_bar_ = w * log_step_ + (1.0 - w) * log_step_bar_;
    return std::exp(log_step_);
  }
  double final_step() const { return std::exp(log_step_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double mu_;
  double target_;
  double log_step_;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  long t_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in must be in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (!(prob_birth > 0.0 && prob_birth < 1.0)) throw ConfigError("prob_birth must be in (0, 1)");
  if (hmc.leapfrog_steps < 1) throw ConfigError("leapfrog_steps must be at least 1");
  if (!(hmc.step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (!(hmc.step_size_jitter >= 0.0 && hmc.step_size_jitter < 1.0)) {
    throw ConfigError("step_size_jitter must be in [0, 1)");
  }
  if (!(hmc.target_accept > 0.0 && hmc.target_accept < 1.0)) {
    throw ConfigError("target_accept must be in (0, 1)");
  }
  if (!(relocate_local_prob >= 0.0 && relocate_local_prob <= 1.0)) {
    throw ConfigError("relocate_local_prob must be in [0, 1]");
  }
  if (relocate_window < 1) throw ConfigError("relocate_window must be at least 1");
  if (newton_steps < 1) throw ConfigError("newton_steps must be at least 1");
  if (consistency_check_every < 1) throw ConfigError("consistency_check_every must be positive");
}

MoveCounts& MoveCounts::operator+=(const MoveCounts& other) {
  proposed += other.proposed;
  accepted += other.accepted;
  skipped += other.skipped;
  return *this;
}

MoveDiagnostics& MoveDiagnostics::operator+=(const MoveDiagnostics& other) {
  birth += other.birth;
  death += other.death;
  relocate += other.relocate;
  change_set += other.change_set;
  hmc += other.hmc;
  divergences += other.divergences;
  clamp_events += other.clamp_events;
  lambda_fallbacks += other.lambda_fallbacks;
  max_cache_drift = std::max(max_cache_drift, other.max_cache_drift);
  return *this;
}

ModelContext::ModelContext(const MultivariateSeries& series, PriorConfig prior,
                           bool flat_likelihood, int newton_steps)
    : series_(&series),
      prior_(prior),
      layout_(series.dim()),
      flat_(flat_likelihood),
      newton_steps_(newton_steps),
      dfts_(series) {}

const SegmentBasis& ModelContext::basis(int n) {
  auto it = bases_.find(n);
  if (it != bases_.end()) return *it->second;
  const int count = fourier_count(n);
  std::vector<double> freqs(static_cast<std::size_t>(count));
  for (int l = 1; l <= count; ++l) freqs[l - 1] = static_cast<double>(l) / n;
  auto basis = std::make_unique<SegmentBasis>();
  basis->even = basis_matrix(freqs, prior_.basis_size, BasisKind::kEven);
  basis->odd = basis_matrix(freqs, prior_.basis_size, BasisKind::kOdd);
  basis->even_gram = basis->even.transpose() * basis->even;
  basis->odd_gram = basis->odd.transpose() * basis->odd;
  return *bases_.emplace(n, std::move(basis)).first->second;
}

// ---------------------------------------------------------------------------
// State construction and caches

ChainState make_state(ModelContext& ctx, Partition partition, SegmentCoefficients coeffs) {
  const ComponentLayout& layout = ctx.layout();
  if (coeffs.run_map() != component_runs(partition, layout.size())) {
    throw InvalidState("coefficient runs do not match the partition");
  }
  ChainState state;
  state.partition = std::move(partition);
  state.coeffs = std::move(coeffs);
  rebuild_caches(ctx, state);
  return state;
}

void rebuild_caches(ModelContext& ctx, ChainState& state) {
  state.fits.clear();
  for (int q = 0; q < state.partition.segments(); ++q) {
    state.fits.push_back(build_fit(ctx, state.partition, state.coeffs, q));
  }
  sum_loglik(state);
}

void set_block(ModelContext& ctx, ChainState& state, BlockRef block, const Eigen::VectorXd& coef) {
  const ComponentIndex& comp = ctx.layout()[block.component];
  RunCoefficients& rc = state.coeffs.runs[block.component][block.run];
  rc.coef = coef;
  for (int q = rc.run.first; q <= rc.run.last; ++q) {
    SegmentFit& fit = state.fits[q];
    const Eigen::VectorXd fresh = fit.basis->of(comp.is_even()) * coef;
    if (comp.is_theta()) {
      const Eigen::MatrixXcd& y = fit.dft->y;
      for (Eigen::Index l = 0; l < fresh.size(); ++l) {
        const double delta = fresh(l) - fit.values(l, block.component);
        fit.w(l, comp.col) += delta * theta_direction(comp, y(l, comp.row));
      }
    }
    fit.values.col(block.component) = fresh;
    fit.loglik = segment_loglik(ctx, fit);
  }
  sum_loglik(state);
}

double log_prior_total(const ModelContext& ctx, const ChainState& state) {
  const PriorConfig& prior = ctx.prior();
  if (!lambdas_in_range(state.coeffs, prior.kappa)) return -kInf;
  int runs = 0;
  for (const auto& list : state.coeffs.runs) runs += static_cast<int>(list.size());
  return log_prior_partition(state.partition, prior) +
         log_prior_phi(state.partition.phi, ctx.layout().dim()) +
         log_prior_coeffs(state.coeffs, ctx.layout(), prior) - runs * std::log(prior.kappa);
}

double log_posterior(const ModelContext& ctx, const ChainState& state) {
  const double lp = log_prior_total(ctx, state);
  return ctx.flat() ? lp : lp + state.loglik;
}

// ---------------------------------------------------------------------------
// Block conditionals

BlockTarget::BlockTarget(ModelContext& ctx, const ChainState& state, BlockRef block) {
  const ComponentLayout& layout = ctx.layout();
  const ComponentIndex& comp = layout[block.component];
  const RunCoefficients& rc = state.coeffs.runs[block.component][block.run];
  const int size = static_cast<int>(rc.coef.size());
  current_ = rc.coef;
  prior_prec_ = coefficient_prior_precision(comp.is_even(), size, rc.lambda2,
                                            ctx.prior().sigma_alpha2);
  quadratic_ = comp.is_theta();

  if (quadratic_) {
    quad_prec_ = prior_prec_.asDiagonal();
    quad_lin_ = Eigen::VectorXd::Zero(size);
    if (!ctx.flat()) {
      for (int q = rc.run.first; q <= rc.run.last; ++q) {
        const SegmentFit& fit = state.fits[q];
        const Eigen::MatrixXd& basis = fit.basis->of(comp.is_even());
        const Eigen::Index count = basis.rows();
        Eigen::VectorXd a(count);
        Eigen::VectorXd b(count);
        const auto g_col = fit.values.col(layout.log_psi(comp.col));
        for (Eigen::Index l = 0; l < count; ++l) {
          const cdouble v = theta_direction(comp, fit.dft->y(l, comp.row));
          const cdouble z = fit.w(l, comp.col) - fit.values(l, block.component) * v;
          const double e = std::exp(-clamp_log_psi(g_col(l)));
          a(l) = std::norm(v) * e;
          b(l) = (std::conj(z) * v).real() * e;
        }
        quad_prec_.noalias() += 2.0 * basis.transpose() * a.asDiagonal() * basis;
        quad_lin_.noalias() -= 2.0 * basis.transpose() * b;
      }
    }
    mass_ = quad_prec_;
    return;
  }

  mass_ = prior_prec_.asDiagonal();
  if (ctx.flat()) {
    rows_.resize(0, size);
    r_.resize(0);
    return;
  }
  const int total = fourier_total(state.partition, rc.run);
  rows_.resize(total, size);
  r_.resize(total);
  int pos = 0;
  for (int q = rc.run.first; q <= rc.run.last; ++q) {
    const SegmentFit& fit = state.fits[q];
    const Eigen::Index count = fit.basis->even.rows();
    rows_.middleRows(pos, count) = fit.basis->even;
    r_.segment(pos, count) = fit.w.col(comp.col).cwiseAbs2();
    mass_ += fit.basis->even_gram;
    pos += static_cast<int>(count);
  }
}

double BlockTarget::logp(const Eigen::VectorXd& beta) const {
  if (quadratic_) return -0.5 * beta.dot(quad_prec_ * beta) + quad_lin_.dot(beta);
  const double prior = -0.5 * (prior_prec_.array() * beta.array().square()).sum();
  const Eigen::VectorXd g = rows_ * beta;
  double ll = 0.0;
  for (Eigen::Index l = 0; l < g.size(); ++l) {
    const double gc = clamp_log_psi(g(l));
    ll -= gc + r_(l) * std::exp(-gc);
  }
  return ll + prior;
}

Eigen::VectorXd BlockTarget::grad(const Eigen::VectorXd& beta) const {
  if (quadratic_) return quad_lin_ - quad_prec_ * beta;
  const Eigen::VectorXd g = rows_ * beta;
  Eigen::VectorXd d(g.size());
  for (Eigen::Index l = 0; l < g.size(); ++l) {
    const bool inside = std::abs(g(l)) <= kLogPsiClamp;
    d(l) = inside ? r_(l) * std::exp(-g(l)) - 1.0 : 0.0;
  }
  return rows_.transpose() * d - prior_prec_.cwiseProduct(beta);
}

Eigen::MatrixXd BlockTarget::precision(const Eigen::VectorXd& beta) const {
  if (quadratic_) return quad_prec_;
  const Eigen::VectorXd g = rows_ * beta;
  Eigen::VectorXd wt(g.size());
  for (Eigen::Index l = 0; l < g.size(); ++l) {
    const bool inside = std::abs(g(l)) <= kLogPsiClamp;
    wt(l) = inside ? r_(l) * std::exp(-g(l)) : 0.0;
  }
  Eigen::MatrixXd prec = rows_.transpose() * wt.asDiagonal() * rows_;
  prec.diagonal() += prior_prec_;
  return prec;
}

void BlockTarget::laplace(int newton_steps, Eigen::VectorXd& mean, Eigen::MatrixXd& prec) const {
  if (quadratic_) {
    prec = quad_prec_;
    mean = prec.llt().solve(quad_lin_);
    return;
  }
  Eigen::VectorXd beta = current_;
  double lp = logp(beta);
  for (int it = 0; it < newton_steps; ++it) {
    const Eigen::VectorXd direction = precision(beta).llt().solve(grad(beta));
    double step = 1.0;
    bool improved = false;
    while (step > 1e-8) {
      const Eigen::VectorXd cand = beta + step * direction;
      const double lp_cand = logp(cand);
      if (std::isfinite(lp_cand) && lp_cand >= lp) {
        beta = cand;
        lp = lp_cand;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  mean = beta;
  prec = precision(beta);
}

double propose_blocks(ModelContext& ctx, ChainState& state, std::span<const BlockRef> blocks,
                      Rng* rng, const SegmentCoefficients* target) {
  double log_q = 0.0;
  for (const BlockRef& block : blocks) {
    const BlockTarget cond(ctx, state, block);
    Eigen::VectorXd mean;
    Eigen::MatrixXd prec;
    cond.laplace(ctx.newton_steps(), mean, prec);
    const Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) throw InvalidState("proposal precision not positive definite");
    const Eigen::MatrixXd lower = llt.matrixL();
    Eigen::VectorXd beta;
    if (rng != nullptr) {
      const Eigen::VectorXd z = standard_normal(*rng, cond.size());
      beta = mean + lower.transpose().triangularView<Eigen::Upper>().solve(z);
    } else {
      beta = target->runs[block.component][block.run].coef;
    }
    const Eigen::VectorXd scaled = lower.transpose() * (beta - mean);
    log_q += lower.diagonal().array().log().sum() - 0.5 * cond.size() * kLog2Pi -
             0.5 * scaled.squaredNorm();
    set_block(ctx, state, block, beta);
  }
  return log_q;
}

std::vector<BlockRef> order_blocks(const ComponentLayout& layout, std::vector<BlockRef> blocks) {
  auto key = [&](const BlockRef& b) {
    const ComponentIndex& comp = layout[b.component];
    const int kind = comp.kind == ComponentKind::kReTheta   ? 0
                     : comp.kind == ComponentKind::kImTheta ? 1
                                                            : 2;
    return std::make_tuple(comp.col, comp.is_theta() ? 0 : 1, comp.row, kind, b.run);
  };
  std::sort(blocks.begin(), blocks.end(),
            [&](const BlockRef& a, const BlockRef& b) { return key(a) < key(b); });
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  return blocks;
}

namespace {

void polish_blocks(ModelContext& ctx, ChainState& state, const std::vector<BlockRef>& blocks,
                   int sweeps) {
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (const BlockRef& block : blocks) {
      const BlockTarget cond(ctx, state, block);
      Eigen::VectorXd mean;
      Eigen::MatrixXd prec;
      cond.laplace(ctx.newton_steps(), mean, prec);
      set_block(ctx, state, block, mean);
    }
  }
}

Partition single_run_partition(int length, int start, int end, int n_components) {
  Partition p;
  p.breaks.push_back(0);
  if (start > 0) p.breaks.push_back(start);
  if (end < length) p.breaks.push_back(end);
  p.breaks.push_back(length);
  p.phi.assign(p.breaks.size() - 2, full_change_set(n_components));
  return p;
}

SegmentCoefficients copy_single(const Partition& p, const SegmentCoefficients& single,
                                int n_components, int basis_size) {
  SegmentCoefficients coeffs =
      SegmentCoefficients::zeros(component_runs(p, n_components), basis_size);
  for (int c = 0; c < n_components; ++c)
    for (auto& rc : coeffs.runs[c]) {
      rc.coef = single.runs[c][0].coef;
      rc.lambda2 = single.runs[c][0].lambda2;
    }
  return coeffs;
}

// Laplace approximation to the log evidence of [start, end) fitted on its
// own, with smoothing parameters held at the single-segment values.
double segment_evidence(ModelContext& ctx, const ChainState& single, int start, int end) {
  const ComponentLayout& layout = ctx.layout();
  const PriorConfig& prior = ctx.prior();
  Partition p = single_run_partition(ctx.length(), start, end, layout.size());
  const int q = start > 0 ? 1 : 0;
  ChainState state = make_state(
      ctx, p, copy_single(p, single.coeffs, layout.size(), ctx.basis_size()));
  std::vector<BlockRef> blocks;
  for (int c = 0; c < layout.size(); ++c) blocks.push_back({c, q});
  blocks = order_blocks(layout, std::move(blocks));
  polish_blocks(ctx, state, blocks, 2);
  double ev = state.fits[q].loglik;
  for (const BlockRef& block : blocks) {
    const auto& rc = state.coeffs.runs[block.component][block.run];
    ev += log_prior_block(rc.coef, layout[block.component].is_even(), rc.lambda2,
                          prior.sigma_alpha2);
    const BlockTarget cond(ctx, state, block);
    const Eigen::LLT<Eigen::MatrixXd> llt(cond.precision(rc.coef));
    ev += 0.5 * cond.size() * kLog2Pi -
          llt.matrixLLT().diagonal().array().log().sum();
  }
  return ev;
}

// Greedy binary segmentation on the approximate evidence, every breakpoint
// changing all components.
Partition search_partition(ModelContext& ctx, const ChainState& single) {
  const PriorConfig& prior = ctx.prior();
  const int n_components = ctx.layout().size();
  const int step = std::max(1, prior.n_min / 2);
  std::map<std::pair<int, int>, double> memo;
  auto evidence = [&](int a, int b) {
    const auto key = std::make_pair(a, b);
    auto it = memo.find(key);
    if (it == memo.end()) it = memo.emplace(key, segment_evidence(ctx, single, a, b)).first;
    return it->second;
  };
  Partition current = Partition::single(ctx.length());
  while (current.segments() < prior.max_segments) {
    const double base_prior = log_prior_partition(current, prior);
    double best_gain = 0.0;
    Partition best;
    for (int q = 0; q < current.segments(); ++q) {
      const int a = current.segment_start(q);
      const int b = current.segment_end(q);
      if (b - a < 2 * prior.n_min) continue;
      const double parent = evidence(a, b);
      for (int pos = a + prior.n_min; pos <= b - prior.n_min; pos += step) {
        Partition cand = current;
        cand.breaks.insert(cand.breaks.begin() + q + 1, pos);
        cand.phi.insert(cand.phi.begin() + q, full_change_set(n_components));
        const double gain = evidence(a, pos) + evidence(pos, b) - parent +
                            log_prior_partition(cand, prior) - base_prior -
                            log_nonempty_subsets(n_components);
        if (gain > best_gain) {
          best_gain = gain;
          best = std::move(cand);
        }
      }
    }
    if (best.breaks.empty()) break;
    current = std::move(best);
  }
  return current;
}

}  // namespace

ChainState initial_state(ModelContext& ctx, bool search) {
  const ComponentLayout& layout = ctx.layout();
  Partition partition = Partition::single(ctx.length());
  SegmentCoefficients coeffs =
      SegmentCoefficients::zeros(component_runs(partition, layout.size()), ctx.basis_size());
  if (!ctx.flat()) {
    const auto dft = ctx.dft(0, ctx.length());
    for (int k = 0; k < layout.dim(); ++k) {
      const double power = dft->y.col(k).cwiseAbs2().mean();
      const double level = power > 0.0 ? std::log(power) : -kLogPsiClamp;
      coeffs.runs[layout.log_psi(k)][0].coef(0) = std::clamp(level, -kLogPsiClamp, kLogPsiClamp);
    }
  }
  ChainState state = make_state(ctx, std::move(partition), std::move(coeffs));
  if (ctx.flat()) return state;
  polish_blocks(ctx, state, order_blocks(layout, all_blocks(state)), 3);
  if (!search || ctx.prior().max_segments < 2) return state;

  Partition found = search_partition(ctx, state);
  if (found.segments() == 1) return state;
  ChainState split = make_state(
      ctx, found, copy_single(found, state.coeffs, layout.size(), ctx.basis_size()));
  polish_blocks(ctx, split, order_blocks(layout, all_blocks(split)), 3);
  return split;
}

// ---------------------------------------------------------------------------
// Structural moves

ChainState split_state(ModelContext& ctx, const ChainState& state, int segment, int position,
                       ChangeSet phi, std::span<const double> u) {
  const Partition& old = state.partition;
  if (position <= old.segment_start(segment) || position >= old.segment_end(segment)) {
    throw InvalidArgument("split position outside the segment");
  }
  if (static_cast<int>(u.size()) != popcount(phi)) {
    throw InvalidArgument("one split variable per changing component required");
  }
  Partition partition = old;
  partition.breaks.insert(partition.breaks.begin() + segment + 1, position);
  partition.phi.insert(partition.phi.begin() + segment, phi);

  SegmentCoefficients coeffs;
  coeffs.basis_size = state.coeffs.basis_size;
  coeffs.runs.resize(state.coeffs.runs.size());
  std::size_t next_u = 0;
  for (std::size_t c = 0; c < state.coeffs.runs.size(); ++c) {
    const bool changes = contains(phi, static_cast<int>(c));
    for (const RunCoefficients& rc : state.coeffs.runs[c]) {
      if (rc.run.last < segment) {
        coeffs.runs[c].push_back(rc);
      } else if (rc.run.first > segment) {
        RunCoefficients shifted = rc;
        ++shifted.run.first;
        ++shifted.run.last;
        coeffs.runs[c].push_back(shifted);
      } else if (changes) {
        const double uc = u[next_u++];
        RunCoefficients left = rc;
        RunCoefficients right = rc;
        left.run = {rc.run.first, segment};
        right.run = {segment + 1, rc.run.last + 1};
        left.lambda2 = rc.lambda2 * uc / (1.0 - uc);
        right.lambda2 = rc.lambda2 * (1.0 - uc) / uc;
        coeffs.runs[c].push_back(left);
        coeffs.runs[c].push_back(right);
      } else {
        RunCoefficients grown = rc;
        ++grown.run.last;
        coeffs.runs[c].push_back(grown);
      }
    }
  }
  ChainState out = make_state(ctx, std::move(partition), std::move(coeffs));
  out.iteration = state.iteration;
  return out;
}

ChainState merge_state(ModelContext& ctx, const ChainState& state, int breakpoint) {
  const Partition& old = state.partition;
  if (breakpoint < 1 || breakpoint >= old.segments()) {
    throw InvalidArgument("breakpoint index out of range");
  }
  const ChangeSet phi = old.phi[breakpoint - 1];
  Partition partition = old;
  partition.breaks.erase(partition.breaks.begin() + breakpoint);
  partition.phi.erase(partition.phi.begin() + (breakpoint - 1));

  SegmentCoefficients coeffs;
  coeffs.basis_size = state.coeffs.basis_size;
  coeffs.runs.resize(state.coeffs.runs.size());
  for (std::size_t c = 0; c < state.coeffs.runs.size(); ++c) {
    const auto& list = state.coeffs.runs[c];
    for (std::size_t r = 0; r < list.size(); ++r) {
      const RunCoefficients& rc = list[r];
      if (rc.run.last < breakpoint - 1) {
        coeffs.runs[c].push_back(rc);
      } else if (rc.run.first > breakpoint) {
        RunCoefficients shifted = rc;
        --shifted.run.first;
        --shifted.run.last;
        coeffs.runs[c].push_back(shifted);
      } else if (rc.run.last == breakpoint - 1 && contains(phi, static_cast<int>(c))) {
        const RunCoefficients& right = list[r + 1];
        const double wl = fourier_total(old, rc.run);
        const double wr = fourier_total(old, right.run);
        RunCoefficients merged;
        merged.run = {rc.run.first, right.run.last - 1};
        merged.coef = (wl * rc.coef + wr * right.coef) / (wl + wr);
        merged.lambda2 = std::sqrt(rc.lambda2 * right.lambda2);
        coeffs.runs[c].push_back(merged);
        ++r;
      } else {
        RunCoefficients shrunk = rc;
        --shrunk.run.last;
        coeffs.runs[c].push_back(shrunk);
      }
    }
  }
  ChainState out = make_state(ctx, std::move(partition), std::move(coeffs));
  out.iteration = state.iteration;
  return out;
}

ChainState relocate_state(ModelContext& ctx, const ChainState& state, int breakpoint,
                          int position) {
  Partition partition = state.partition;
  if (breakpoint < 1 || breakpoint >= partition.segments()) {
    throw InvalidArgument("breakpoint index out of range");
  }
  partition.breaks[breakpoint] = position;
  ChainState out = make_state(ctx, std::move(partition), state.coeffs);
  out.iteration = state.iteration;
  return out;
}

std::vector<BlockRef> split_blocks(const ComponentLayout& layout, const ChainState& split,
                                   int segment, ChangeSet phi) {
  std::vector<BlockRef> blocks;
  for (int c = 0; c < layout.size(); ++c) {
    if (!contains(phi, c)) continue;
    blocks.push_back({c, split.coeffs.run_of(c, segment)});
    blocks.push_back({c, split.coeffs.run_of(c, segment + 1)});
  }
  return order_blocks(layout, std::move(blocks));
}

std::vector<BlockRef> merge_blocks(const ComponentLayout& layout, const ChainState& merged,
                                   int breakpoint, ChangeSet phi) {
  std::vector<BlockRef> blocks;
  for (int c = 0; c < layout.size(); ++c) {
    if (contains(phi, c)) blocks.push_back({c, merged.coeffs.run_of(c, breakpoint - 1)});
  }
  return order_blocks(layout, std::move(blocks));
}

double birth_probability(int m, int max_segments, double prob_birth) {
  if (m >= max_segments) return 0.0;
  if (m <= 1) return 1.0;
  return prob_birth;
}

int splittable_count(const Partition& partition, int n_min) {
  int count = 0;
  for (int q = 0; q < partition.segments(); ++q) {
    if (partition.segment_length(q) >= 2 * n_min) ++count;
  }
  return count;
}

namespace {

// Log of the proposal probability of the discrete part of a birth that
// splits `segment` of `parent` (segment choice, position choice, phi).
double log_birth_choice(const ModelContext& ctx, const Partition& parent, int segment,
                        const SamplerConfig& cfg) {
  const int n_min = ctx.prior().n_min;
  const int positions = parent.segment_length(segment) - 2 * n_min + 1;
  return std::log(birth_probability(parent.segments(), ctx.prior().max_segments, cfg.prob_birth)) -
         std::log(static_cast<double>(splittable_count(parent, n_min))) -
         std::log(static_cast<double>(positions)) - log_nonempty_subsets(ctx.layout().size());
}

// Log probability of choosing one particular breakpoint for a death.
double log_death_choice(const ModelContext& ctx, const Partition& parent, const SamplerConfig& cfg) {
  const int m = parent.segments();
  return std::log(1.0 - birth_probability(m, ctx.prior().max_segments, cfg.prob_birth)) -
         std::log(static_cast<double>(m - 1));
}

bool accept(Rng& rng, double log_ratio) {
  if (std::isnan(log_ratio)) return false;
  return log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio;
}

ChangeSet draw_change_set(Rng& rng, int n_components) {
  const ChangeSet all = full_change_set(n_components);
  std::uniform_int_distribution<ChangeSet> dist(1, all);
  return dist(rng);
}

}  // namespace

MoveOutcome birth_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg, Rng& rng,
                       MoveDiagnostics& diag) {
  MoveOutcome out;
  const PriorConfig& prior = ctx.prior();
  const Partition& parent = state.partition;
  const int m = parent.segments();
  std::vector<int> splittable;
  for (int q = 0; q < m; ++q) {
    if (parent.segment_length(q) >= 2 * prior.n_min) splittable.push_back(q);
  }
  if (m >= prior.max_segments || splittable.empty()) {
    ++diag.birth.skipped;
    out.skipped = true;
    return out;
  }
  ++diag.birth.proposed;
  const int segment = splittable[uniform_int(rng, 0, static_cast<int>(splittable.size()) - 1)];
  const int position = uniform_int(rng, parent.segment_start(segment) + prior.n_min,
                                   parent.segment_end(segment) - prior.n_min);
  const ComponentLayout& layout = ctx.layout();
  const ChangeSet phi = draw_change_set(rng, layout.size());
  std::vector<double> u;
  double log_jac = 0.0;
  for (int c = 0; c < layout.size(); ++c) {
    if (!contains(phi, c)) continue;
    double uc = uniform01(rng);
    while (uc <= 0.0) uc = uniform01(rng);
    u.push_back(uc);
    log_jac += log_jacobian(state.coeffs.runs[c][state.coeffs.run_of(c, segment)].lambda2, uc);
  }

  ChainState proposal = split_state(ctx, state, segment, position, phi, u);
  if (!lambdas_in_range(proposal.coeffs, prior.kappa)) {
    out.log_accept = -kInf;
    return out;
  }
  const auto blocks = split_blocks(layout, proposal, segment, phi);
  const double log_q_fwd = propose_blocks(ctx, proposal, blocks, &rng, nullptr);

  ChainState reverse = merge_state(ctx, proposal, segment + 1);
  const auto rev_blocks = merge_blocks(layout, reverse, segment + 1, phi);
  const double log_q_rev = propose_blocks(ctx, reverse, rev_blocks, nullptr, &state.coeffs);

  out.log_accept = log_posterior(ctx, proposal) - log_posterior(ctx, state) +
                   log_death_choice(ctx, proposal.partition, cfg) + log_q_rev -
                   log_birth_choice(ctx, parent, segment, cfg) - log_q_fwd + log_jac;
  if (accept(rng, out.log_accept)) {
    out.accepted = true;
    ++diag.birth.accepted;
    state = std::move(proposal);
  }
  return out;
}

MoveOutcome death_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg, Rng& rng,
                       MoveDiagnostics& diag) {
  MoveOutcome out;
  const int m = state.partition.segments();
  if (m <= 1) {
    ++diag.death.skipped;
    out.skipped = true;
    return out;
  }
  ++diag.death.proposed;
  const ComponentLayout& layout = ctx.layout();
  const int breakpoint = uniform_int(rng, 1, m - 1);
  const ChangeSet phi = state.partition.phi[breakpoint - 1];
  const int position = state.partition.breaks[breakpoint];

  ChainState proposal = merge_state(ctx, state, breakpoint);
  const auto blocks = merge_blocks(layout, proposal, breakpoint, phi);
  const double log_q_fwd = propose_blocks(ctx, proposal, blocks, &rng, nullptr);

  // Split variables that map the merged lambda^2 back onto the current pair.
  std::vector<double> u;
  double log_jac = 0.0;
  for (int c = 0; c < layout.size(); ++c) {
    if (!contains(phi, c)) continue;
    const auto& list = state.coeffs.runs[c];
    const int r = state.coeffs.run_of(c, breakpoint - 1);
    const double left = std::sqrt(list[r].lambda2);
    const double right = std::sqrt(list[r + 1].lambda2);
    const double uc = left / (left + right);
    u.push_back(uc);
    log_jac += log_jacobian(left * right, uc);
  }
  ChainState reverse = split_state(ctx, proposal, breakpoint - 1, position, phi, u);
  const auto rev_blocks = split_blocks(layout, reverse, breakpoint - 1, phi);
  const double log_q_rev = propose_blocks(ctx, reverse, rev_blocks, nullptr, &state.coeffs);

  out.log_accept = log_posterior(ctx, proposal) - log_posterior(ctx, state) +
                   log_birth_choice(ctx, proposal.partition, breakpoint - 1, cfg) + log_q_rev -
                   log_death_choice(ctx, state.partition, cfg) - log_q_fwd - log_jac;
  if (accept(rng, out.log_accept)) {
    out.accepted = true;
    ++diag.death.accepted;
    state = std::move(proposal);
  }
  return out;
}

namespace {

double log_relocation_density(int from, int to, int lo, int hi, const SamplerConfig& cfg) {
  const int window_lo = std::max(lo, from - cfg.relocate_window);
  const int window_hi = std::min(hi, from + cfg.relocate_window);
  double density = (1.0 - cfg.relocate_local_prob) / (hi - lo + 1);
  if (std::abs(to - from) <= cfg.relocate_window) {
    density += cfg.relocate_local_prob / (window_hi - window_lo + 1);
  }
  return std::log(density);
}

std::vector<BlockRef> touching_blocks(const ComponentLayout& layout, const ChainState& state,
                                      int breakpoint) {
  std::vector<BlockRef> blocks;
  for (int c = 0; c < layout.size(); ++c) {
    blocks.push_back({c, state.coeffs.run_of(c, breakpoint - 1)});
    blocks.push_back({c, state.coeffs.run_of(c, breakpoint)});
  }
  return order_blocks(layout, std::move(blocks));
}

}  // namespace

MoveOutcome relocate_to(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                        int breakpoint, int position, Rng& rng, MoveDiagnostics& diag) {
  MoveOutcome out;
  const int n_min = ctx.prior().n_min;
  const Partition& part = state.partition;
  const int lo = part.breaks[breakpoint - 1] + n_min;
  const int hi = part.breaks[breakpoint + 1] - n_min;
  if (position < lo || position > hi) throw InvalidArgument("relocation target violates n_min");
  ++diag.relocate.proposed;
  const int old_position = part.breaks[breakpoint];

  ChainState proposal = relocate_state(ctx, state, breakpoint, position);
  const auto blocks = touching_blocks(ctx.layout(), proposal, breakpoint);
  const double log_q_fwd = propose_blocks(ctx, proposal, blocks, &rng, nullptr);

  ChainState reverse = relocate_state(ctx, proposal, breakpoint, old_position);
  const double log_q_rev = propose_blocks(ctx, reverse, blocks, nullptr, &state.coeffs);

  out.log_accept = log_posterior(ctx, proposal) - log_posterior(ctx, state) +
                   log_relocation_density(position, old_position, lo, hi, cfg) -
                   log_relocation_density(old_position, position, lo, hi, cfg) + log_q_rev -
                   log_q_fwd;
  if (accept(rng, out.log_accept)) {
    out.accepted = true;
    ++diag.relocate.accepted;
    state = std::move(proposal);
  }
  return out;
}

MoveOutcome relocate_move(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                          Rng& rng, MoveDiagnostics& diag) {
  const int m = state.partition.segments();
  if (m <= 1) {
    ++diag.relocate.skipped;
    return {true, false, 0.0};
  }
  const int n_min = ctx.prior().n_min;
  const int breakpoint = uniform_int(rng, 1, m - 1);
  const Partition& part = state.partition;
  const int lo = part.breaks[breakpoint - 1] + n_min;
  const int hi = part.breaks[breakpoint + 1] - n_min;
  if (lo > hi) {
    ++diag.relocate.skipped;
    return {true, false, 0.0};
  }
  const int current = part.breaks[breakpoint];
  int position;
  if (uniform01(rng) < cfg.relocate_local_prob) {
    position = uniform_int(rng, std::max(lo, current - cfg.relocate_window),
                           std::min(hi, current + cfg.relocate_window));
  } else {
    position = uniform_int(rng, lo, hi);
  }
  return relocate_to(ctx, state, cfg, breakpoint, position, rng, diag);
}

ChainState split_component(ModelContext& ctx, const ChainState& state, int breakpoint,
                           int component, double u) {
  Partition partition = state.partition;
  if (breakpoint < 1 || breakpoint >= partition.segments()) {
    throw InvalidArgument("breakpoint index out of range");
  }
  ChangeSet& phi = partition.phi[breakpoint - 1];
  if (contains(phi, component)) throw InvalidArgument("component already changes there");
  phi |= ChangeSet{1} << component;

  SegmentCoefficients coeffs = state.coeffs;
  auto& list = coeffs.runs[component];
  const int r = state.coeffs.run_of(component, breakpoint);
  RunCoefficients left = list[r];
  RunCoefficients right = list[r];
  left.run.last = breakpoint - 1;
  right.run.first = breakpoint;
  left.lambda2 = list[r].lambda2 * u / (1.0 - u);
  right.lambda2 = list[r].lambda2 * (1.0 - u) / u;
  list[r] = left;
  list.insert(list.begin() + r + 1, right);
  ChainState out = make_state(ctx, std::move(partition), std::move(coeffs));
  out.iteration = state.iteration;
  return out;
}

ChainState merge_component(ModelContext& ctx, const ChainState& state, int breakpoint,
                           int component) {
  Partition partition = state.partition;
  if (breakpoint < 1 || breakpoint >= partition.segments()) {
    throw InvalidArgument("breakpoint index out of range");
  }
  ChangeSet& phi = partition.phi[breakpoint - 1];
  if (!contains(phi, component)) throw InvalidArgument("component does not change there");
  phi &= ~(ChangeSet{1} << component);
  if (phi == 0) throw InvalidArgument("change-set would become empty");

  SegmentCoefficients coeffs = state.coeffs;
  auto& list = coeffs.runs[component];
  const int r = state.coeffs.run_of(component, breakpoint - 1);
  const RunCoefficients& left = list[r];
  const RunCoefficients& right = list[r + 1];
  const double wl = fourier_total(state.partition, left.run);
  const double wr = fourier_total(state.partition, right.run);
  RunCoefficients merged;
  merged.run = {left.run.first, right.run.last};
  merged.coef = (wl * left.coef + wr * right.coef) / (wl + wr);
  merged.lambda2 = std::sqrt(left.lambda2 * right.lambda2);
  list[r] = merged;
  list.erase(list.begin() + r + 1);
  ChainState out = make_state(ctx, std::move(partition), std::move(coeffs));
  out.iteration = state.iteration;
  return out;
}

MoveOutcome toggle_component(ModelContext& ctx, ChainState& state, int breakpoint, int component,
                             Rng& rng, MoveDiagnostics& diag) {
  MoveOutcome out;
  const ChangeSet phi = state.partition.phi[breakpoint - 1];
  const bool adding = !contains(phi, component);
  if (!adding && popcount(phi) == 1) {
    ++diag.change_set.skipped;
    out.skipped = true;
    return out;
  }
  ++diag.change_set.proposed;
  const ComponentLayout& layout = ctx.layout();

  // Forward: children (adding) or the merged run (removing) are drawn; the
  // reverse density is evaluated at the current coefficients.
  double log_ratio = 0.0;
  ChainState proposal;
  if (adding) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    const double lambda2 = state.coeffs.runs[component][state.coeffs.run_of(component, breakpoint)].lambda2;
    proposal = split_component(ctx, state, breakpoint, component, u);
    if (!lambdas_in_range(proposal.coeffs, ctx.prior().kappa)) {
      out.log_accept = -kInf;
      return out;
    }
    const std::vector<BlockRef> blocks =
        order_blocks(layout, {{component, proposal.coeffs.run_of(component, breakpoint - 1)},
                              {component, proposal.coeffs.run_of(component, breakpoint)}});
    const double log_q_fwd = propose_blocks(ctx, proposal, blocks, &rng, nullptr);
    ChainState reverse = merge_component(ctx, proposal, breakpoint, component);
    const BlockRef merged{component, reverse.coeffs.run_of(component, breakpoint)};
    const double log_q_rev = propose_blocks(ctx, reverse, {&merged, 1}, nullptr, &state.coeffs);
    log_ratio = log_q_rev - log_q_fwd + log_jacobian(lambda2, u);
  } else {
    const auto& list = state.coeffs.runs[component];
    const int r = state.coeffs.run_of(component, breakpoint - 1);
    const double left = std::sqrt(list[r].lambda2);
    const double right = std::sqrt(list[r + 1].lambda2);
    const double u = left / (left + right);
    proposal = merge_component(ctx, state, breakpoint, component);
    const BlockRef merged{component, proposal.coeffs.run_of(component, breakpoint)};
    const double log_q_fwd = propose_blocks(ctx, proposal, {&merged, 1}, &rng, nullptr);
    ChainState reverse = split_component(ctx, proposal, breakpoint, component, u);
    const std::vector<BlockRef> blocks =
        order_blocks(layout, {{component, reverse.coeffs.run_of(component, breakpoint - 1)},
                              {component, reverse.coeffs.run_of(component, breakpoint)}});
    const double log_q_rev = propose_blocks(ctx, reverse, blocks, nullptr, &state.coeffs);
    log_ratio = log_q_rev - log_q_fwd - log_jacobian(left * right, u);
  }
  out.log_accept = log_posterior(ctx, proposal) - log_posterior(ctx, state) + log_ratio;
  if (accept(rng, out.log_accept)) {
    out.accepted = true;
    ++diag.change_set.accepted;
    state = std::move(proposal);
  }
  return out;
}

MoveOutcome change_set_move(ModelContext& ctx, ChainState& state, const SamplerConfig&, Rng& rng,
                            MoveDiagnostics& diag) {
  const int m = state.partition.segments();
  if (m <= 1) {
    ++diag.change_set.skipped;
    return {true, false, 0.0};
  }
  const int breakpoint = uniform_int(rng, 1, m - 1);
  const int component = uniform_int(rng, 0, ctx.layout().size() - 1);
  return toggle_component(ctx, state, breakpoint, component, rng, diag);
}

// ---------------------------------------------------------------------------
// Within-model continuous updates

HmcTrajectory hmc_trajectory(const BlockTarget& target, double step_size, int steps,
                             const Eigen::VectorXd& z) {
  const Eigen::LLT<Eigen::MatrixXd> llt(target.mass());
  if (llt.info() != Eigen::Success) throw InvalidState("HMC mass matrix not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  Eigen::VectorXd beta = target.current();
  Eigen::VectorXd p = lower * z;
  const double h0 = -target.logp(beta) + 0.5 * z.squaredNorm();

  p += 0.5 * step_size * target.grad(beta);
  for (int i = 0; i < steps; ++i) {
    beta += step_size * llt.solve(p);
    const Eigen::VectorXd g = target.grad(beta);
    p += (i + 1 < steps ? step_size : 0.5 * step_size) * g;
  }
  const Eigen::VectorXd whitened = lower.triangularView<Eigen::Lower>().solve(p);
  const double h1 = -target.logp(beta) + 0.5 * whitened.squaredNorm();
  HmcTrajectory out;
  out.proposal = std::move(beta);
  out.delta_h = std::isfinite(h1) ? h1 - h0 : kInf;
  return out;
}

double hmc_update(ModelContext& ctx, ChainState& state, const SamplerConfig& cfg,
                  double step_size, Rng& rng, MoveDiagnostics& diag) {
  std::vector<BlockRef> blocks = all_blocks(state);
  std::shuffle(blocks.begin(), blocks.end(), rng);
  const double jitter = cfg.hmc.step_size_jitter;
  double accept_sum = 0.0;
  for (const BlockRef& block : blocks) {
    ++diag.hmc.proposed;
    const BlockTarget target(ctx, state, block);
    const double eps = step_size * (1.0 - jitter + 2.0 * jitter * uniform01(rng));
    const Eigen::VectorXd z = standard_normal(rng, target.size());
    const HmcTrajectory traj = hmc_trajectory(target, eps, cfg.hmc.leapfrog_steps, z);
    const double u = uniform01(rng);
    if (!std::isfinite(traj.delta_h) || std::abs(traj.delta_h) > kDivergence ||
        !traj.proposal.allFinite()) {
      ++diag.divergences;
      continue;
    }
    const double prob = std::min(1.0, std::exp(-traj.delta_h));
    accept_sum += prob;
    if (u < prob) {
      ++diag.hmc.accepted;
      set_block(ctx, state, block, traj.proposal);
    }
  }
  return blocks.empty() ? 1.0 : accept_sum / static_cast<double>(blocks.size());
}

void gibbs_lambda_update(ModelContext& ctx, ChainState& state, Rng& rng, MoveDiagnostics& diag) {
  const ComponentLayout& layout = ctx.layout();
  for (std::size_t c = 0; c < state.coeffs.runs.size(); ++c) {
    const bool even = layout[static_cast<int>(c)].is_even();
    for (RunCoefficients& rc : state.coeffs.runs[c]) {
      bool fallback = false;
      rc.lambda2 = sample_lambda_conditional(lambda_scaled_part(rc.coef, even),
                                             ctx.prior().kappa, rng, &fallback);
      if (fallback) ++diag.lambda_fallbacks;
    }
  }
}

// ---------------------------------------------------------------------------

ChainResult run_chain(const MultivariateSeries& series, const PriorConfig& prior,
                      const SamplerConfig& cfg) {
  cfg.validate();
  prior.validate(series.length());
  series.require_min_length(prior.n_min);

  const auto started = std::chrono::steady_clock::now();
  ModelContext ctx(series, prior, cfg.flat_likelihood, cfg.newton_steps);
  Rng rng(cfg.seed);
  ChainResult result;
  MoveDiagnostics& diag = result.diagnostics;
  ChainState state = initial_state(ctx, cfg.initial_search);

  double step = cfg.hmc.step_size;
  StepSizeAdapter adapter(step, cfg.hmc.target_accept);
  const bool adapt = cfg.hmc.adapt && cfg.burn_in > 0;
  result.segment_trace.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 1; it <= cfg.iterations; ++it) {
    state.iteration = it;
    const int m = state.partition.segments();
    if (prior.max_segments > 1) {
      if (uniform01(rng) < birth_probability(m, prior.max_segments, cfg.prob_birth)) {
        birth_move(ctx, state, cfg, rng, diag);
      } else {
        death_move(ctx, state, cfg, rng, diag);
      }
    }
    if (state.partition.segments() > 1) {
      relocate_move(ctx, state, cfg, rng, diag);
      if (cfg.change_set_moves) change_set_move(ctx, state, cfg, rng, diag);
    }
    const double accept_rate = hmc_update(ctx, state, cfg, step, rng, diag);
    gibbs_lambda_update(ctx, state, rng, diag);

    if (adapt && it <= cfg.burn_in) {
      step = adapter.update(accept_rate);
      if (it == cfg.burn_in) step = adapter.final_step();
    }
    if (it % cfg.consistency_check_every == 0) {
      if (!ctx.flat()) {
        const double fresh = whittle_loglik(local_dft(series, state.partition), state.coeffs,
                                            state.partition);
        diag.max_cache_drift = std::max(diag.max_cache_drift, std::abs(fresh - state.loglik));
      }
      rebuild_caches(ctx, state);
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      result.snapshots.push_back({it, state.partition, state.coeffs, state.loglik});
    }
    result.segment_trace.push_back(state.partition.segments());
  }
  diag.clamp_events = ctx.clamp_events;
  result.final_step_size = step;
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace tvspec
