#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dsvrg/data_alloc.hpp"
#include "dsvrg/error.hpp"
#include "dsvrg/objective.hpp"
#include "dsvrg/svrg.hpp"

namespace dsvrg {

struct Checkpoint {
  Index stage = 0;
  Index rounds = 0;
  Index vectors = 0;
  Index runtime = 0;
  double gap = 0.0;
};

struct MetricsLedger {
  Index rounds = 0;
  Index vectors_sent = 0;
  Index parallel_runtime = 0;
  std::vector<Index> grad_evals;  // per machine
  std::vector<Checkpoint> gap_trace;

  Index total_grad_evals() const {
    Index s = 0;
    for (Index g : grad_evals) s += g;
    return s;
  }
};

/// How a broadcast of one vector to m machines is charged.
enum class BroadcastCost {
  PerReceiver,  // m vectors
  Single,       // 1 vector
};

/// Sees every vector a machine or the center produces, plus round barriers.
class RoundProbe {
 public:
  virtual ~RoundProbe() = default;
  virtual void observe(const Vector& v) = 0;
  virtual void round_completed(Index rounds) = 0;
};

/// Simulated machines plus center. Holds the consumable multi-sets, the
/// active-machine cursor and the metrics ledger.
class Cluster {
 public:
  explicit Cluster(const AllocationPlan& plan, BroadcastCost cost = BroadcastCost::PerReceiver)
      : partition_(plan.partition), R_(plan.multisets), owner_(plan.partition.owners()), cost_(cost) {
    const Index m = partition_.machines();
    extra_.resize(m);
    for (Index j = 0; j < m; ++j) {
      auto c = R_.contents(j);
      extra_[j].assign(c.begin(), c.end());
      std::sort(extra_[j].begin(), extra_[j].end());
      extra_[j].erase(std::unique(extra_[j].begin(), extra_[j].end()), extra_[j].end());
    }
    ledger_.grad_evals.assign(m, 0);
  }

  Index machines() const { return partition_.machines(); }
  Index size() const { return partition_.size(); }
  Index active() const { return k_; }
  void set_active(Index k) { k_ = k; }
  Multisets& multisets() { return R_; }
  const Multisets& multisets() const { return R_; }
  const Partition& partition() const { return partition_; }
  MetricsLedger& ledger() { return ledger_; }
  const MetricsLedger& ledger() const { return ledger_; }
  void set_probe(RoundProbe* probe) { probe_ = probe; }
  RoundProbe* probe() const { return probe_; }

  bool resident(Index j, Index i) const {
    if (i >= owner_.size()) return false;
    if (owner_[i] == j) return true;
    return std::binary_search(extra_[j].begin(), extra_[j].end(), static_cast<FnIndex>(i));
  }

  void guard(Index j, Index i) const {
    if (!resident(j, i))
      fail(ErrorCode::AccessViolation, "machine " + std::to_string(j) + " touched function " + std::to_string(i));
  }

  Index broadcast_vectors() const { return cost_ == BroadcastCost::PerReceiver ? machines() : 1; }

  void add_round() {
    ++ledger_.rounds;
    if (probe_) probe_->round_completed(ledger_.rounds);
  }
  void add_vectors(Index v) { ledger_.vectors_sent += v; }
  void observe(const Vector& v) const {
    if (probe_) probe_->observe(v);
  }

  /// First machine at or after k still holding samples; the center addresses
  /// h to it directly, so no extra round is spent.
  Index first_nonempty(Index k) const {
    for (Index j = k; j < machines(); ++j)
      if (!R_.exhausted(j)) return j;
    return k;
  }

  /// Map-reduce of the exact gradient over partition shards. One round:
  /// broadcast of x_ref, m uploads, h to the active machine.
  template <FiniteSum F>
  Vector batch_gradient_round(const F& f, const Vector& x_ref, Index extra_vectors = 0) {
    require(f.size() == size(), ErrorCode::DimensionMismatch, "objective size differs from cluster");
    require(static_cast<Index>(x_ref.size()) == f.dim(), ErrorCode::DimensionMismatch, "batch gradient point");
    const Index m = machines();
    observe(x_ref);
    Vector h = Vector::Zero(x_ref.size());
    Vector hj(x_ref.size());
    Index longest = 0;
    for (Index j = 0; j < m; ++j) {
      hj.setZero();
      const auto shard = partition_.shard(j);
      for (FnIndex i : shard) {
        guard(j, i);
        f.add_grad(i, x_ref, 1.0, hj);
      }
      observe(hj);
      ledger_.grad_evals[j] += shard.size();
      longest = std::max<Index>(longest, shard.size());
      h += hj;
    }
    h /= static_cast<double>(size());
    observe(h);
    ledger_.parallel_runtime += longest;
    add_vectors(broadcast_vectors() + m + 1 + extra_vectors);
    add_round();
    return h;
  }

  /// Inner-loop observer charging ledger and guard, forwarding to `inner`.
  template <class Inner>
  struct StageObserver {
    Cluster* c;
    Inner* inner;
    void on_sample(Index j, Index i) {
      c->guard(j, i);
      ++c->ledger_.grad_evals[j];
      ++c->ledger_.parallel_runtime;
      inner->on_sample(j, i);
    }
    void on_handoff(Index from, Index to) {
      c->add_vectors(2);
      c->add_round();
      inner->on_handoff(from, to);
    }
    void on_step(Index t, const Vector& x) {
      c->observe(x);
      inner->on_step(t, x);
    }
  };

  template <FiniteSum F, class Inner = NullObserver>
  StageResult run_stage(const F& f, const Vector& x_ref, const Vector& h, double eta, Index T, Inner* inner = nullptr) {
    Inner fallback{};
    StageObserver<Inner> obs{this, inner ? inner : &fallback};
    if (T > 0) k_ = first_nonempty(k_);
    StageResult res = ss_svrg(f, x_ref, h, R_, k_, eta, T, obs);
    k_ = res.k;
    observe(res.x_bar);
    return res;
  }

  void checkpoint(Index stage, double gap) {
    ledger_.gap_trace.push_back({stage, ledger_.rounds, ledger_.vectors_sent, ledger_.parallel_runtime, gap});
  }

 private:
  Partition partition_;
  Multisets R_;
  std::vector<std::uint32_t> owner_;
  std::vector<std::vector<FnIndex>> extra_;
  BroadcastCost cost_;
  Index k_ = 0;
  MetricsLedger ledger_;
  RoundProbe* probe_ = nullptr;
};

using GapOracle = std::function<double(const Vector&)>;

struct RunOptions {
  GapOracle gap;             // evaluated outside the counters
  double target_gap = 0.0;   // stop once gap <= target (needs `gap`)
  Index max_rounds = std::numeric_limits<Index>::max();
};

struct RunResult {
  Vector x;
  MetricsLedger ledger;
  std::vector<Vector> references;  // x~ per stage (DSVRG) or x^_p per outer iteration (DASVRG)
  bool reached_target = false;
};

namespace detail {
inline bool record(Cluster& c, const RunOptions& opt, Index stage, const Vector& x) {
  if (!opt.gap) return false;
  const double g = opt.gap(x);
  c.checkpoint(stage, g);
  return opt.target_gap > 0.0 && g <= opt.target_gap;
}
}  // namespace detail

/// K stages of (batch gradient round, SS-SVRG). Requires T*K <= remaining
/// samples; otherwise SampleBudgetExhausted surfaces from the stage.
template <FiniteSum F>
RunResult dsvrg_run(const F& f, Cluster& cluster, const SvrgConfig& cfg, const Vector& x0,
                    const RunOptions& opt = {}) {
  require(static_cast<Index>(x0.size()) == f.dim(), ErrorCode::DimensionMismatch, "x0");
  cfg.validate_positive();
  require(cfg.T * cfg.K <= cluster.multisets().total_remaining(), ErrorCode::SampleBudgetExhausted,
          "T*K=" + std::to_string(cfg.T * cfg.K) + " exceeds " + std::to_string(cluster.multisets().total_remaining()) +
              " stored samples");
  RunResult out;
  Vector x = x0;
  out.references.push_back(x);
  out.reached_target = detail::record(cluster, opt, 0, x);
  for (Index s = 0; s < cfg.K && !out.reached_target && cluster.ledger().rounds < opt.max_rounds; ++s) {
    const Vector h = cluster.batch_gradient_round(f, x);
    StageResult st = cluster.run_stage(f, x, h, cfg.eta, cfg.T);
    x = cfg.last_iterate ? std::move(st.x_last) : std::move(st.x_bar);
    out.references.push_back(x);
    out.reached_target = detail::record(cluster, opt, s + 1, x);
  }
  out.x = std::move(x);
  out.ledger = cluster.ledger();
  return out;
}

/// Positive root of a^2 + (a_prev^2 - q) a - a_prev^2 = 0.
inline double alpha_update(double alpha_prev, double q) {
  require(q > 0.0 && q <= 1.0, ErrorCode::InvalidArgument, "q must lie in (0, 1]");
  require(alpha_prev > 0.0 && alpha_prev <= 1.0, ErrorCode::InvalidArgument, "alpha_prev must lie in (0, 1]");
  const double a2 = alpha_prev * alpha_prev;
  const double b = a2 - q;
  const double disc = std::sqrt(b * b + 4.0 * a2);
  return b > 0.0 ? 2.0 * a2 / (b + disc) : 0.5 * (disc - b);
}

inline double beta_from_alphas(double alpha_prev, double alpha) {
  const double den = alpha_prev * alpha_prev + alpha;
  require(den > 0.0, ErrorCode::InvalidArgument, "beta denominator must be positive");
  return alpha_prev * (1.0 - alpha_prev) / den;
}

struct AccelState {
  double q = 1.0;
  double alpha = 1.0;
  Vector y;
  Vector x_hat_prev;
};

struct DasvrgConfig {
  double eta = 0.0;
  Index T = 0;
  Index K = 0;
  Index P = 0;
  double sigma = 0.0;
};

/// Stages per outer iteration for the accelerated scheme.
inline Index dasvrg_stages(double q, double sigma, double mu) {
  require(q > 0.0 && q <= 1.0 && mu > 0.0 && sigma >= 0.0, ErrorCode::InvalidArgument, "dasvrg_stages inputs");
  const double sq = std::sqrt(q);
  const double shrink = 1.0 - sq / 2.0;
  const double arg = 4.0 / (2.0 - sq) + 10368.0 * sigma / (mu * q * shrink * shrink);
  return static_cast<Index>(std::ceil(std::log(arg) / std::log(9.0 / 8.0) - 1e-9));
}

/// sigma = L/n, eta = 1/(16L), T = ceil(96 kappa_sigma), K from `dasvrg_stages`,
/// P from (32/q)(1 - sqrt(q)/2)^(P+1) gap0 <= eps, bounded as
/// P = ceil((2/sqrt q) log(32 gap0 / (q eps))).
inline DasvrgConfig default_dasvrg_schedule(double L, double mu, Index n, double gap0, double epsilon) {
  require(L > 0.0 && mu > 0.0 && n >= 1 && gap0 > 0.0 && epsilon > 0.0, ErrorCode::InvalidArgument,
          "schedule inputs must be positive");
  DasvrgConfig c;
  c.sigma = L / static_cast<double>(n);
  const double kappa_sigma = (L + c.sigma) / (mu + c.sigma);
  const double q = mu / (mu + c.sigma);
  c.eta = 1.0 / (16.0 * L);
  c.T = static_cast<Index>(std::ceil(96.0 * kappa_sigma - 1e-9));
  c.K = dasvrg_stages(q, c.sigma, mu);
  const double p = 2.0 / std::sqrt(q) * std::log(32.0 * gap0 / (q * epsilon));
  c.P = p > 0.0 ? static_cast<Index>(std::ceil(p - 1e-9)) : 0;
  return c;
}

/// P outer iterations of K proximal DSVRG stages around y_{p-1}, warm
/// started at x^_{p-1}.
template <FiniteSum F>
RunResult dasvrg_run(const F& f, Cluster& cluster, const DasvrgConfig& cfg, double mu, const Vector& x0,
                     const RunOptions& opt = {}) {
  require(static_cast<Index>(x0.size()) == f.dim(), ErrorCode::DimensionMismatch, "x0");
  require(cfg.sigma >= 0.0 && mu > 0.0, ErrorCode::InvalidArgument, "need sigma >= 0 and mu > 0");
  require(cfg.eta > 0.0, ErrorCode::InvalidStep, "eta must be positive");
  require(cfg.T * cfg.K * cfg.P <= cluster.multisets().total_remaining(), ErrorCode::SampleBudgetExhausted,
          "T*K*P=" + std::to_string(cfg.T * cfg.K * cfg.P) + " exceeds " +
              std::to_string(cluster.multisets().total_remaining()) + " stored samples");
  AccelState st;
  st.q = mu / (mu + cfg.sigma);
  st.alpha = std::sqrt(st.q);
  st.y = x0;
  st.x_hat_prev = x0;
  RunResult out;
  out.references.push_back(x0);
  out.reached_target = detail::record(cluster, opt, 0, x0);
  for (Index p = 1; p <= cfg.P && !out.reached_target && cluster.ledger().rounds < opt.max_rounds; ++p) {
    const ProxObjective<F> prox(f, st.y, cfg.sigma);
    Vector x = st.x_hat_prev;
    cluster.observe(st.y);
    for (Index s = 0; s < cfg.K; ++s) {
      const Vector h = cluster.batch_gradient_round(prox, x, s == 0 ? cluster.broadcast_vectors() : 0);
      StageResult sr = cluster.run_stage(prox, x, h, cfg.eta, cfg.T);
      x = std::move(sr.x_bar);
    }
    // x^_p to the center
    cluster.add_vectors(1);
    cluster.add_round();
    const double alpha = alpha_update(st.alpha, st.q);
    const double beta = beta_from_alphas(st.alpha, alpha);
    st.y = x + beta * (x - st.x_hat_prev);
    st.alpha = alpha;
    st.x_hat_prev = x;
    cluster.observe(st.y);
    out.references.push_back(x);
    out.reached_target = detail::record(cluster, opt, p, x);
  }
  out.x = st.x_hat_prev;
  out.ledger = cluster.ledger();
  return out;
}

struct AccelGradOptions {
  double epsilon = 0.0;  // stop when ||grad f(y)||^2 / (2 mu) <= epsilon
  Index max_rounds = 100000;
  double L = 0.0;        // overrides info.L when positive
  GapOracle gap;
  double target_gap = 0.0;
};

/// Constant-momentum Nesterov method; every iteration is one batch round.
template <FiniteSum F>
RunResult accel_grad_run(const F& f, Cluster& cluster, const SmoothnessInfo& info, const Vector& x0,
                         const AccelGradOptions& opt) {
  require(info.mu > 0.0, ErrorCode::StrongConvexityUnavailable, "accelerated gradient needs mu > 0");
  require(static_cast<Index>(x0.size()) == f.dim(), ErrorCode::DimensionMismatch, "x0");
  const double L = opt.L > 0.0 ? opt.L : info.L;
  const double sk = std::sqrt(L / info.mu);
  const double beta = (sk - 1.0) / (sk + 1.0);
  RunOptions ro{opt.gap, opt.target_gap, opt.max_rounds};
  RunResult out;
  Vector x = x0;
  Vector y = x0;
  out.reached_target = detail::record(cluster, ro, 0, x);
  Index it = 0;
  while (!out.reached_target && cluster.ledger().rounds < opt.max_rounds) {
    const Vector g = cluster.batch_gradient_round(f, y);
    if (g.squaredNorm() / (2.0 * info.mu) <= opt.epsilon) {
      x = y;
      out.reached_target = true;
      detail::record(cluster, ro, ++it, x);
      break;
    }
    Vector x_next = y - g / L;
    y = x_next + beta * (x_next - x);
    x = std::move(x_next);
    cluster.observe(x);
    cluster.observe(y);
    out.reached_target = detail::record(cluster, ro, ++it, x);
  }
  out.x = std::move(x);
  out.ledger = cluster.ledger();
  return out;
}

}  // namespace dsvrg
