#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dsvrg/data_alloc.hpp"
#include "dsvrg/error.hpp"
#include "dsvrg/objective.hpp"
#include "dsvrg/rng.hpp"

namespace dsvrg {

struct SvrgConfig {
  double eta = 0.0;
  Index T = 0;
  Index K = 0;
  bool last_iterate = false;  // stage output x_T instead of the average

  /// Enforces 0 < eta < 1/(4L). Practical runs skip this and call
  /// `validate_positive` instead.
  void validate(const SmoothnessInfo& info) const {
    require(eta > 0.0 && eta < 1.0 / (4.0 * info.L), ErrorCode::InvalidStep,
            "eta=" + std::to_string(eta) + " outside (0, 1/(4L)) with L=" + std::to_string(info.L));
  }
  void validate_positive() const { require(eta > 0.0, ErrorCode::InvalidStep, "eta must be positive"); }
};

/// Step size 1/(16L) and T = ceil(96 kappa) stages.
inline SvrgConfig theory_config(const SmoothnessInfo& info, Index K) {
  return {1.0 / (16.0 * info.L), static_cast<Index>(std::ceil(96.0 * info.kappa - 1e-9)), K, false};
}

struct StageState {
  Vector x;
  Vector x_bar;
  Index t = 0;
  Vector reference;
  Vector batch_grad;
};

/// grad f_i(x_t) - grad f_i(x_ref) + h, without argument checks.
template <FiniteSum F>
void vr_grad_into(const F& f, Index i, const Vector& x, const Vector& x_ref, const Vector& h, Vector& out) {
  out = h;
  f.add_grad(i, x, 1.0, out);
  f.add_grad(i, x_ref, -1.0, out);
}

template <FiniteSum F>
Vector vr_grad(const F& f, Index i, const Vector& x, const Vector& x_ref, const Vector& h) {
  detail::check_args(f, i, x);
  require(x_ref.size() == x.size() && h.size() == x.size(), ErrorCode::DimensionMismatch, "vr_grad operands");
  Vector out;
  vr_grad_into(f, i, x, x_ref, h, out);
  return out;
}

/// Proximal variant on f~_i(.; y) = f_i + (sigma/2)||. - y||^2. The caller's h
/// must be the proximal batch gradient at x_ref.
template <FiniteSum F>
Vector vr_grad(const F& f, Index i, const Vector& x, const Vector& x_ref, const Vector& h, const Vector& y,
               double sigma) {
  ProxObjective<F> prox(f, y, sigma);
  return vr_grad(prox, i, x, x_ref, h);
}

/// Hooks into the inner loop. Every member is optional in spirit; derive from
/// this and shadow what you need.
struct NullObserver {
  void on_sample(Index /*machine*/, Index /*fn*/) {}
  void on_handoff(Index /*from*/, Index /*to*/) {}
  void on_step(Index /*t*/, const Vector& /*x*/) {}
};

struct StageResult {
  Vector x_bar;
  Vector x_last;
  Index k = 0;
  Index handoffs = 0;
};

/// One SVRG stage over the machines' multi-sets. Machine k draws from R_k in
/// stored order; when it needs a sample and R_k is empty, (x, x_bar) move to
/// machine k+1, which counts as one handoff.
template <FiniteSum F, class Observer = NullObserver>
StageResult ss_svrg(const F& f, const Vector& x_ref, const Vector& h, Multisets& R, Index k, double eta, Index T,
                    Observer&& obs = Observer{}) {
  require(static_cast<Index>(x_ref.size()) == f.dim() && h.size() == x_ref.size(), ErrorCode::DimensionMismatch,
          "ss_svrg operands");
  require(k < R.machines(), ErrorCode::IndexOutOfRange, "active machine " + std::to_string(k));
  StageResult res;
  res.k = k;
  if (T == 0) {
    res.x_bar = x_ref;
    res.x_last = x_ref;
    return res;
  }
  Vector x = x_ref;
  Vector x_bar = Vector::Zero(x_ref.size());
  Vector g(x_ref.size());
  for (Index t = 0; t < T; ++t) {
    while (R.exhausted(res.k)) {
      require(res.k + 1 < R.machines(), ErrorCode::SampleBudgetExhausted,
              "multi-sets exhausted after " + std::to_string(t) + " of " + std::to_string(T) + " steps");
      obs.on_handoff(res.k, res.k + 1);
      ++res.k;
      ++res.handoffs;
    }
    const Index i = R.take(res.k);
    obs.on_sample(res.k, i);
    vr_grad_into(f, i, x, x_ref, h, g);
    x.noalias() -= eta * g;
    x_bar = (x + static_cast<double>(t) * x_bar) / static_cast<double>(t + 1);
    obs.on_step(t + 1, x);
  }
  res.x_bar = std::move(x_bar);
  res.x_last = std::move(x);
  return res;
}

/// Samples i uniformly from [N].
class UniformSampler {
 public:
  UniformSampler(CounterRng rng, Index N) : rng_(rng), N_(N) {}
  Index next() { return static_cast<Index>(rng_.below(N_)); }

 private:
  CounterRng rng_;
  Index N_;
};

/// Replays a fixed index stream.
class SequenceSampler {
 public:
  explicit SequenceSampler(std::span<const FnIndex> seq) : seq_(seq) {}
  Index next() {
    require(pos_ < seq_.size(), ErrorCode::SampleBudgetExhausted, "sample stream exhausted");
    return seq_[pos_++];
  }
  Index consumed() const { return pos_; }

 private:
  std::span<const FnIndex> seq_;
  Index pos_ = 0;
};

/// Reference single-machine SVRG. Returns x~^0..x~^K.
template <FiniteSum F, class Sampler>
std::vector<Vector> svrg_single_machine(const F& f, const Vector& x0, const SvrgConfig& cfg, Sampler& sampler) {
  require(static_cast<Index>(x0.size()) == f.dim(), ErrorCode::DimensionMismatch, "x0");
  cfg.validate_positive();
  std::vector<Vector> trace{x0};
  trace.reserve(cfg.K + 1);
  Vector g(x0.size());
  for (Index s = 0; s < cfg.K; ++s) {
    const Vector& x_ref = trace.back();
    const Vector h = full_gradient(f, x_ref);
    if (cfg.T == 0) {
      trace.push_back(x_ref);
      continue;
    }
    Vector x = x_ref;
    Vector x_bar = Vector::Zero(x0.size());
    for (Index t = 0; t < cfg.T; ++t) {
      const Index i = sampler.next();
      vr_grad_into(f, i, x, x_ref, h, g);
      x.noalias() -= cfg.eta * g;
      x_bar = (x + static_cast<double>(t) * x_bar) / static_cast<double>(t + 1);
    }
    trace.push_back(cfg.last_iterate ? x : x_bar);
  }
  return trace;
}

template <FiniteSum F>
std::vector<Vector> svrg_single_machine(const F& f, const Vector& x0, const SvrgConfig& cfg, std::uint64_t seed) {
  UniformSampler sampler(CounterRng::stream(seed, Stream::Sampling), f.size());
  return svrg_single_machine(f, x0, cfg, sampler);
}

/// Per-stage expected contraction factor of SVRG with averaging.
inline double contraction_bound(double eta, Index T, double L, double mu) {
  require(L > 0.0 && mu > 0.0, ErrorCode::InvalidArgument, "L and mu must be positive");
  require(T >= 1, ErrorCode::InvalidArgument, "T must be at least 1");
  require(eta > 0.0 && 4.0 * L * eta < 1.0, ErrorCode::InvalidStep, "eta must lie in (0, 1/(4L))");
  const double Td = static_cast<double>(T);
  const double shrink = 1.0 - 4.0 * L * eta;
  return 1.0 / (mu * eta * shrink * Td) + 4.0 * L * eta * (Td + 1.0) / (shrink * Td);
}

/// Smallest K with rate^K * gap0 <= epsilon.
inline Index stages_needed(double rate, double gap0, double epsilon) {
  require(gap0 > 0.0 && epsilon > 0.0, ErrorCode::InvalidArgument, "gap0 and epsilon must be positive");
  require(rate > 0.0, ErrorCode::InvalidArgument, "rate must be positive");
  require(rate < 1.0, ErrorCode::NoConvergence, "rate " + std::to_string(rate) + " does not contract");
  if (gap0 <= epsilon) return 0;
  const double k = std::log(gap0 / epsilon) / std::log(1.0 / rate);
  auto K = static_cast<Index>(std::ceil(k - 1e-9));
  return K;
}

}  // namespace dsvrg
