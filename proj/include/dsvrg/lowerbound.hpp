#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsvrg/cluster.hpp"
#include "dsvrg/data_alloc.hpp"
#include "dsvrg/error.hpp"
#include "dsvrg/objective.hpp"
#include "dsvrg/rng.hpp"

namespace dsvrg {

struct HardParams {
  Index k = 2;            // number of chain functions
  Index u = 1;            // repetitions, b = u k
  double kappa_prime = 1.0;
  double mu_prime = 1.0;  // L = kappa' mu'
  Index n = 1;            // blocks (functions per machine in the adversarial plan)
  Index v = 1;            // copies

  Index b() const { return u * k; }
  double L() const { return kappa_prime * mu_prime; }
  Index m() const { return v * k; }
  Index N() const { return v * k * n; }
  Index d() const { return n * b(); }
  double mu() const { return mu_prime / static_cast<double>(n); }
  double kappa() const { return kappa_prime * static_cast<double>(n); }

  void validate() const {
    require(k >= 1 && u >= 1 && n >= 1 && v >= 1, ErrorCode::InvalidArgument, "k, u, n, v must be positive");
    require(kappa_prime >= 1.0, ErrorCode::InvalidArgument, "kappa' must be at least 1");
    require(mu_prime > 0.0, ErrorCode::InvalidArgument, "mu' must be positive");
    require(u * k >= 2, ErrorCode::InvalidArgument, "b = u k must be at least 2");
  }

  /// (sqrt(kappa'+k-1) + 3 sqrt k) / (sqrt(kappa'+k-1) + sqrt k)
  double corner() const {
    const double a = std::sqrt(kappa_prime + static_cast<double>(k) - 1.0);
    const double r = std::sqrt(static_cast<double>(k));
    return (a + 3.0 * r) / (a + r);
  }

  /// Weight of the quadratic part, (L - mu')/4.
  double chain_weight() const { return (L() - mu_prime) / 4.0; }
};

/// Tridiagonal storage: diag[t] = (t,t), off[t] = (t,t+1) = (t+1,t), 0-based.
struct Tridiagonal {
  Vector diag;
  Vector off;

  Index size() const { return static_cast<Index>(diag.size()); }

  Matrix dense() const {
    const auto b = diag.size();
    Matrix A = Matrix::Zero(b, b);
    A.diagonal() = diag;
    for (Eigen::Index t = 0; t + 1 < b; ++t) A(t, t + 1) = A(t + 1, t) = off(t);
    return A;
  }

  template <class In, class Out>
  void multiply_add(const In& w, double scale, Out&& out) const {
    const auto b = diag.size();
    for (Eigen::Index t = 0; t < b; ++t) {
      double s = diag(t) * w(t);
      if (t > 0) s += off(t - 1) * w(t - 1);
      if (t + 1 < b) s += off(t) * w(t + 1);
      out(t) += scale * s;
    }
  }
};

/// M_i for i = 0..b-1 added into `acc`.
inline void add_chain_term(Tridiagonal& acc, Index i, const HardParams& p) {
  const Index b = p.b();
  if (i == 0) {
    acc.diag(0) += 1.0;
    return;
  }
  // couples 1-based (i, i+1), i.e. 0-based (i-1, i)
  acc.diag(static_cast<Eigen::Index>(i - 1)) += 1.0;
  acc.off(static_cast<Eigen::Index>(i - 1)) -= 1.0;
  acc.diag(static_cast<Eigen::Index>(i)) += (i == b - 1) ? p.corner() : 1.0;
}

/// Sigma_s = sum_{i=0}^{u-1} M_{ik+s-1}, s in [1, k].
inline Tridiagonal build_sigma_tri(Index s, const HardParams& p) {
  p.validate();
  require(s >= 1 && s <= p.k, ErrorCode::IndexOutOfRange, "chain index s=" + std::to_string(s));
  const auto b = static_cast<Eigen::Index>(p.b());
  Tridiagonal S{Vector::Zero(b), Vector::Zero(b - 1)};
  for (Index i = 0; i < p.u; ++i) add_chain_term(S, i * p.k + s - 1, p);
  return S;
}

inline Matrix build_sigma(Index s, const HardParams& p) { return build_sigma_tri(s, p).dense(); }

/// Closed form of sum_s Sigma_s: tridiag(-1, 2, -1) with corner at (b, b).
inline Matrix chain_sum_closed_form(const HardParams& p) {
  const auto b = static_cast<Eigen::Index>(p.b());
  Matrix A = Matrix::Zero(b, b);
  for (Eigen::Index t = 0; t < b; ++t) {
    A(t, t) = 2.0;
    if (t + 1 < b) A(t, t + 1) = A(t + 1, t) = -1.0;
  }
  A(b - 1, b - 1) = p.corner();
  return A;
}

/// The k chain functions p_s on R^b.
class ChainFamily {
 public:
  explicit ChainFamily(const HardParams& p) : p_(p) {
    p_.validate();
    sigma_.reserve(p_.k);
    for (Index s = 1; s <= p_.k; ++s) sigma_.push_back(build_sigma_tri(s, p_));
  }

  const HardParams& params() const { return p_; }
  const Tridiagonal& sigma(Index s) const { return sigma_[s - 1]; }

  template <class W>
  double value(Index s, const W& w) const {
    const double c = p_.chain_weight();
    Vector Sw = Vector::Zero(w.size());
    sigma(s).multiply_add(w, 1.0, Sw);
    double v = c * 0.5 * w.dot(Sw) + 0.5 * p_.mu_prime * w.squaredNorm();
    if (s == 1) v -= c * w(0);
    return v;
  }

  /// out += scale * grad p_s(w)
  template <class W, class Out>
  void add_grad(Index s, const W& w, double scale, Out&& out) const {
    const double c = p_.chain_weight();
    sigma(s).multiply_add(w, scale * c, out);
    out += (scale * p_.mu_prime) * w;
    if (s == 1) out(0) -= scale * c;
  }

  Matrix hessian(Index s) const {
    Matrix H = p_.chain_weight() * sigma(s).dense();
    H.diagonal().array() += p_.mu_prime;
    return H;
  }

  /// Hessian of p_bar = (1/k) sum_s p_s.
  Matrix pbar_hessian() const {
    Matrix H = Matrix::Zero(static_cast<Eigen::Index>(p_.b()), static_cast<Eigen::Index>(p_.b()));
    for (Index s = 1; s <= p_.k; ++s) H += hessian(s);
    return H / static_cast<double>(p_.k);
  }

  template <class W>
  Vector pbar_grad(const W& w) const {
    Vector g = Vector::Zero(w.size());
    for (Index s = 1; s <= p_.k; ++s) add_grad(s, w, 1.0 / static_cast<double>(p_.k), g);
    return g;
  }

  template <class W>
  double pbar_value(const W& w) const {
    double v = 0.0;
    for (Index s = 1; s <= p_.k; ++s) v += value(s, w);
    return v / static_cast<double>(p_.k);
  }

 private:
  HardParams p_;
  std::vector<Tridiagonal> sigma_;
};

inline double p_value(Index s, const Vector& w, const HardParams& p) {
  require(static_cast<Index>(w.size()) == p.b(), ErrorCode::DimensionMismatch, "w must have dimension b");
  require(s >= 1 && s <= p.k, ErrorCode::IndexOutOfRange, "chain index");
  return ChainFamily(p).value(s, w);
}

inline Vector p_grad(Index s, const Vector& w, const HardParams& p) {
  require(static_cast<Index>(w.size()) == p.b(), ErrorCode::DimensionMismatch, "w must have dimension b");
  require(s >= 1 && s <= p.k, ErrorCode::IndexOutOfRange, "chain index");
  Vector g = Vector::Zero(w.size());
  ChainFamily(p).add_grad(s, w, 1.0, g);
  return g;
}

inline Matrix p_hessian(Index s, const HardParams& p) {
  require(s >= 1 && s <= p.k, ErrorCode::IndexOutOfRange, "chain index");
  return ChainFamily(p).hessian(s);
}

struct PbarMinimizer {
  double h = 0.0;
  Vector w_star;
};

/// h = (sqrt(kappa'+k-1) - sqrt k) / (sqrt(kappa'+k-1) + sqrt k), w*_j = h^j.
inline PbarMinimizer pbar_minimizer(const HardParams& p) {
  p.validate();
  const double a = std::sqrt(p.kappa_prime + static_cast<double>(p.k) - 1.0);
  const double r = std::sqrt(static_cast<double>(p.k));
  PbarMinimizer out;
  out.h = (a - r) / (a + r);
  out.w_star.resize(static_cast<Eigen::Index>(p.b()));
  double hp = 1.0;
  for (Eigen::Index j = 0; j < out.w_star.size(); ++j) {
    hp *= out.h;
    out.w_star(j) = hp;
  }
  return out;
}

/// Lower bound (mu' ||w*||^2 / 4) h^(2t) on p_bar(w) - p_bar(w*) for w in E_t.
inline double span_gap_lower_bound(const HardParams& p, Index t) {
  const auto mz = pbar_minimizer(p);
  return p.mu_prime * mz.w_star.squaredNorm() / 4.0 * std::pow(mz.h, 2.0 * static_cast<double>(t));
}

/// Smallest u with h^(2 u k) <= tol.
inline Index default_repetitions(double kappa_prime, Index k, double tol = 1e-16) {
  HardParams p;
  p.k = k;
  p.kappa_prime = kappa_prime;
  p.u = std::max<Index>(1, (2 + k - 1) / k);
  const double h = pbar_minimizer(p).h;
  if (h <= 0.0) return p.u;
  const double b = std::log(tol) / (2.0 * std::log(h));
  return std::max<Index>(p.u, static_cast<Index>(std::ceil(b / static_cast<double>(k))));
}

/// Position of i in [N]: copy c, block j, chain class s (1-based).
struct HardSlot {
  Index copy;
  Index block;
  Index s;
};

inline HardSlot hard_slot(Index i, const HardParams& p) {
  const Index per_copy = p.n * p.k;
  const Index rem = i % per_copy;
  return {i / per_copy, rem / p.k, rem % p.k + 1};
}

/// f_i(x) = p_s(x_{D_j}) on R^{n b}; v copies of {q_{j,s}}.
class HardInstance {
 public:
  explicit HardInstance(const HardParams& p) : fam_(p) {}

  Index size() const { return params().N(); }
  Index dim() const { return params().d(); }
  const HardParams& params() const { return fam_.params(); }
  const ChainFamily& family() const { return fam_; }

  double value(Index i, const Vector& x) const {
    const auto sl = hard_slot(i, params());
    return fam_.value(sl.s, block(x, sl.block));
  }

  void add_grad(Index i, const Vector& x, double scale, Vector& out) const {
    const auto sl = hard_slot(i, params());
    const auto b = static_cast<Eigen::Index>(params().b());
    const auto off = static_cast<Eigen::Index>(sl.block) * b;
    fam_.add_grad(sl.s, x.segment(off, b), scale, out.segment(off, b));
  }

  /// x* = (w*, ..., w*).
  Vector minimizer() const {
    const auto w = pbar_minimizer(params()).w_star;
    return w.replicate(static_cast<Eigen::Index>(params().n), 1);
  }

  /// f(x) - f(x*) = (1/n) sum_j (1/2) e_j^T H e_j with e_j = x_{D_j} - w*.
  double gap(const Vector& x) const {
    const auto w = pbar_minimizer(params()).w_star;
    const Matrix H = fam_.pbar_hessian();
    double g = 0.0;
    for (Index j = 0; j < params().n; ++j) {
      const Vector e = block(x, j) - w;
      g += 0.5 * e.dot(H * e);
    }
    return g / static_cast<double>(params().n);
  }

 private:
  Eigen::VectorBlock<const Vector> block(const Vector& x, Index j) const {
    const auto b = static_cast<Eigen::Index>(params().b());
    return x.segment(static_cast<Eigen::Index>(j) * b, b);
  }

  ChainFamily fam_;
};

/// Per-block view g^l_i on R^b: g^l_i = p_s when f_i acts on block l, else 0.
class HardBlockInstance {
 public:
  HardBlockInstance(const HardParams& p, Index block) : fam_(p), block_(block) {
    require(block < p.n, ErrorCode::IndexOutOfRange, "block " + std::to_string(block));
  }

  Index size() const { return fam_.params().N(); }
  Index dim() const { return fam_.params().b(); }

  double value(Index i, const Vector& w) const {
    const auto sl = hard_slot(i, fam_.params());
    return sl.block == block_ ? fam_.value(sl.s, w) : 0.0;
  }

  void add_grad(Index i, const Vector& w, double scale, Vector& out) const {
    const auto sl = hard_slot(i, fam_.params());
    if (sl.block == block_) fam_.add_grad(sl.s, w, scale, out);
  }

  /// g_bar(w) - g_bar(w*) with g_bar = p_bar / n.
  double gap(const Vector& w) const {
    const Vector e = w - pbar_minimizer(fam_.params()).w_star;
    return 0.5 * e.dot(fam_.pbar_hessian() * e) / static_cast<double>(fam_.params().n);
  }

 private:
  ChainFamily fam_;
  Index block_;
};

/// Machine (c, s) holds every q_{j,s} of copy c, so no machine sees all k
/// chain classes when k >= 2. R_j draws n_tilde samples from S_j.
inline AllocationPlan adversarial_plan(const HardParams& p, Index n_tilde, std::uint64_t seed) {
  p.validate();
  const Index m = p.m();
  AllocationPlan plan;
  plan.partition.permutation.reserve(p.N());
  plan.partition.offsets.assign(m + 1, 0);
  for (Index c = 0; c < p.v; ++c)
    for (Index s = 0; s < p.k; ++s) {
      const Index mach = c * p.k + s;
      for (Index j = 0; j < p.n; ++j)
        plan.partition.permutation.push_back(static_cast<FnIndex>(c * p.n * p.k + j * p.k + s));
      plan.partition.offsets[mach + 1] = plan.partition.permutation.size();
    }
  auto rng = CounterRng::stream(seed, Stream::Plan);
  std::vector<FnIndex> seq;
  seq.reserve(n_tilde * m);
  for (Index mach = 0; mach < m; ++mach) {
    const auto shard = plan.partition.shard(mach);
    for (Index t = 0; t < n_tilde; ++t) seq.push_back(shard[rng.below(shard.size())]);
  }
  plan.sequence = seq;
  plan.multisets = build_multisets(std::move(seq), std::max<Index>(n_tilde, 1), m);
  plan.capacity = {p.n + n_tilde, p.n, n_tilde};
  count_transfers(plan);
  return plan;
}

namespace detail {
inline Index find_root(std::vector<Index>& parent, Index x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}
}  // namespace detail

/// Largest connected block of the sparsity graph of sum coeffs_s Hessian(p_s)
/// over `subset` (1-based chain indices), without the strict-subset check.
inline Index block_structure_unchecked(const std::vector<Index>& subset, const std::vector<double>& coeffs,
                                       const HardParams& p) {
  require(coeffs.size() == subset.size(), ErrorCode::DimensionMismatch, "one coefficient per chain index");
  const Index b = p.b();
  Vector off = Vector::Zero(static_cast<Eigen::Index>(b - 1));
  for (std::size_t r = 0; r < subset.size(); ++r) {
    require(subset[r] >= 1 && subset[r] <= p.k, ErrorCode::IndexOutOfRange, "chain index in subset");
    off += coeffs[r] * build_sigma_tri(subset[r], p).off;
  }
  std::vector<Index> parent(b);
  std::iota(parent.begin(), parent.end(), Index{0});
  for (Index t = 0; t + 1 < b; ++t)
    if (off(static_cast<Eigen::Index>(t)) != 0.0) parent[detail::find_root(parent, t)] = detail::find_root(parent, t + 1);
  std::vector<Index> count(b, 0);
  Index best = 0;
  for (Index t = 0; t < b; ++t) best = std::max(best, ++count[detail::find_root(parent, t)]);
  return best;
}

inline Index block_structure(const std::vector<Index>& subset, const std::vector<double>& coeffs,
                             const HardParams& p) {
  std::vector<Index> distinct(subset);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.size() < p.k, ErrorCode::NotStrictSubset, "subset covers all k chain functions");
  return block_structure_unchecked(subset, coeffs, p);
}

inline Index reachable_dim(Index rounds, Index k) { return rounds * k; }

/// Largest 1-based in-block index of a nonzero coordinate, 0 for the zero vector.
inline Index max_support(const Vector& x, Index b) {
  Index best = 0;
  for (Eigen::Index t = 0; t < x.size(); ++t)
    if (x(t) != 0.0) best = std::max(best, static_cast<Index>(t) % b + 1);
  return best;
}

/// Records, for every completed round r, the largest in-block support index
/// seen on any machine or the center before that round ended.
class SpanProbe : public RoundProbe {
 public:
  explicit SpanProbe(Index b) : b_(b), trace_{0} {}

  void observe(const Vector& v) override { running_ = std::max(running_, max_support(v, b_)); }
  void round_completed(Index rounds) override {
    trace_.resize(rounds + 1, running_);
    trace_[rounds] = running_;
  }

  /// trace()[r] for r = 0..rounds.
  const std::vector<Index>& trace() const { return trace_; }
  Index current() const { return running_; }

  /// Largest single-round increase.
  Index max_growth() const {
    Index g = 0;
    for (std::size_t r = 1; r < trace_.size(); ++r) g = std::max(g, trace_[r] - trace_[r - 1]);
    return g;
  }

 private:
  Index b_;
  std::vector<Index> trace_;
  Index running_ = 0;
};

/// Params header then one "i j s" line per function (0-based i and j, 1-based s).
inline void write_hard_instance(std::ostream& os, const HardParams& p) {
  os << "# hard k=" << p.k << " u=" << p.u << " kappa_prime=" << p.kappa_prime << " mu_prime=" << p.mu_prime
     << " n=" << p.n << " v=" << p.v << " b=" << p.b() << " d=" << p.d() << " N=" << p.N() << "\n";
  for (Index i = 0; i < p.N(); ++i) {
    const auto sl = hard_slot(i, p);
    os << i << ' ' << sl.block << ' ' << sl.s << '\n';
  }
}

}  // namespace dsvrg
