#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dsvrg/error.hpp"
#include "dsvrg/objective.hpp"
#include "dsvrg/rng.hpp"

namespace dsvrg {

using FnIndex = std::uint32_t;

/// Per-machine storage budget: n = largest shard, n_tilde = C - n spare slots.
struct CapacityConfig {
  Index C = 0;
  Index n = 0;
  Index n_tilde = 0;

  /// Validates n < C < N for a near-even split of N functions over m machines.
  static CapacityConfig make(Index N, Index m, Index C) {
    require(m >= 1 && m <= N, ErrorCode::InvalidArgument,
            "need 1 <= m <= N, got m=" + std::to_string(m) + ", N=" + std::to_string(N));
    const Index n = (N + m - 1) / m;
    require(C > n, ErrorCode::CapacityExceeded,
            "capacity C=" + std::to_string(C) + " must exceed shard size n=" + std::to_string(n));
    require(C < N, ErrorCode::CapacityExceeded,
            "capacity C=" + std::to_string(C) + " must be below N=" + std::to_string(N));
    return {C, n, C - n};
  }

  /// Capacity expressed through the spare budget directly.
  static CapacityConfig with_spare(Index N, Index m, Index n_tilde) {
    require(m >= 1 && m <= N, ErrorCode::InvalidArgument, "need 1 <= m <= N");
    return make(N, m, (N + m - 1) / m + n_tilde);
  }
};

/// Sizes floor(N/m) or ceil(N/m), larger shards first.
inline std::vector<Index> shard_sizes(Index N, Index m) {
  require(m >= 1, ErrorCode::InvalidArgument, "m must be positive");
  require(m <= N, ErrorCode::InvalidArgument, "m=" + std::to_string(m) + " exceeds N=" + std::to_string(N));
  std::vector<Index> sizes(m, N / m);
  for (Index j = 0; j < N % m; ++j) ++sizes[j];
  return sizes;
}

/// S_j is the j-th contiguous slice of a random permutation i_1..i_N.
struct Partition {
  std::vector<FnIndex> permutation;
  std::vector<Index> offsets;  // m + 1 entries

  Index machines() const { return offsets.size() - 1; }
  Index size() const { return permutation.size(); }
  std::span<const FnIndex> shard(Index j) const {
    return {permutation.data() + offsets[j], offsets[j + 1] - offsets[j]};
  }
  /// Owner machine of every function index.
  std::vector<std::uint32_t> owners() const {
    std::vector<std::uint32_t> own(permutation.size());
    for (Index j = 0; j < machines(); ++j)
      for (FnIndex i : shard(j)) own[i] = static_cast<std::uint32_t>(j);
    return own;
  }
};

template <class Rng>
std::vector<FnIndex> random_permutation(Index N, Rng& rng) {
  std::vector<FnIndex> perm(N);
  for (Index i = 0; i < N; ++i) perm[i] = static_cast<FnIndex>(i);
  for (Index i = N; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

inline Partition partition_from_permutation(std::vector<FnIndex> perm, Index m) {
  const auto sizes = shard_sizes(perm.size(), m);
  Partition p;
  p.permutation = std::move(perm);
  p.offsets.assign(m + 1, 0);
  for (Index j = 0; j < m; ++j) p.offsets[j + 1] = p.offsets[j] + sizes[j];
  return p;
}

template <class Rng>
Partition random_partition(Index N, Index m, Rng& rng) {
  require(m >= 1 && m <= N, ErrorCode::InvalidArgument,
          "cannot split N=" + std::to_string(N) + " functions over m=" + std::to_string(m) + " machines");
  return partition_from_permutation(random_permutation(N, rng), m);
}

/// Reuses the partition permutation to build r_1..r_Q: with u uniform in
/// [0,1), r_l = i_{floor(uN)+1} if u < (l-1)/N and r_l = i_l otherwise. For
/// l > N the first branch always fires. `Uniform` needs a `uniform()` member.
template <class Uniform>
std::vector<FnIndex> derive_sequence(std::span<const FnIndex> permutation, Index Q, Uniform& source) {
  const Index N = permutation.size();
  require(N >= 1, ErrorCode::InvalidArgument, "empty permutation");
  std::vector<FnIndex> r(Q);
  const double Nd = static_cast<double>(N);
  for (Index l = 0; l < Q; ++l) {
    const double u = source.uniform();
    if (u * Nd < static_cast<double>(l)) {
      const Index pick = std::min(static_cast<Index>(u * Nd), l - 1);
      r[l] = permutation[pick];
    } else {
      r[l] = permutation[l];
    }
  }
  return r;
}

/// The machines' consumable multi-sets R_1..R_m. Items are stored in sequence
/// order; machine j owns items[begin[j], end[j]) and consumes from the front.
struct Multisets {
  std::vector<FnIndex> items;
  std::vector<Index> begin;
  std::vector<Index> end;

  Index machines() const { return begin.size(); }
  Index remaining(Index j) const { return end[j] - begin[j]; }
  bool exhausted(Index j) const { return begin[j] == end[j]; }
  FnIndex take(Index j) { return items[begin[j]++]; }
  std::span<const FnIndex> contents(Index j) const { return {items.data() + begin[j], remaining(j)}; }
  Index total_remaining() const {
    Index s = 0;
    for (Index j = 0; j < machines(); ++j) s += remaining(j);
    return s;
  }
};

/// R_j = {r_{(j-1)n~+1}, ..., r_{j n~}}, truncated at Q.
inline Multisets build_multisets(std::vector<FnIndex> sequence, Index n_tilde, Index m) {
  require(n_tilde >= 1, ErrorCode::InvalidArgument, "n_tilde must be positive");
  require(m >= 1, ErrorCode::InvalidArgument, "m must be positive");
  const Index Q = sequence.size();
  require(Q <= n_tilde * m, ErrorCode::CapacityExceeded,
          "Q=" + std::to_string(Q) + " exceeds n_tilde*m=" + std::to_string(n_tilde * m));
  Multisets R;
  R.items = std::move(sequence);
  R.begin.resize(m);
  R.end.resize(m);
  for (Index j = 0; j < m; ++j) {
    R.begin[j] = std::min(Q, j * n_tilde);
    R.end[j] = std::min(Q, (j + 1) * n_tilde);
  }
  return R;
}

/// Practical mode: R_j is S_j itself in its (random) permutation order.
inline Multisets shard_multisets(const Partition& p) {
  Multisets R;
  R.items = p.permutation;
  R.begin.assign(p.offsets.begin(), p.offsets.end() - 1);
  R.end.assign(p.offsets.begin() + 1, p.offsets.end());
  return R;
}

struct AllocationPlan {
  Partition partition;
  std::vector<FnIndex> sequence;
  Multisets multisets;
  CapacityConfig capacity;
  /// Distinct functions machines must fetch beyond their shard: sum_j |set(R_j) \ S_j|.
  Index extra_transfers = 0;
  /// #{l : r_l != i_l}, the quantity bounded in expectation by Q^2/N.
  Index resampled = 0;
  bool shortcut = false;  // R_j = S_j

  Index machines() const { return partition.machines(); }
  Index size() const { return partition.size(); }

  /// |S_j u R_j| as a set.
  Index resident_size(Index j) const {
    std::unordered_set<FnIndex> s(partition.shard(j).begin(), partition.shard(j).end());
    for (FnIndex i : multisets.contents(j)) s.insert(i);
    return s.size();
  }

  /// Resident flags per machine for access checks.
  std::vector<std::vector<bool>> resident_masks() const {
    std::vector<std::vector<bool>> mask(machines(), std::vector<bool>(size(), false));
    for (Index j = 0; j < machines(); ++j) {
      for (FnIndex i : partition.shard(j)) mask[j][i] = true;
      for (FnIndex i : multisets.contents(j)) mask[j][i] = true;
    }
    return mask;
  }
};

inline void count_transfers(AllocationPlan& plan) {
  const auto own = plan.partition.owners();
  plan.extra_transfers = 0;
  plan.resampled = 0;
  for (Index l = 0; l < plan.sequence.size(); ++l)
    if (l < plan.partition.size() ? plan.sequence[l] != plan.partition.permutation[l] : true) ++plan.resampled;
  for (Index j = 0; j < plan.machines(); ++j) {
    std::unordered_set<FnIndex> shipped;
    for (FnIndex i : plan.multisets.contents(j))
      if (own[i] != j) shipped.insert(i);
    plan.extra_transfers += shipped.size();
  }
}

/// Full DA allocation. Partition and sequence draw from separate sub-streams
/// of `seed`.
inline AllocationPlan allocate(Index N, Index m, Index Q, const CapacityConfig& capacity, std::uint64_t seed) {
  require(capacity.n_tilde >= 1 && capacity.C == capacity.n + capacity.n_tilde, ErrorCode::InvalidArgument,
          "inconsistent capacity config");
  require(capacity.n >= (N + m - 1) / m, ErrorCode::CapacityExceeded, "capacity n below shard size");
  require(Q <= capacity.n_tilde * m, ErrorCode::CapacityExceeded,
          "Q=" + std::to_string(Q) + " exceeds n_tilde*m=" + std::to_string(capacity.n_tilde * m));
  auto prng = CounterRng::stream(seed, Stream::Partition);
  auto srng = CounterRng::stream(seed, Stream::Sequence);
  AllocationPlan plan;
  plan.capacity = capacity;
  plan.partition = random_partition(N, m, prng);
  plan.sequence = derive_sequence(std::span<const FnIndex>(plan.partition.permutation), Q, srng);
  plan.multisets = build_multisets(plan.sequence, capacity.n_tilde, m);
  count_transfers(plan);
  return plan;
}

/// Partition only, with R_j = S_j (practical mode, no unbiasedness guarantee).
inline AllocationPlan allocate_shortcut(Index N, Index m, std::uint64_t seed) {
  auto prng = CounterRng::stream(seed, Stream::Partition);
  AllocationPlan plan;
  plan.partition = random_partition(N, m, prng);
  plan.sequence = plan.partition.permutation;
  plan.multisets = shard_multisets(plan.partition);
  const Index n = (N + m - 1) / m;
  plan.capacity = {n, n, 0};
  plan.shortcut = true;
  return plan;
}

inline double expected_extra_comm_bound(Index Q, Index N) {
  require(N >= 1, ErrorCode::InvalidArgument, "N must be positive");
  const double q = static_cast<double>(Q);
  return q * q / static_cast<double>(N);
}

/// One line per machine: "S: <sorted shard> R: <multiset in order>", 0-based.
inline void write_plan(std::ostream& os, const AllocationPlan& plan) {
  os << "# N=" << plan.size() << " m=" << plan.machines() << " Q=" << plan.sequence.size()
     << " C=" << plan.capacity.C << " n_tilde=" << plan.capacity.n_tilde
     << " extra_transfers=" << plan.extra_transfers << " resampled=" << plan.resampled << "\n";
  for (Index j = 0; j < plan.machines(); ++j) {
    std::vector<FnIndex> s(plan.partition.shard(j).begin(), plan.partition.shard(j).end());
    std::sort(s.begin(), s.end());
    os << "S:";
    for (FnIndex i : s) os << ' ' << i;
    os << " R:";
    for (FnIndex i : plan.multisets.contents(j)) os << ' ' << i;
    os << '\n';
  }
}

}  // namespace dsvrg
