#pragma once

#include <atomic>
#include <cassert>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fof {

/// No-op instrumentation for the union-find; compiles away entirely.
struct NoStats {
  void on_write(std::uint64_t /*old_value*/, std::uint64_t /*new_value*/) noexcept {}
  void on_cas_failure() noexcept {}
};

/// Counts every slot write the forest performs. Used by tests to observe
/// path-compression behaviour and the monotonic-write invariant.
struct CountingStats {
  std::atomic<std::uint64_t> writes{0};
  std::atomic<std::uint64_t> cas_failures{0};
  std::atomic<std::uint64_t> non_monotonic_writes{0};

  CountingStats() = default;
  CountingStats(const CountingStats& other) noexcept
      : writes(other.writes.load()), cas_failures(other.cas_failures.load()),
        non_monotonic_writes(other.non_monotonic_writes.load()) {}
  CountingStats& operator=(const CountingStats& other) noexcept {
    writes = other.writes.load();
    cas_failures = other.cas_failures.load();
    non_monotonic_writes = other.non_monotonic_writes.load();
    return *this;
  }

  void on_write(std::uint64_t old_value, std::uint64_t new_value) noexcept {
    writes.fetch_add(1, std::memory_order_relaxed);
    if (!(new_value < old_value))
      non_monotonic_writes.fetch_add(1, std::memory_order_relaxed);
  }
  void on_cas_failure() noexcept { cas_failures.fetch_add(1, std::memory_order_relaxed); }

  void reset() noexcept {
    writes = 0;
    cas_failures = 0;
    non_monotonic_writes = 0;
  }
};

/// Disjoint-set forest over element indices using union-by-root: when two
/// trees merge, the larger root is pointed at the smaller one. Every slot
/// therefore satisfies parent[i] <= i, and slot values only ever decrease.
///
/// find() and unite() may be called concurrently from any number of threads;
/// the root update is a single compare-exchange that is retried until it
/// lands. unite_serial() requires exclusive access.
///
/// Path compression only happens when a find traversed at least two edges.
template <std::unsigned_integral Index = std::uint64_t, class Stats = NoStats>
class BasicUnionFind {
public:
  using index_type = Index;
  using slot_type = std::atomic<Index>;

  BasicUnionFind() = default;

  explicit BasicUnionFind(std::size_t n) : size_(n), parent_(std::make_unique<slot_type[]>(n)) {
    for (std::size_t i = 0; i < n; ++i)
      parent_[i].store(static_cast<Index>(i), std::memory_order_relaxed);
  }

  /// Builds a forest from an explicit parent array. Each entry must satisfy
  /// parents[i] <= i.
  static BasicUnionFind from_parents(std::span<const Index> parents) {
    BasicUnionFind uf(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (parents[i] > i)
        throw std::invalid_argument("parent[" + std::to_string(i) + "] exceeds its own index");
      uf.parent_[i].store(parents[i], std::memory_order_relaxed);
    }
    return uf;
  }

  BasicUnionFind(BasicUnionFind&&) noexcept = default;
  BasicUnionFind& operator=(BasicUnionFind&&) noexcept = default;

  std::size_t size() const noexcept { return size_; }

  Index parent(Index i) const {
    check(i);
    return parent_[i].load(std::memory_order_acquire);
  }

  bool is_root(Index i) const { return parent(i) == i; }

  /// Snapshot of the parent array. Only meaningful at quiescence.
  std::vector<Index> parents() const {
    std::vector<Index> out(size_);
    for (std::size_t i = 0; i < size_; ++i)
      out[i] = parent_[i].load(std::memory_order_acquire);
    return out;
  }

  Index find(Index i) {
    check(i);
    return find_unchecked(i);
  }

  Index find_unchecked(Index i) {
    Index root = i;
    Index up = parent_[root].load(std::memory_order_acquire);
    unsigned depth = 0;
    while (up != root) {
      root = up;
      up = parent_[root].load(std::memory_order_acquire);
      ++depth;
    }
    if (depth >= 2)
      compress(i, root);
    return root;
  }

  /// Single-threaded union. The surviving root is the smaller of the two.
  void unite_serial(Index i, Index j) {
    check(i);
    check(j);
    Index ri = find_unchecked(i);
    Index rj = find_unchecked(j);
    if (ri == rj)
      return;
    if (rj < ri)
      std::swap(ri, rj);
    stats_.on_write(rj, ri);
    parent_[rj].store(ri, std::memory_order_relaxed);
  }

  /// Thread-safe union. Retries until the larger root has been attached to
  /// the smaller one, or until both elements already share a root.
  void unite(Index i, Index j) {
    check(i);
    check(j);
    unite_unchecked(i, j);
  }

  void unite_unchecked(Index i, Index j) {
    for (;;) {
      Index ri = find_unchecked(i);
      Index rj = find_unchecked(j);
      if (ri == rj)
        return;
      if (rj < ri)
        std::swap(ri, rj);
      // A root's slot holds its own index, so that is the value we expect.
      if (atomic_update_root(parent_[rj], rj, ri))
        return;
    }
  }

  /// Replaces the slot's value with new_root only if it still holds
  /// expected. Returns whether the replacement happened.
  bool atomic_update_root(slot_type& slot, Index expected, Index new_root) {
    assert(new_root < expected);
    Index observed = expected;
    if (slot.compare_exchange_strong(observed, new_root, std::memory_order_acq_rel,
                                     std::memory_order_acquire)) {
      stats_.on_write(expected, new_root);
      return true;
    }
    stats_.on_cas_failure();
    return false;
  }

  slot_type& slot(Index i) {
    check(i);
    return parent_[i];
  }

  Stats& stats() noexcept { return stats_; }
  const Stats& stats() const noexcept { return stats_; }

private:
  void check(Index i) const {
    if (static_cast<std::size_t>(i) >= size_)
      throw std::out_of_range("union-find index " + std::to_string(i) + " out of range [0, " +
                              std::to_string(size_) + ")");
  }

  // Point every vertex on the path i -> root directly at root. Slots are only
  // lowered: a single compare-exchange per vertex, and a lost race means some
  // other thread already wrote a smaller ancestor there.
  void compress(Index i, Index root) {
    Index v = i;
    while (v != root) {
      Index up = parent_[v].load(std::memory_order_acquire);
      if (up <= root)
        break;
      if (parent_[v].compare_exchange_strong(up, root, std::memory_order_release,
                                             std::memory_order_relaxed))
        stats_.on_write(up, root);
      v = up;
    }
  }

  std::size_t size_ = 0;
  std::unique_ptr<slot_type[]> parent_;
  Stats stats_{};
};

using UnionFind = BasicUnionFind<>;

} // namespace fof
