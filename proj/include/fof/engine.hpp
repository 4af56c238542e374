#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <span>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fof/geometry.hpp"
#include "fof/union_find.hpp"

namespace fof {

struct FofOptions {
  unsigned threads = 1;
  /// Catalog reporting threshold.
  std::uint64_t min_size = 20;
  /// Target mean occupancy used to cap the number of grid cells. Zero keeps
  /// the finest grid the linking length allows.
  double particles_per_cell = 4.0;
};

namespace detail {

template <class Fn>
void parallel_for_threads(unsigned threads, Fn&& fn) {
  threads = std::max(1u, threads);
  if (threads == 1) {
    fn(0u);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&fn, t] { fn(t); });
}

inline std::size_t cell_cap(std::size_t n, double particles_per_cell) {
  if (!(particles_per_cell > 0.0))
    return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(n) / particles_per_cell));
}

template <class UF>
void run_task(const ProximityTask& t, const CellGrid& g, std::span<const Vec3> pos, const Box& box,
              const LinkingLength& l, UF& uf) {
  using Index = typename UF::index_type;
  const std::size_t a0 = g.cell_start[t.cell_a], a1 = g.cell_start[t.cell_a + 1];
  if (t.kind == ProximityTask::Kind::self) {
    for (std::size_t i = a0; i < a1; ++i)
      for (std::size_t j = i + 1; j < a1; ++j) {
        const double r2 = t.min_image ? min_image_dist2(pos[i], pos[j], box) : dist2(pos[i], pos[j]);
        if (l.links(r2))
          uf.unite_unchecked(static_cast<Index>(g.members[i]), static_cast<Index>(g.members[j]));
      }
    return;
  }
  const std::size_t b0 = g.cell_start[t.cell_b], b1 = g.cell_start[t.cell_b + 1];
  const Vec3 shift = t.shift(box);
  for (std::size_t i = a0; i < a1; ++i) {
    const Vec3& p = pos[i];
    for (std::size_t j = b0; j < b1; ++j) {
      double r2;
      if (t.min_image) {
        r2 = min_image_dist2(p, pos[j], box);
      } else {
        const Vec3 q{pos[j][0] + shift[0], pos[j][1] + shift[1], pos[j][2] + shift[2]};
        r2 = dist2(p, q);
      }
      if (l.links(r2))
        uf.unite_unchecked(static_cast<Index>(g.members[i]), static_cast<Index>(g.members[j]));
    }
  }
}

} // namespace detail

/// Links every pair of particles closer than the linking length. Proximity
/// tasks are pulled from a shared queue by `threads` workers, all of which
/// write into one lock-free forest. The returned forest is quiesced; each
/// group's root is its smallest particle index.
template <class Stats = NoStats>
BasicUnionFind<std::uint64_t, Stats> run_local_fof(std::span<const Particle> particles, const Box& box,
                                                   const LinkingLength& l, unsigned threads,
                                                   double particles_per_cell = 4.0) {
  std::vector<Particle> wrapped(particles.begin(), particles.end());
  if (box.periodic)
    for (auto& p : wrapped)
      p.pos = wrap_position(p.pos, box);

  const CellGrid grid = build_grid(wrapped, box, l, detail::cell_cap(wrapped.size(), particles_per_cell));
  const std::vector<ProximityTask> tasks = make_tasks(grid, box, l);

  std::vector<Vec3> pos(grid.members.size());
  for (std::size_t k = 0; k < pos.size(); ++k)
    pos[k] = wrapped[grid.members[k]].pos;

  BasicUnionFind<std::uint64_t, Stats> uf(particles.size());
  constexpr std::size_t kBatch = 8;
  std::atomic<std::size_t> cursor{0};
  detail::parallel_for_threads(threads, [&](unsigned) {
    for (;;) {
      const std::size_t begin = cursor.fetch_add(kBatch, std::memory_order_relaxed);
      if (begin >= tasks.size())
        break;
      const std::size_t end = std::min(tasks.size(), begin + kBatch);
      for (std::size_t k = begin; k < end; ++k)
        detail::run_task(tasks[k], grid, pos, box, l, uf);
    }
  });
  return uf;
}

/// group_size[r] is the member count of root r; non-root entries are zero.
template <class UF>
std::vector<std::uint64_t> compute_group_sizes_serial(UF& uf) {
  std::vector<std::uint64_t> group_size(uf.size(), 0);
  for (std::size_t i = 0; i < uf.size(); ++i)
    ++group_size[uf.find_unchecked(i)];
  return group_size;
}

/// Open-addressing map from root index to a partial member count. Capacity is
/// a power of two and probing is linear.
class RootCountTable {
public:
  static constexpr std::uint64_t kEmpty = std::numeric_limits<std::uint64_t>::max();

  explicit RootCountTable(std::size_t expected = 16) {
    keys_.assign(std::bit_ceil(std::max<std::size_t>(16, expected * 2)), kEmpty);
    counts_.assign(keys_.size(), 0);
  }

  void add(std::uint64_t key, std::uint64_t amount = 1) {
    if ((used_ + 1) * 2 > keys_.size())
      grow();
    std::size_t slot = probe(key);
    if (keys_[slot] == kEmpty) {
      keys_[slot] = key;
      ++used_;
    }
    counts_[slot] += amount;
  }

  std::uint64_t count(std::uint64_t key) const {
    const std::size_t slot = probe(key);
    return keys_[slot] == key ? counts_[slot] : 0;
  }

  std::size_t size() const { return used_; }
  std::size_t capacity() const { return keys_.size(); }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t s = 0; s < keys_.size(); ++s)
      if (keys_[s] != kEmpty)
        fn(keys_[s], counts_[s]);
  }

private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
  }

  std::size_t probe(std::uint64_t key) const {
    const std::size_t mask = keys_.size() - 1;
    std::size_t slot = mix(key) & mask;
    while (keys_[slot] != kEmpty && keys_[slot] != key)
      slot = (slot + 1) & mask;
    return slot;
  }

  void grow() {
    std::vector<std::uint64_t> keys(keys_.size() * 2, kEmpty), counts(keys_.size() * 2, 0);
    keys.swap(keys_);
    counts.swap(counts_);
    used_ = 0;
    for (std::size_t s = 0; s < keys.size(); ++s)
      if (keys[s] != kEmpty) {
        const std::size_t slot = probe(keys[s]);
        keys_[slot] = keys[s];
        counts_[slot] = counts[s];
        ++used_;
      }
  }

  std::vector<std::uint64_t> keys_;
  std::vector<std::uint64_t> counts_;
  std::size_t used_ = 0;
};

/// Optional instrumentation for compute_group_sizes_parallel: every
/// (root, partial count) entry of every per-thread table, captured at flush.
struct GroupSizeProbe {
  std::mutex mutex;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> entries;
  std::size_t tables = 0;
};

/// Same result as compute_group_sizes_serial. Roots start at 1 and only
/// non-root particles are counted in the per-thread tables, so a table never
/// holds a singleton. Partial counts are flushed with atomic additions.
template <class UF>
std::vector<std::uint64_t> compute_group_sizes_parallel(UF& uf, unsigned threads,
                                                        GroupSizeProbe* probe = nullptr) {
  threads = std::max(1u, threads);
  const std::size_t n = uf.size();
  std::vector<std::uint64_t> group_size(n, 0);
  const auto chunk = [&](unsigned t) {
    return std::pair<std::size_t, std::size_t>{n * t / threads, n * (t + 1) / threads};
  };

  detail::parallel_for_threads(threads, [&](unsigned t) {
    const auto [lo, hi] = chunk(t);
    for (std::size_t i = lo; i < hi; ++i)
      group_size[i] = uf.parent(i) == i ? 1 : 0;
  });

  detail::parallel_for_threads(threads, [&](unsigned t) {
    const auto [lo, hi] = chunk(t);
    RootCountTable table(std::min<std::size_t>(hi - lo, 1024));
    for (std::size_t i = lo; i < hi; ++i) {
      const std::uint64_t r = uf.find_unchecked(i);
      if (r != i)
        table.add(r);
    }
    table.for_each([&](std::uint64_t root, std::uint64_t count) {
      std::atomic_ref<std::uint64_t>(group_size[root]).fetch_add(count, std::memory_order_relaxed);
    });
    if (probe) {
      std::lock_guard lock(probe->mutex);
      ++probe->tables;
      table.for_each([&](std::uint64_t root, std::uint64_t count) { probe->entries.emplace_back(root, count); });
    }
  });
  return group_size;
}

/// Groups with at least min_size members, largest first, ties broken by id.
struct GroupCatalog {
  struct Entry {
    std::uint64_t id = 0;
    std::uint64_t size = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  std::vector<Entry> entries;
  std::uint64_t min_size = 1;

  void sort() {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.size != b.size ? a.size > b.size : a.id < b.id;
    });
  }

  std::uint64_t total_members() const {
    std::uint64_t s = 0;
    for (const auto& e : entries)
      s += e.size;
    return s;
  }

  friend bool operator==(const GroupCatalog&, const GroupCatalog&) = default;
};

/// Catalog keyed by root index.
template <class UF>
GroupCatalog extract_catalog(const UF& uf, std::span<const std::uint64_t> group_size,
                             std::uint64_t min_size) {
  GroupCatalog cat;
  cat.min_size = min_size;
  for (std::size_t i = 0; i < uf.size(); ++i)
    if (uf.parent(i) == i && group_size[i] >= min_size)
      cat.entries.push_back({i, group_size[i]});
  cat.sort();
  return cat;
}

/// One particle's group assignment.
struct Membership {
  std::uint64_t particle_id = 0;
  std::uint64_t group_id = 0;
  friend bool operator==(const Membership&, const Membership&) = default;
};

/// Relabels every group by its smallest member particle ID and sorts by
/// particle ID. Two runs that found the same partition produce identical
/// output whatever labels they used internally.
inline std::vector<Membership> canonicalize(std::vector<Membership> members) {
  std::unordered_map<std::uint64_t, std::uint64_t> least;
  least.reserve(members.size());
  for (const auto& m : members) {
    auto [it, fresh] = least.try_emplace(m.group_id, m.particle_id);
    if (!fresh)
      it->second = std::min(it->second, m.particle_id);
  }
  for (auto& m : members)
    m.group_id = least.at(m.group_id);
  std::sort(members.begin(), members.end(),
            [](const Membership& a, const Membership& b) { return a.particle_id < b.particle_id; });
  return members;
}

inline GroupCatalog catalog_from_membership(std::span<const Membership> members, std::uint64_t min_size) {
  std::unordered_map<std::uint64_t, std::uint64_t> sizes;
  for (const auto& m : members)
    ++sizes[m.group_id];
  GroupCatalog cat;
  cat.min_size = min_size;
  for (const auto& [id, size] : sizes)
    if (size >= min_size)
      cat.entries.push_back({id, size});
  cat.sort();
  return cat;
}

/// Everything a local run produces.
struct LocalResult {
  UnionFind forest;
  std::vector<std::uint64_t> group_size;
  GroupCatalog catalog;  // ids are root indices
  std::vector<Membership> membership;  // canonical: group id = least member particle id
};

inline LocalResult find_groups(std::span<const Particle> particles, const Box& box, const LinkingLength& l,
                               const FofOptions& opt = {}) {
  LocalResult r{run_local_fof(particles, box, l, opt.threads, opt.particles_per_cell), {}, {}, {}};
  r.group_size = compute_group_sizes_parallel(r.forest, opt.threads);
  r.catalog = extract_catalog(r.forest, r.group_size, opt.min_size);
  r.membership.resize(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i)
    r.membership[i] = {particles[i].id, r.forest.find_unchecked(i)};
  r.membership = canonicalize(std::move(r.membership));
  return r;
}

} // namespace fof
