#pragma once

// Multi-rank group finding. Each rank runs the threaded local search on its
// own sub-domain, then:
//   1. group ids are made globally unique by offsetting local roots with an
//      exclusive prefix sum of particle counts,
//   2. particles near a domain face are shipped to the ranks they could link
//      with, and every cross-domain friend pair becomes a GroupLink,
//   3. the links are all-gathered so every rank holds the same list,
//   4. every rank replays the full list through one union-by-size forest, so
//      chains of fragments spanning any number of ranks collapse together and
//      all ranks agree on each group's representative and owner.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fof/comm.hpp"
#include "fof/engine.hpp"
#include "fof/geometry.hpp"

namespace fof::dist {

/// Tiling of the box into nx * ny * nz axis-aligned blocks, one per rank.
/// `order[k]` is the rank assigned to block k (block index x-major).
class DomainDecomposition {
public:
  static DomainDecomposition slabs(const Box& box, int ranks) {
    int axis = 0;
    for (int d = 1; d < 3; ++d)
      if (box.extent[d] > box.extent[axis])
        axis = d;
    return slabs(box, ranks, axis);
  }

  static DomainDecomposition slabs(const Box& box, int ranks, int axis, std::vector<int> order = {}) {
    if (axis < 0 || axis > 2)
      throw Error("slab axis must be 0, 1 or 2");
    std::array<int, 3> splits{1, 1, 1};
    splits[axis] = ranks;
    return DomainDecomposition(box, splits, std::move(order));
  }

  /// Near-cubic 3D blocks: the rank count is factored into three factors
  /// with the largest along the longest axis.
  static DomainDecomposition blocks(const Box& box, int ranks) {
    if (ranks < 1)
      throw Error("rank count must be at least 1");
    std::array<int, 3> best{ranks, 1, 1};
    double best_cost = 1e300;
    for (int a = 1; a <= ranks; ++a) {
      if (ranks % a)
        continue;
      for (int b = 1; b <= ranks / a; ++b) {
        if ((ranks / a) % b)
          continue;
        const int c = ranks / a / b;
        std::array<int, 3> f{a, b, c};
        std::sort(f.begin(), f.end(), std::greater<>());
        std::array<int, 3> axes{0, 1, 2};
        std::sort(axes.begin(), axes.end(),
                  [&](int x, int y) { return box.extent[x] != box.extent[y] ? box.extent[x] > box.extent[y] : x < y; });
        std::array<int, 3> s{};
        for (int k = 0; k < 3; ++k)
          s[axes[k]] = f[k];
        // Interface area between blocks.
        double cost = 0.0;
        for (int d = 0; d < 3; ++d)
          cost += (s[d] - 1) * (box.volume() / box.extent[d]);
        if (cost < best_cost - 1e-12) {
          best_cost = cost;
          best = s;
        }
      }
    }
    return DomainDecomposition(box, best, {});
  }

  DomainDecomposition(const Box& box, std::array<int, 3> splits, std::vector<int> order) : box_(box), splits_(splits) {
    for (int s : splits)
      if (s < 1)
        throw Error("domain splits must be positive");
    const int n = splits[0] * splits[1] * splits[2];
    if (order.empty()) {
      order.resize(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
    }
    if (order.size() != static_cast<std::size_t>(n))
      throw Error("rank order must list every block");
    block_of_rank_.assign(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
      if (order[k] < 0 || order[k] >= n || block_of_rank_[order[k]] != -1)
        throw Error("rank order must be a permutation");
      block_of_rank_[order[k]] = k;
    }
    order_ = std::move(order);
  }

  int ranks() const { return static_cast<int>(order_.size()); }
  const Box& box() const { return box_; }
  const std::array<int, 3>& splits() const { return splits_; }

  int rank_of(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int d = 0; d < 3; ++d) {
      const double f = std::floor(p[d] / box_.extent[d] * splits_[d]);
      c[d] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(splits_[d] - 1)));
    }
    return order_[(c[0] * splits_[1] + c[1]) * splits_[2] + c[2]];
  }

  struct Bounds {
    Vec3 lo;
    Vec3 hi;
  };

  Bounds bounds(int rank) const {
    const int k = block_of_rank_.at(static_cast<std::size_t>(rank));
    const std::array<int, 3> c{k / (splits_[1] * splits_[2]), (k / splits_[2]) % splits_[1], k % splits_[2]};
    Bounds b;
    for (int d = 0; d < 3; ++d) {
      b.lo[d] = box_.extent[d] * c[d] / splits_[d];
      b.hi[d] = box_.extent[d] * (c[d] + 1) / splits_[d];
    }
    return b;
  }

  /// Fraction of the box volume covered by the rank's block.
  double volume_share(int rank) const {
    const Bounds b = bounds(rank);
    return (b.hi[0] - b.lo[0]) * (b.hi[1] - b.lo[1]) * (b.hi[2] - b.lo[2]) / box_.volume();
  }

  /// Squared distance from p to the rank's block, through periodic images
  /// when the box is periodic.
  double dist2_to(int rank, const Vec3& p) const {
    const Bounds b = bounds(rank);
    double s = 0.0;
    for (int d = 0; d < 3; ++d) {
      auto gap = [&](double x) { return std::max({0.0, b.lo[d] - x, x - b.hi[d]}); };
      double g = gap(p[d]);
      if (box_.periodic)
        g = std::min({g, gap(p[d] - box_.extent[d]), gap(p[d] + box_.extent[d])});
      s += g * g;
    }
    return s;
  }

  /// Particles grouped by owning rank, positions wrapped.
  std::vector<Particles> split(std::span<const Particle> particles) const {
    std::vector<Particles> out(static_cast<std::size_t>(ranks()));
    for (const auto& p : particles) {
      Particle q{p.id, wrap_position(p.pos, box_)};
      out[rank_of(q.pos)].push_back(q);
    }
    return out;
  }

private:
  Box box_;
  std::array<int, 3> splits_;
  std::vector<int> order_;
  std::vector<int> block_of_rank_;
};

/// A friend pair straddling two domains, lifted to the groups involved.
struct GroupLink {
  std::uint64_t id_a = 0;
  std::uint64_t size_a = 0;
  std::uint64_t id_b = 0;
  std::uint64_t size_b = 0;

  friend auto operator<=>(const GroupLink&, const GroupLink&) = default;
};

/// A particle within reach of another rank's domain.
struct BoundaryParticle {
  std::uint64_t particle_id = 0;
  Vec3 pos{};
  std::uint64_t group_id = 0;
  std::uint64_t fragment_size = 0;

  friend bool operator==(const BoundaryParticle&, const BoundaryParticle&) = default;
};

inline constexpr std::size_t kBoundaryRecordBytes = 48;
inline constexpr std::size_t kLinkRecordBytes = 32;

inline Bytes encode_boundary(std::span<const BoundaryParticle> records) {
  ByteWriter w;
  for (const auto& r : records) {
    w.u64(r.particle_id);
    for (double x : r.pos)
      w.f64(x);
    w.u64(r.group_id);
    w.u64(r.fragment_size);
  }
  return w.take();
}

inline std::vector<BoundaryParticle> decode_boundary(const Bytes& bytes) {
  if (bytes.size() % kBoundaryRecordBytes)
    throw ProtocolError("malformed boundary packet: " + std::to_string(bytes.size()) + " bytes");
  std::vector<BoundaryParticle> out(bytes.size() / kBoundaryRecordBytes);
  ByteReader r(bytes);
  for (auto& b : out) {
    b.particle_id = r.u64();
    for (auto& x : b.pos)
      x = r.f64();
    b.group_id = r.u64();
    b.fragment_size = r.u64();
  }
  return out;
}

inline Bytes encode_links(std::span<const GroupLink> links) {
  ByteWriter w;
  for (const auto& k : links) {
    w.u64(k.id_a);
    w.u64(k.size_a);
    w.u64(k.id_b);
    w.u64(k.size_b);
  }
  return w.take();
}

inline std::vector<GroupLink> decode_links(const Bytes& bytes) {
  if (bytes.size() % kLinkRecordBytes)
    throw ProtocolError("malformed link packet: " + std::to_string(bytes.size()) + " bytes");
  std::vector<GroupLink> out(bytes.size() / kLinkRecordBytes);
  ByteReader r(bytes);
  for (auto& k : out) {
    k.id_a = r.u64();
    k.size_a = r.u64();
    k.id_b = r.u64();
    k.size_b = r.u64();
  }
  return out;
}

/// Sum of particle counts on all lower ranks.
inline std::uint64_t scan_offset(Communicator& comm, std::uint64_t local_count) {
  return comm.scan_sum(local_count) - local_count;
}

/// Global group id of every local particle: its local root plus the offset.
template <class UF>
std::vector<std::uint64_t> relabel_global(UF& uf, std::uint64_t node_offset) {
  std::vector<std::uint64_t> ids(uf.size());
  for (std::size_t i = 0; i < uf.size(); ++i)
    ids[i] = uf.find_unchecked(i) + node_offset;
  return ids;
}

/// Ships every local particle within the linking length of another rank's
/// domain to that rank, and turns each cross-domain friend pair into a link
/// (local group first). Both sides discover each pair, so links generally
/// arrive twice; duplicates within one rank are dropped.
/// `particles` must be wrapped into the box.
inline std::vector<GroupLink> exchange_boundary_links(Communicator& comm, const DomainDecomposition& dd,
                                                      std::span<const Particle> particles,
                                                      std::span<const std::uint64_t> global_ids,
                                                      std::span<const std::uint64_t> fragment_sizes,
                                                      const LinkingLength& l, const CellGrid* grid = nullptr) {
  if (dd.ranks() != comm.size())
    throw ProtocolError("decomposition has " + std::to_string(dd.ranks()) + " domains but the communicator has " +
                        std::to_string(comm.size()) + " ranks");
  if (global_ids.size() != particles.size() || fragment_sizes.size() != particles.size())
    throw Error("per-particle arrays differ in length");
  const Box& box = dd.box();
  const double reach = l.length * (1.0 + kCellMargin);
  const double reach2 = reach * reach;

  std::vector<std::vector<BoundaryParticle>> outgoing(static_cast<std::size_t>(comm.size()));
  for (std::size_t i = 0; i < particles.size(); ++i)
    for (int q = 0; q < comm.size(); ++q)
      if (q != comm.rank() && dd.dist2_to(q, particles[i].pos) <= reach2)
        outgoing[q].push_back({particles[i].id, particles[i].pos, global_ids[i], fragment_sizes[i]});

  std::vector<Bytes> packets;
  packets.reserve(outgoing.size());
  for (const auto& o : outgoing)
    packets.push_back(encode_boundary(o));
  const std::vector<Bytes> incoming = comm.alltoall(std::move(packets));

  CellGrid own;
  if (!grid) {
    const double ppc = 4.0 * dd.volume_share(comm.rank());
    own = build_grid(particles, box, l, detail::cell_cap(particles.size(), ppc));
    grid = &own;
  }
  std::vector<GroupLink> links;
  for (int q = 0; q < comm.size(); ++q) {
    if (q == comm.rank())
      continue;
    for (const auto& f : decode_boundary(incoming[q])) {
      const Vec3 fp = wrap_position(f.pos, box);
      for_each_candidate(*grid, box, l, fp, [&](std::size_t i) {
        if (l.links(min_image_dist2(particles[i].pos, fp, box)))
          links.push_back({global_ids[i], fragment_sizes[i], f.group_id, f.fragment_size});
      });
    }
  }
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());
  return links;
}

/// Concatenation of every rank's links in rank order; identical on all ranks.
inline std::vector<GroupLink> allgather_links(Communicator& comm, std::span<const GroupLink> local) {
  std::vector<GroupLink> all;
  for (const auto& packet : comm.allgather(encode_links(local))) {
    auto part = decode_links(packet);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

/// Final assignment of one fragment id that appeared in the link list.
struct MergedGroup {
  std::uint64_t id = 0;
  std::uint64_t root_id = 0;
  std::uint64_t total_size = 0;

  friend bool operator==(const MergedGroup&, const MergedGroup&) = default;
};

/// Result of replaying the global link list. `groups` is sorted by id.
struct GlobalMerge {
  std::vector<MergedGroup> groups;

  const MergedGroup* lookup(std::uint64_t id) const {
    auto it = std::lower_bound(groups.begin(), groups.end(), id,
                               [](const MergedGroup& g, std::uint64_t v) { return g.id < v; });
    return it != groups.end() && it->id == id ? &*it : nullptr;
  }

  friend bool operator==(const GlobalMerge&, const GlobalMerge&) = default;
};

/// Single-threaded, deterministic union-by-size over the global link list.
/// Ids are mapped to dense indices in order of first appearance; each dense
/// index carries the fragment size seen at that first appearance. The larger
/// tree absorbs the smaller and ties go to the lower dense index.
inline GlobalMerge merge_global(std::span<const GroupLink> links) {
  std::unordered_map<std::uint64_t, std::size_t> id_to_dense;
  std::vector<std::uint64_t> global_group_id;
  std::vector<std::uint64_t> global_group_size;
  std::vector<std::size_t> global_group_index;
  id_to_dense.reserve(links.size() * 2);

  auto dense = [&](std::uint64_t id, std::uint64_t size) {
    auto [it, fresh] = id_to_dense.try_emplace(id, global_group_id.size());
    if (fresh) {
      global_group_id.push_back(id);
      global_group_size.push_back(size);
      global_group_index.push_back(it->second);
    }
    return it->second;
  };
  auto find = [&](std::size_t i) {
    std::size_t root = i;
    while (global_group_index[root] != root)
      root = global_group_index[root];
    while (global_group_index[i] != root) {
      const std::size_t up = global_group_index[i];
      global_group_index[i] = root;
      i = up;
    }
    return root;
  };

  for (const auto& k : links) {
    const std::size_t find_i = dense(k.id_a, k.size_a);
    const std::size_t find_j = dense(k.id_b, k.size_b);
    std::size_t ri = find(find_i), rj = find(find_j);
    if (ri == rj)
      continue;
    const bool j_wins =
        global_group_size[rj] > global_group_size[ri] || (global_group_size[rj] == global_group_size[ri] && rj < ri);
    if (j_wins)
      std::swap(ri, rj);
    global_group_index[rj] = ri;
    global_group_size[ri] += global_group_size[rj];
  }

  GlobalMerge out;
  out.groups.reserve(global_group_id.size());
  for (std::size_t k = 0; k < global_group_id.size(); ++k) {
    const std::size_t r = find(k);
    out.groups.push_back({global_group_id[k], global_group_id[r], global_group_size[r]});
  }
  std::sort(out.groups.begin(), out.groups.end(),
            [](const MergedGroup& a, const MergedGroup& b) { return a.id < b.id; });
  return out;
}

/// What a rank knows about itself when merging.
struct RankContext {
  int rank = 0;
  int ranks = 1;
  std::uint64_t node_offset = 0;
  std::uint64_t local_count = 0;

  bool owns(std::uint64_t global_id) const {
    return global_id >= node_offset && global_id < node_offset + local_count;
  }
};

using MergeStrategy = std::function<GlobalMerge(std::span<const GroupLink>, const RankContext&)>;

inline GlobalMerge default_merge(std::span<const GroupLink> links, const RankContext&) { return merge_global(links); }

struct DistributedResult {
  /// Global catalog; group ids are the least member particle id.
  GroupCatalog catalog;
  /// This rank's particles, sorted by particle id, with canonical group ids.
  std::vector<Membership> membership;
  std::uint64_t node_offset = 0;
  /// Groups whose representative id falls in this rank's id interval.
  std::size_t owned_groups = 0;
  std::size_t local_links = 0;
  std::size_t global_links = 0;
};

/// Full protocol for one rank. `particles` are this rank's particles (as
/// produced by DomainDecomposition::split).
inline DistributedResult run_distributed_fof(Communicator& comm, const DomainDecomposition& dd,
                                             std::span<const Particle> particles, const LinkingLength& l,
                                             const FofOptions& opt = {},
                                             const MergeStrategy& merge = default_merge) {
  const Box& box = dd.box();
  validate(box, l);
  std::vector<Particle> local(particles.begin(), particles.end());
  for (auto& p : local)
    p.pos = wrap_position(p.pos, box);

  // Step 1: threaded local search. The grid spans the whole box, so scale the
  // cell cap by how much of it this rank actually occupies.
  const double ppc = opt.particles_per_cell * dd.volume_share(comm.rank());
  auto uf = run_local_fof(local, box, l, opt.threads, ppc);
  const auto group_size = compute_group_sizes_parallel(uf, opt.threads);

  // Step 2: globally unique ids.
  const std::uint64_t n_local = local.size();
  const std::uint64_t offset = scan_offset(comm, n_local);
  const auto gid = relabel_global(uf, offset);
  std::vector<std::uint64_t> fragment(n_local);
  for (std::size_t i = 0; i < n_local; ++i)
    fragment[i] = group_size[gid[i] - offset];

  // Step 3: cross-domain links, gathered everywhere.
  const auto links = exchange_boundary_links(comm, dd, local, gid, fragment, l);
  const auto all_links = allgather_links(comm, links);

  // Step 4: identical merge on every rank.
  const RankContext ctx{comm.rank(), comm.size(), offset, n_local};
  const GlobalMerge merged = merge(all_links, ctx);

  DistributedResult out;
  out.node_offset = offset;
  out.local_links = links.size();
  out.global_links = all_links.size();

  // Least particle id of every local fragment.
  std::unordered_map<std::uint64_t, std::uint64_t> least;
  for (std::size_t i = 0; i < n_local; ++i) {
    auto [it, fresh] = least.try_emplace(gid[i], local[i].id);
    if (!fresh)
      it->second = std::min(it->second, local[i].id);
  }

  // Spanning groups need their least member agreed across ranks.
  ByteWriter w;
  for (const auto& [g, id] : least)
    if (const MergedGroup* m = merged.lookup(g)) {
      w.u64(m->root_id);
      w.u64(id);
    }
  std::unordered_map<std::uint64_t, std::uint64_t> span_least;
  for (const auto& packet : comm.allgather(w.take())) {
    ByteReader r(packet);
    while (!r.done()) {
      const std::uint64_t root = r.u64();
      const std::uint64_t id = r.u64();
      auto [it, fresh] = span_least.try_emplace(root, id);
      if (!fresh)
        it->second = std::min(it->second, id);
    }
  }

  struct Resolved {
    std::uint64_t representative;
    std::uint64_t canonical;
    std::uint64_t size;
  };
  auto resolve = [&](std::uint64_t g) -> Resolved {
    if (const MergedGroup* m = merged.lookup(g))
      return {m->root_id, span_least.at(m->root_id), m->total_size};
    return {g, least.at(g), group_size[g - offset]};
  };

  ByteWriter owned;
  for (std::size_t i = 0; i < n_local; ++i) {
    if (gid[i] != i + offset)
      continue;  // not a local root
    const Resolved r = resolve(gid[i]);
    if (r.representative != gid[i])
      continue;  // counted where the representative fragment lives
    ++out.owned_groups;
    if (r.size >= opt.min_size) {
      owned.u64(r.canonical);
      owned.u64(r.size);
    }
  }
  out.catalog.min_size = opt.min_size;
  for (const auto& packet : comm.allgather(owned.take())) {
    ByteReader r(packet);
    while (!r.done()) {
      const std::uint64_t id = r.u64();
      const std::uint64_t size = r.u64();
      out.catalog.entries.push_back({id, size});
    }
  }
  out.catalog.sort();

  out.membership.resize(n_local);
  for (std::size_t i = 0; i < n_local; ++i)
    out.membership[i] = {local[i].id, resolve(gid[i]).canonical};
  std::sort(out.membership.begin(), out.membership.end(),
            [](const Membership& a, const Membership& b) { return a.particle_id < b.particle_id; });
  return out;
}

/// Convenience driver: splits the particles, runs every rank on its own
/// thread, and returns the per-rank results.
inline std::vector<DistributedResult> run_in_process(const DomainDecomposition& dd, std::span<const Particle> particles,
                                                     const LinkingLength& l, const FofOptions& opt = {},
                                                     const MergeStrategy& merge = default_merge) {
  const auto parts = dd.split(particles);
  std::vector<DistributedResult> results(static_cast<std::size_t>(dd.ranks()));
  run_ranks(dd.ranks(), [&](Communicator& comm) {
    results[comm.rank()] = run_distributed_fof(comm, dd, parts[comm.rank()], l, opt, merge);
  });
  return results;
}

/// All ranks' memberships merged and sorted by particle id.
inline std::vector<Membership> gather_membership(const std::vector<DistributedResult>& results) {
  std::vector<Membership> all;
  for (const auto& r : results)
    all.insert(all.end(), r.membership.begin(), r.membership.end());
  std::sort(all.begin(), all.end(),
            [](const Membership& a, const Membership& b) { return a.particle_id < b.particle_id; });
  return all;
}

} // namespace fof::dist
