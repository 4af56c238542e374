#pragma once

// Shared helpers for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fof/fof.hpp"

namespace fof::test {

struct Instance {
  io::ParticleSet set;
  LinkingLength l;
};

/// Random instance: uniform or blobby, periodic or not, with the linking
/// length scaled to the mean interparticle spacing so groups of all sizes
/// appear.
inline Instance random_instance(std::uint64_t seed, std::size_t n_min = 10, std::size_t n_max = 2000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = n_min + rng() % (n_max - n_min + 1);
  const bool periodic = rng() % 2 == 0;
  const bool blobs = rng() % 2 == 0;
  const Vec3 extent{1.0 + 2.0 * u(rng), 1.0 + 2.0 * u(rng), 1.0 + 2.0 * u(rng)};
  const Box box = Box::make(extent, periodic);
  const double spacing = std::cbrt(box.volume() / static_cast<double>(n));
  double l = spacing * (0.3 + 0.9 * u(rng));
  const double lmax = 0.45 * std::min({extent[0], extent[1], extent[2]});
  l = std::min(l, lmax);

  gen::BlobParams bp;
  bp.count = 1 + rng() % 12;
  bp.width = l * (0.2 + 2.0 * u(rng));
  bp.background = 0.3 * u(rng);
  Instance inst{{box, gen::generate(blobs ? gen::Distribution::blobs : gen::Distribution::uniform, n, box, rng(), bp)},
                LinkingLength::make(l)};
  // Shuffle ids so labels are not just positions in the array.
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i)
    ids[i] = i * 7 + 3;
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < n; ++i)
    inst.set.particles[i].id = ids[i];
  return inst;
}

inline oracle::Partition partition_of(std::span<const Membership> members) {
  std::vector<std::uint64_t> ids, labels;
  ids.reserve(members.size());
  labels.reserve(members.size());
  for (const auto& m : members) {
    ids.push_back(m.particle_id);
    labels.push_back(m.group_id);
  }
  return oracle::Partition::from_labels(ids, labels);
}

template <class UF>
oracle::Partition partition_of(std::span<const Particle> ps, UF& uf) {
  std::vector<std::uint64_t> ids, labels;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ids.push_back(ps[i].id);
    labels.push_back(uf.find(i));
  }
  return oracle::Partition::from_labels(ids, labels);
}

/// Size multiset of the brute-force partition restricted to groups >= min_size.
inline std::vector<std::uint64_t> sizes_at_least(const oracle::Partition& p, std::uint64_t min_size) {
  std::vector<std::uint64_t> out;
  for (auto s : p.size_multiset())
    if (s >= min_size)
      out.push_back(s);
  return out;
}

inline std::vector<std::uint64_t> sizes_of(const GroupCatalog& cat) {
  std::vector<std::uint64_t> out;
  for (const auto& e : cat.entries)
    out.push_back(e.size);
  std::sort(out.begin(), out.end());
  return out;
}

// Links dropped unless this rank holds one of the two fragments itself: a
// rank then only sees groups one hop away from its own.
inline dist::GlobalMerge direct_neighbour_merge(std::span<const dist::GroupLink> links, const dist::RankContext& ctx) {
  std::vector<dist::GroupLink> mine;
  for (const auto& k : links)
    if (ctx.owns(k.id_a) || ctx.owns(k.id_b))
      mine.push_back(k);
  return dist::merge_global(mine);
}

// Five x-slabs laid out left to right as ranks 0, 3, 4, 2, 1. One chain of
// particles (ids 100 to 137) runs from slab 0 into slab 3, so the fragment on
// rank 0 reaches the fragment on rank 2 only through the fragments on ranks 3
// and 4.
struct ChainScenario {
  static constexpr std::uint64_t kFirstChainId = 100;
  static constexpr std::uint64_t kChainLength = 38;

  Box box = Box::make({5.0, 1.0, 1.0}, false);
  LinkingLength l = LinkingLength::make(0.1);
  dist::DomainDecomposition dd = dist::DomainDecomposition::slabs(box, 5, 0, {0, 3, 4, 2, 1});
  Particles particles;

  ChainScenario() {
    std::uint64_t id = kFirstChainId;
    for (std::uint64_t k = 0; k < kChainLength; ++k)
      particles.push_back({id++, {0.5 + 0.08 * static_cast<double>(k), 0.5, 0.5}});
    // Unrelated particles on every rank.
    for (int k = 0; k < 5; ++k)
      particles.push_back({id++, {k + 0.5, 0.1, 0.9}});
  }

  bool in_chain(std::uint64_t id) const { return id >= kFirstChainId && id < kFirstChainId + kChainLength; }
};

} // namespace fof::test
