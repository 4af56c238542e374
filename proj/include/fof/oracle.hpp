#pragma once

// Brute-force reference group finders. Slow on purpose: they exist to check
// the engine, so they share none of its neighbour-search machinery.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fof/geometry.hpp"
#include "fof/types.hpp"

namespace fof::oracle {

inline constexpr std::size_t kMaxParticles = 100000;

/// Canonical partition: each particle ID mapped to the least ID in its block.
class Partition {
public:
  Partition() = default;

  /// Builds from arbitrary per-particle labels.
  static Partition from_labels(std::span<const std::uint64_t> ids, std::span<const std::uint64_t> labels) {
    if (ids.size() != labels.size())
      throw Error("ids and labels differ in length");
    std::map<std::uint64_t, std::uint64_t> least;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto [it, fresh] = least.try_emplace(labels[i], ids[i]);
      if (!fresh)
        it->second = std::min(it->second, ids[i]);
    }
    Partition p;
    p.rep_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      p.rep_.emplace_back(ids[i], least.at(labels[i]));
    std::sort(p.rep_.begin(), p.rep_.end());
    for (std::size_t i = 1; i < p.rep_.size(); ++i)
      if (p.rep_[i].first == p.rep_[i - 1].first)
        throw Error("duplicate particle id " + std::to_string(p.rep_[i].first));
    return p;
  }

  /// (particle id, representative) sorted by particle id.
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& representatives() const { return rep_; }

  std::size_t size() const { return rep_.size(); }

  std::uint64_t representative(std::uint64_t id) const {
    auto it = std::lower_bound(rep_.begin(), rep_.end(), std::pair<std::uint64_t, std::uint64_t>{id, 0});
    if (it == rep_.end() || it->first != id)
      throw Error("particle id " + std::to_string(id) + " not in partition");
    return it->second;
  }

  /// Block sizes in ascending order.
  std::vector<std::uint64_t> size_multiset() const {
    std::map<std::uint64_t, std::uint64_t> count;
    for (const auto& [id, rep] : rep_)
      ++count[rep];
    std::vector<std::uint64_t> sizes;
    for (const auto& [rep, n] : count)
      sizes.push_back(n);
    std::sort(sizes.begin(), sizes.end());
    return sizes;
  }

  std::size_t block_count() const {
    std::size_t n = 0;
    for (const auto& [id, rep] : rep_)
      n += id == rep;
    return n;
  }

private:
  std::vector<std::pair<std::uint64_t, std::uint64_t>> rep_;
};

struct Comparison {
  bool equal = true;
  /// Two particle IDs grouped together by one partition and apart by the other.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> witness;

  explicit operator bool() const { return equal; }
};

/// Block-wise equality, independent of labelling. Throws if the partitions
/// cover different particle IDs.
inline Comparison partitions_equal(const Partition& a, const Partition& b) {
  const auto& ra = a.representatives();
  const auto& rb = b.representatives();
  if (ra.size() != rb.size())
    throw Error("partitions cover different particle sets");
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (ra[i].first != rb[i].first)
      throw Error("partitions cover different particle sets");
  // Canonical labels make equal partitions identical, so the first differing
  // representative gives a witness pair.
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].second == rb[i].second)
      continue;
    const std::uint64_t id = ra[i].first;
    for (std::uint64_t other : {ra[i].second, rb[i].second}) {
      if (other == id)
        continue;
      const bool in_a = a.representative(other) == ra[i].second;
      const bool in_b = b.representative(other) == rb[i].second;
      if (in_a != in_b)
        return {false, std::pair{id, other}};
    }
    return {false, std::nullopt};
  }
  return {true, std::nullopt};
}

namespace detail {

inline void guard(std::size_t n) {
  if (n > kMaxParticles)
    throw Error("oracle limited to " + std::to_string(kMaxParticles) + " particles");
}

inline std::vector<Vec3> wrapped(std::span<const Particle> ps, const Box& box) {
  std::vector<Vec3> out;
  out.reserve(ps.size());
  for (const auto& p : ps)
    out.push_back(wrap_position(p.pos, box));
  return out;
}

inline std::vector<std::uint64_t> ids(std::span<const Particle> ps) {
  std::vector<std::uint64_t> out;
  out.reserve(ps.size());
  for (const auto& p : ps)
    out.push_back(p.id);
  return out;
}

} // namespace detail

/// Every pair checked, merged with a plain array union-find where the larger
/// root points at the smaller.
inline Partition naive_fof(std::span<const Particle> particles, const Box& box, const LinkingLength& l) {
  detail::guard(particles.size());
  validate(box, l);
  const auto pos = detail::wrapped(particles, box);
  const std::size_t n = pos.size();
  std::vector<std::size_t> group_index(n);
  for (std::size_t i = 0; i < n; ++i)
    group_index[i] = i;
  auto find = [&](std::size_t i) {
    while (group_index[i] != i)
      i = group_index[i];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      if (!l.links(min_image_dist2(pos[i], pos[j], box)))
        continue;
      const std::size_t ri = find(i), rj = find(j);
      if (ri < rj)
        group_index[rj] = ri;
      else
        group_index[ri] = rj;
    }
  std::vector<std::uint64_t> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = find(i);
  const auto id = detail::ids(particles);
  return Partition::from_labels(id, labels);
}

/// Builds the proximity graph explicitly and labels components by BFS.
inline Partition bfs_fof(std::span<const Particle> particles, const Box& box, const LinkingLength& l) {
  detail::guard(particles.size());
  validate(box, l);
  const auto pos = detail::wrapped(particles, box);
  const std::size_t n = pos.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (l.links(min_image_dist2(pos[i], pos[j], box))) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  constexpr auto kUnseen = static_cast<std::uint64_t>(-1);
  std::vector<std::uint64_t> label(n, kUnseen);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != kUnseen)
      continue;
    label[s] = s;
    queue.push_back(s);
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (auto v : adj[u])
        if (label[v] == kUnseen) {
          label[v] = s;
          queue.push_back(v);
        }
    }
  }
  const auto id = detail::ids(particles);
  return Partition::from_labels(id, label);
}

} // namespace fof::oracle
