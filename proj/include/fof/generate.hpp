#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fof/geometry.hpp"
#include "fof/particle_io.hpp"
#include "fof/types.hpp"

namespace fof::gen {

enum class Distribution { uniform, blobs };

struct BlobParams {
  std::size_t count = 8;
  /// Per-axis standard deviation of each blob.
  double width = 0.01;
  /// Fraction of particles drawn uniformly instead of from a blob.
  double background = 0.0;
};

/// Stream of doubles built directly from mt19937_64 output, so a seed gives
/// the same particles on every standard library.
class Stream {
public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Blob centres sit at distinct, randomly chosen sites of a k^3 lattice with
/// k = ceil(cbrt(count)), so centres are at least extent/k apart per axis.
inline std::vector<Vec3> blob_centers(std::size_t count, const Box& box, Stream& rng) {
  std::size_t k = 1;
  while (k * k * k < count)
    ++k;
  std::vector<std::size_t> sites(k * k * k);
  for (std::size_t s = 0; s < sites.size(); ++s)
    sites[s] = s;
  for (std::size_t s = sites.size(); s > 1; --s)
    std::swap(sites[s - 1], sites[rng.below(s)]);
  std::vector<Vec3> centers(count);
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t s = sites[b];
    const std::array<std::size_t, 3> c{s / (k * k), (s / k) % k, s % k};
    for (int d = 0; d < 3; ++d)
      centers[b][d] = (static_cast<double>(c[d]) + 0.5) * box.extent[d] / static_cast<double>(k);
  }
  return centers;
}

/// n particles with ids 0..n-1 and positions in [0, extent). Blob particles
/// are dealt round-robin over the blobs.
inline Particles generate(Distribution kind, std::size_t n, const Box& box, std::uint64_t seed,
                          const BlobParams& blobs = {}) {
  if (n < 1)
    throw Error("particle count must be at least 1");
  if (kind == Distribution::blobs) {
    if (blobs.count < 1)
      throw Error("blob count must be at least 1");
    if (!(blobs.width >= 0.0) || !std::isfinite(blobs.width))
      throw Error("blob width must be finite and non-negative");
    if (!(blobs.background >= 0.0 && blobs.background <= 1.0))
      throw Error("background fraction must lie in [0, 1]");
  }
  Stream rng(seed);
  Particles out(n);
  auto uniform_point = [&] {
    Vec3 p{};
    for (int d = 0; d < 3; ++d)
      p[d] = wrap_coordinate(rng.uniform() * box.extent[d], box.extent[d]);
    return p;
  };

  if (kind == Distribution::uniform) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = {i, uniform_point()};
    return out;
  }

  const auto centers = blob_centers(blobs.count, box, rng);
  std::size_t dealt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (blobs.background > 0.0 && rng.uniform() < blobs.background) {
      out[i] = {i, uniform_point()};
      continue;
    }
    const Vec3& c = centers[dealt++ % centers.size()];
    Vec3 p{};
    for (int d = 0; d < 3; ++d)
      p[d] = wrap_coordinate(c[d] + blobs.width * rng.normal(), box.extent[d]);
    out[i] = {i, p};
  }
  return out;
}

/// Tiles the volume times[d] times along each axis. Copy c (x-major order)
/// shifts by whole extents and relabels ids as c * (max_id + 1) + id, so the
/// first copy keeps the original ids.
inline io::ParticleSet replicate(const io::ParticleSet& in, std::array<std::size_t, 3> times) {
  for (auto t : times)
    if (t < 1)
      throw Error("replication factor must be at least 1");
  std::uint64_t max_id = 0;
  for (const auto& p : in.particles)
    max_id = std::max(max_id, p.id);
  const std::uint64_t copies = times[0] * times[1] * times[2];
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (max_id == kMax || (copies > 1 && (max_id + 1) > kMax / copies))
    throw Error("replicated particle ids overflow 64 bits");

  io::ParticleSet out;
  out.box = Box::make({in.box.extent[0] * static_cast<double>(times[0]), in.box.extent[1] * static_cast<double>(times[1]),
                       in.box.extent[2] * static_cast<double>(times[2])},
                      in.box.periodic);
  out.particles.reserve(in.particles.size() * copies);
  std::uint64_t c = 0;
  for (std::size_t x = 0; x < times[0]; ++x)
    for (std::size_t y = 0; y < times[1]; ++y)
      for (std::size_t z = 0; z < times[2]; ++z, ++c) {
        const Vec3 shift{static_cast<double>(x) * in.box.extent[0], static_cast<double>(y) * in.box.extent[1],
                         static_cast<double>(z) * in.box.extent[2]};
        for (const auto& p : in.particles)
          out.particles.push_back(
              {c * (max_id + 1) + p.id, {p.pos[0] + shift[0], p.pos[1] + shift[1], p.pos[2] + shift[2]}});
      }
  return out;
}

inline io::ParticleSet replicate(const io::ParticleSet& in, std::size_t times) {
  return replicate(in, {times, times, times});
}

} // namespace fof::gen
