#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fof/types.hpp"

namespace fof {

/// Axis-aligned simulation volume [0, extent). Periodicity applies to all
/// three axes or none.
struct Box {
  Vec3 extent{1.0, 1.0, 1.0};
  bool periodic = false;

  static Box make(Vec3 extent, bool periodic) {
    for (double e : extent)
      if (!std::isfinite(e) || !(e > 0.0))
        throw Error("box extent must be finite and positive");
    return Box{extent, periodic};
  }

  double volume() const { return extent[0] * extent[1] * extent[2]; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Whether particles at exactly the linking length are friends. Strict is the
/// default and matches the `r < l` test of the classic neighbour loop.
enum class LinkMode : std::uint8_t { strict, inclusive };

struct LinkingLength {
  double length = 0.0;
  double length2 = 0.0;
  LinkMode mode = LinkMode::strict;

  static LinkingLength make(double l, LinkMode mode = LinkMode::strict) {
    if (!std::isfinite(l) || !(l > 0.0))
      throw Error("linking length must be finite and positive");
    return LinkingLength{l, l * l, mode};
  }

  bool links(double dist2) const {
    return mode == LinkMode::strict ? dist2 < length2 : dist2 <= length2;
  }
};

/// Checks that minimum-image distances are well defined for this linking
/// length: in a periodic box every axis must be longer than 2 l.
inline void validate(const Box& box, const LinkingLength& l) {
  if (!box.periodic)
    return;
  for (double e : box.extent)
    if (!(l.length < 0.5 * e))
      throw Error("linking length must be smaller than half the periodic box extent");
}

inline double wrap_coordinate(double x, double extent) {
  double w = std::fmod(x, extent);
  if (w < 0.0)
    w += extent;
  if (w >= extent)
    w -= extent;
  return w;
}

/// Maps a position into [0, extent) for periodic boxes; identity otherwise.
inline Vec3 wrap_position(const Vec3& p, const Box& box) {
  if (!box.periodic)
    return p;
  return {wrap_coordinate(p[0], box.extent[0]), wrap_coordinate(p[1], box.extent[1]),
          wrap_coordinate(p[2], box.extent[2])};
}

inline double min_image_delta(double d, double extent) {
  if (d > 0.5 * extent)
    d -= extent;
  else if (d < -0.5 * extent)
    d += extent;
  return d;
}

/// Squared separation, using the nearest periodic image when the box is
/// periodic. Positions must already be wrapped.
inline double min_image_dist2(const Vec3& a, const Vec3& b, const Box& box) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    double dx = a[d] - b[d];
    if (box.periodic)
      dx = min_image_delta(dx, box.extent[d]);
    s += dx * dx;
  }
  return s;
}

inline double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// Relative slack applied when deciding which cells can hold friends. It
/// keeps floating-point binning error from ever hiding a linked pair.
inline constexpr double kCellMargin = 1e-9;

/// Uniform binning of particle indices with cell edges no shorter than the
/// linking length. Members are stored in CSR form: the particles of cell c
/// are members[cell_start[c] .. cell_start[c+1]).
struct CellGrid {
  std::array<std::size_t, 3> dims{1, 1, 1};
  Vec3 cell_edge{};
  std::array<int, 3> reach{1, 1, 1};  // neighbour stencil half-width per axis
  std::vector<std::size_t> cell_start;
  std::vector<std::size_t> members;

  std::size_t cell_count() const { return dims[0] * dims[1] * dims[2]; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (x * dims[1] + y) * dims[2] + z;
  }

  std::array<std::size_t, 3> coords(std::size_t c) const {
    return {c / (dims[1] * dims[2]), (c / dims[2]) % dims[1], c % dims[2]};
  }

  std::size_t axis_cell(double x, int d) const {
    const double f = std::floor(x / cell_edge[d]);
    if (!(f > 0.0))
      return 0;
    const auto hi = static_cast<double>(dims[d] - 1);
    return static_cast<std::size_t>(std::min(f, hi));
  }

  std::size_t cell_of(const Vec3& p) const {
    return index(axis_cell(p[0], 0), axis_cell(p[1], 1), axis_cell(p[2], 2));
  }

  std::span<const std::size_t> bin(std::size_t c) const {
    return {members.data() + cell_start[c], cell_start[c + 1] - cell_start[c]};
  }

  std::size_t bin_size(std::size_t c) const { return cell_start[c + 1] - cell_start[c]; }
};

namespace detail {

inline std::array<std::size_t, 3> grid_dims(const Box& box, const LinkingLength& l,
                                            std::size_t max_cells) {
  std::array<double, 3> want{};
  for (int d = 0; d < 3; ++d)
    want[d] = std::max(1.0, std::floor(box.extent[d] / l.length));
  if (max_cells > 0) {
    const double total = want[0] * want[1] * want[2];
    const auto cap = static_cast<double>(max_cells);
    if (total > cap) {
      const double shrink = std::cbrt(total / cap);
      for (auto& w : want)
        w = std::max(1.0, std::floor(w / shrink));
      while (want[0] * want[1] * want[2] > cap) {
        auto it = std::max_element(want.begin(), want.end());
        if (*it <= 1.0)
          break;
        *it -= 1.0;
      }
    }
  }
  if (want[0] * want[1] * want[2] > static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
    throw Error("cell grid too fine; pass a cell cap or a larger linking length");
  return {static_cast<std::size_t>(want[0]), static_cast<std::size_t>(want[1]),
          static_cast<std::size_t>(want[2])};
}

} // namespace detail

/// Bins particles into a uniform grid with dims[d] = floor(extent[d] / l),
/// at least 1. A nonzero max_cells coarsens the grid uniformly until the
/// total cell count fits; cells only ever grow, so edges stay >= l.
/// Periodic positions must already be wrapped into [0, extent).
inline CellGrid build_grid(std::span<const Particle> particles, const Box& box,
                           const LinkingLength& l, std::size_t max_cells = 0) {
  validate(box, l);
  for (const auto& p : particles)
    for (double x : p.pos)
      if (!std::isfinite(x))
        throw Error("particle " + std::to_string(p.id) + " has a non-finite coordinate");

  CellGrid g;
  g.dims = detail::grid_dims(box, l, max_cells);
  for (int d = 0; d < 3; ++d) {
    g.cell_edge[d] = box.extent[d] / static_cast<double>(g.dims[d]);
    g.reach[d] = g.cell_edge[d] <= l.length * (1.0 + kCellMargin) ? 2 : 1;
  }

  const std::size_t ncell = g.cell_count();
  std::vector<std::uint32_t> cell(particles.size());
  g.cell_start.assign(ncell + 1, 0);
  for (std::size_t i = 0; i < particles.size(); ++i) {
    cell[i] = static_cast<std::uint32_t>(g.cell_of(particles[i].pos));
    ++g.cell_start[cell[i] + 1];
  }
  for (std::size_t c = 0; c < ncell; ++c)
    g.cell_start[c + 1] += g.cell_start[c];
  g.members.resize(particles.size());
  std::vector<std::size_t> fill(g.cell_start.begin(), g.cell_start.end() - 1);
  for (std::size_t i = 0; i < particles.size(); ++i)
    g.members[fill[cell[i]]++] = i;
  return g;
}

/// A unit of neighbour-search work: all pairs inside one cell, or all pairs
/// across two cells. For a pair task, `image` is the periodic image of
/// cell_b's particles (in whole box lengths) relative to cell_a. When more
/// than one image of cell_b lies within reach, `min_image` is set and the
/// shift is ignored in favour of per-pair minimum-image distances.
struct ProximityTask {
  enum class Kind : std::uint8_t { self, pair };

  Kind kind = Kind::self;
  bool min_image = false;
  std::array<std::int8_t, 3> image{0, 0, 0};
  std::uint32_t cell_a = 0;
  std::uint32_t cell_b = 0;

  Vec3 shift(const Box& box) const {
    return {image[0] * box.extent[0], image[1] * box.extent[1], image[2] * box.extent[2]};
  }

  friend bool operator==(const ProximityTask&, const ProximityTask&) = default;
};

namespace detail {

struct CellImage {
  std::size_t cell;
  std::array<std::int8_t, 3> image;
};

// Cells (with periodic image) whose bounding box lies within the linking
// length of cell `a`, excluding `a` itself.
template <class Fn>
void for_each_neighbor_cell(const CellGrid& g, const Box& box, const LinkingLength& l,
                            std::size_t a, Fn&& fn) {
  const auto ca = g.coords(a);
  const double limit = l.length * (1.0 + kCellMargin);
  const double limit2 = limit * limit;
  for (int dx = -g.reach[0]; dx <= g.reach[0]; ++dx)
    for (int dy = -g.reach[1]; dy <= g.reach[1]; ++dy)
      for (int dz = -g.reach[2]; dz <= g.reach[2]; ++dz) {
        const std::array<int, 3> off{dx, dy, dz};
        double sep2 = 0.0;
        std::array<std::size_t, 3> cb{};
        std::array<std::int8_t, 3> image{};
        bool inside = true;
        for (int d = 0; d < 3; ++d) {
          const double gap = std::max(0, std::abs(off[d]) - 1) * g.cell_edge[d];
          sep2 += gap * gap;
          const auto n = static_cast<long long>(g.dims[d]);
          long long c = static_cast<long long>(ca[d]) + off[d];
          if (c < 0 || c >= n) {
            if (!box.periodic) {
              inside = false;
              break;
            }
            const long long wrapped = ((c % n) + n) % n;
            image[d] = static_cast<std::int8_t>((c - wrapped) / n);
            c = wrapped;
          }
          cb[d] = static_cast<std::size_t>(c);
        }
        if (!inside || sep2 > limit2)
          continue;
        const std::size_t b = g.index(cb[0], cb[1], cb[2]);
        if (b == a)
          continue;
        fn(CellImage{b, image});
      }
}

} // namespace detail

/// One self task per non-empty cell, then one pair task per unordered pair of
/// non-empty cells within the linking length (cell_a < cell_b). The order is
/// a pure function of the grid.
inline std::vector<ProximityTask> make_tasks(const CellGrid& g, const Box& box,
                                             const LinkingLength& l) {
  std::vector<ProximityTask> tasks;
  const std::size_t ncell = g.cell_count();
  bool self_wrap = false;
  if (box.periodic)
    for (auto n : g.dims)
      self_wrap = self_wrap || n == 1;

  for (std::size_t c = 0; c < ncell; ++c)
    if (g.bin_size(c) > 0) {
      ProximityTask t;
      t.kind = ProximityTask::Kind::self;
      t.min_image = self_wrap;
      t.cell_a = t.cell_b = static_cast<std::uint32_t>(c);
      tasks.push_back(t);
    }

  std::vector<detail::CellImage> found;
  for (std::size_t a = 0; a < ncell; ++a) {
    if (g.bin_size(a) == 0)
      continue;
    found.clear();
    detail::for_each_neighbor_cell(g, box, l, a, [&](const detail::CellImage& ci) {
      if (ci.cell > a && g.bin_size(ci.cell) > 0)
        found.push_back(ci);
    });
    std::sort(found.begin(), found.end(), [](const auto& x, const auto& y) {
      return x.cell != y.cell ? x.cell < y.cell : x.image < y.image;
    });
    for (std::size_t k = 0; k < found.size();) {
      std::size_t e = k + 1;
      bool several = false;
      while (e < found.size() && found[e].cell == found[k].cell) {
        several = several || found[e].image != found[k].image;
        ++e;
      }
      ProximityTask t;
      t.kind = ProximityTask::Kind::pair;
      t.cell_a = static_cast<std::uint32_t>(a);
      t.cell_b = static_cast<std::uint32_t>(found[k].cell);
      t.min_image = several;
      t.image = several ? std::array<std::int8_t, 3>{0, 0, 0} : found[k].image;
      tasks.push_back(t);
      k = e;
    }
  }
  return tasks;
}

/// Calls fn(index) for every particle binned in a cell that could hold a
/// friend of point p. The caller still has to test the actual distance.
template <class Fn>
void for_each_candidate(const CellGrid& g, const Box& box, const LinkingLength& l, const Vec3& p,
                        Fn&& fn) {
  const std::size_t home = g.cell_of(p);
  std::vector<std::size_t> cells{home};
  detail::for_each_neighbor_cell(g, box, l, home,
                                 [&](const detail::CellImage& ci) { cells.push_back(ci.cell); });
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  for (auto c : cells)
    for (auto i : g.bin(c))
      fn(i);
}

} // namespace fof
