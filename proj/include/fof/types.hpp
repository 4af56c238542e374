#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fof {

using Vec3 = std::array<double, 3>;

struct Particle {
  std::uint64_t id = 0;
  Vec3 pos{};

  friend bool operator==(const Particle&, const Particle&) = default;
};

using Particles = std::vector<Particle>;

/// Raised for malformed inputs: bad geometry, unreadable files, bad flags.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace fof
