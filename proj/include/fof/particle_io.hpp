#pragma once

// Particle files.
//
// Binary (little-endian):
//   "FOF1" | u32 version | u64 count | 3 x f64 extent | u8 periodic
//   count x (u64 id | 3 x f64 position)
//
// Text:
//   # box=<ex>,<ey>,<ez> periodic=<0|1>
//   id,x,y,z
//   <id>,<x>,<y>,<z>
//
// Reading sniffs the magic; writing picks text for a ".csv" suffix.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "fof/engine.hpp"
#include "fof/geometry.hpp"
#include "fof/types.hpp"

namespace fof::io {

inline constexpr std::array<char, 4> kMagic{'F', 'O', 'F', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 24 + 1;
inline constexpr std::size_t kRecordBytes = 8 + 24;

struct ParticleSet {
  Box box;
  Particles particles;

  friend bool operator==(const ParticleSet&, const ParticleSet&) = default;
};

inline void check_particles(const ParticleSet& set) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(set.particles.size());
  for (const auto& p : set.particles) {
    for (double x : p.pos)
      if (!std::isfinite(x))
        throw Error("particle " + std::to_string(p.id) + " has a non-finite coordinate");
    if (!seen.insert(p.id).second)
      throw Error("duplicate particle id " + std::to_string(p.id));
  }
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k)
    out.push_back(static_cast<char>(v >> (8 * k)));
}

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw Error("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw Error("line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t k = s.find(sep, start);
    out.push_back(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
    if (k == std::string_view::npos)
      return out;
    start = k + 1;
  }
}

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r')
    s.remove_suffix(1);
  return s;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void spit(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out)
    throw Error("write failed: " + path.string());
}

} // namespace detail

inline std::string encode_binary(const ParticleSet& set) {
  std::string out;
  out.reserve(kHeaderBytes + kRecordBytes * set.particles.size());
  out.append(kMagic.data(), kMagic.size());
  for (int k = 0; k < 4; ++k)
    out.push_back(static_cast<char>(kFormatVersion >> (8 * k)));
  detail::put_u64(out, set.particles.size());
  for (double e : set.box.extent)
    detail::put_u64(out, std::bit_cast<std::uint64_t>(e));
  out.push_back(set.box.periodic ? 1 : 0);
  for (const auto& p : set.particles) {
    detail::put_u64(out, p.id);
    for (double x : p.pos)
      detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

inline ParticleSet decode_binary(std::string_view data) {
  if (data.size() < kHeaderBytes || std::memcmp(data.data(), kMagic.data(), 4) != 0)
    throw Error("not a FOF1 particle file");
  std::uint32_t version = 0;
  for (int k = 0; k < 4; ++k)
    version |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[4 + k])) << (8 * k);
  if (version != kFormatVersion)
    throw Error("unsupported particle file version " + std::to_string(version));
  const std::uint64_t count = detail::get_u64(data.data() + 8);
  Vec3 extent{};
  for (int d = 0; d < 3; ++d)
    extent[d] = std::bit_cast<double>(detail::get_u64(data.data() + 16 + 8 * d));
  const unsigned char flag = static_cast<unsigned char>(data[40]);
  if (flag > 1)
    throw Error("bad periodic flag in particle file");
  if ((data.size() - kHeaderBytes) % kRecordBytes != 0 || (data.size() - kHeaderBytes) / kRecordBytes != count)
    throw Error("particle count " + std::to_string(count) + " does not match file length");
  ParticleSet set{Box::make(extent, flag == 1), Particles(count)};
  const char* p = data.data() + kHeaderBytes;
  for (auto& part : set.particles) {
    part.id = detail::get_u64(p);
    for (int d = 0; d < 3; ++d)
      part.pos[d] = std::bit_cast<double>(detail::get_u64(p + 8 + 8 * d));
    p += kRecordBytes;
  }
  check_particles(set);
  return set;
}

inline std::string encode_csv(const ParticleSet& set) {
  std::string out = "# box=" + detail::format_double(set.box.extent[0]) + "," +
                    detail::format_double(set.box.extent[1]) + "," + detail::format_double(set.box.extent[2]) +
                    " periodic=" + (set.box.periodic ? "1" : "0") + "\nid,x,y,z\n";
  for (const auto& p : set.particles) {
    out += std::to_string(p.id);
    for (double x : p.pos) {
      out += ',';
      out += detail::format_double(x);
    }
    out += '\n';
  }
  return out;
}

inline ParticleSet decode_csv(std::string_view data) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= data.size())
      return false;
    const std::size_t k = data.find('\n', pos);
    line = detail::trim_cr(data.substr(pos, k == std::string_view::npos ? std::string_view::npos : k - pos));
    pos = k == std::string_view::npos ? data.size() : k + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || !line.starts_with("# box="))
    throw Error("particle CSV must start with '# box=<ex>,<ey>,<ez> periodic=<0|1>'");
  const std::size_t space = line.find(' ', 6);
  if (space == std::string_view::npos || !line.substr(space + 1).starts_with("periodic="))
    throw Error("line 1: missing periodic=<0|1>");
  const auto dims = detail::split(line.substr(6, space - 6), ',');
  if (dims.size() != 3)
    throw Error("line 1: box needs three extents");
  const std::string_view flag = line.substr(space + 10);
  if (flag != "0" && flag != "1")
    throw Error("line 1: periodic must be 0 or 1");
  ParticleSet set;
  set.box = Box::make({detail::parse_double(dims[0], 1), detail::parse_double(dims[1], 1),
                       detail::parse_double(dims[2], 1)},
                      flag == "1");

  if (!next_line(line) || line != "id,x,y,z")
    throw Error("line 2: expected header 'id,x,y,z'");
  while (next_line(line)) {
    if (line.empty())
      continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 4)
      throw Error("line " + std::to_string(line_no) + ": expected 4 fields");
    set.particles.push_back({detail::parse_u64(f[0], line_no),
                             {detail::parse_double(f[1], line_no), detail::parse_double(f[2], line_no),
                              detail::parse_double(f[3], line_no)}});
  }
  check_particles(set);
  return set;
}

inline bool is_csv_path(const std::filesystem::path& path) { return path.extension() == ".csv"; }

inline ParticleSet read_particles(const std::filesystem::path& path) {
  const std::string data = detail::slurp(path);
  if (data.size() >= 4 && std::memcmp(data.data(), kMagic.data(), 4) == 0)
    return decode_binary(data);
  return decode_csv(data);
}

inline void write_particles(const std::filesystem::path& path, const ParticleSet& set) {
  detail::spit(path, is_csv_path(path) ? encode_csv(set) : encode_binary(set));
}

inline std::string format_catalog(const GroupCatalog& cat) {
  std::string out = "group_id,size\n";
  for (const auto& e : cat.entries)
    out += std::to_string(e.id) + "," + std::to_string(e.size) + "\n";
  return out;
}

inline std::string format_membership(std::span<const Membership> members) {
  std::string out = "particle_id,group_id\n";
  for (const auto& m : members)
    out += std::to_string(m.particle_id) + "," + std::to_string(m.group_id) + "\n";
  return out;
}

inline GroupCatalog parse_catalog(std::string_view data) {
  GroupCatalog cat;
  std::istringstream in{std::string(data)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto l = detail::trim_cr(line);
    if (n == 1) {
      if (l != "group_id,size")
        throw Error("catalog header must be 'group_id,size'");
      continue;
    }
    if (l.empty())
      continue;
    const auto f = detail::split(l, ',');
    if (f.size() != 2)
      throw Error("catalog line " + std::to_string(n) + ": expected 2 fields");
    cat.entries.push_back({detail::parse_u64(f[0], n), detail::parse_u64(f[1], n)});
  }
  return cat;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) { detail::spit(path, text); }
inline std::string read_text(const std::filesystem::path& path) { return detail::slurp(path); }

} // namespace fof::io
