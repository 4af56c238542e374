#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace fof;

namespace {

io::ParticleSet sample_set() {
  io::ParticleSet s;
  s.box = Box::make({1.5, 2.0, 0.1}, true);
  s.particles = {{0, {0.1, 0.2, 0.3}},
                 {17, {1.0 / 3.0, std::nextafter(2.0, 0.0), 5e-324}},
                 {std::uint64_t{1} << 60, {0.0, 1e-17, 0.09999999999999999}}};
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fof_test_io_" + name);
}

} // namespace

TEST(ParticleIo, BinaryRoundTripIsBitExact) {
  const auto s = sample_set();
  const auto bytes = io::encode_binary(s);
  EXPECT_EQ(bytes.size(), io::kHeaderBytes + 3 * io::kRecordBytes);
  EXPECT_EQ(io::decode_binary(bytes), s);
}

TEST(ParticleIo, CsvRoundTripIsBitExact) {
  const auto s = sample_set();
  const auto text = io::encode_csv(s);
  EXPECT_TRUE(text.starts_with("# box=1.5,2,0.1 periodic=1\nid,x,y,z\n"));
  EXPECT_EQ(io::decode_csv(text), s);
}

TEST(ParticleIo, FilesPickFormatFromExtension) {
  const auto s = sample_set();
  const auto bin = temp_file("a.bin"), csv = temp_file("a.csv");
  io::write_particles(bin, s);
  io::write_particles(csv, s);
  EXPECT_EQ(io::read_text(bin).substr(0, 4), "FOF1");
  EXPECT_EQ(io::read_text(csv).substr(0, 6), "# box=");
  EXPECT_EQ(io::read_particles(bin), s);
  EXPECT_EQ(io::read_particles(csv), s);
  std::filesystem::remove(bin);
  std::filesystem::remove(csv);
}

TEST(ParticleIo, MissingFileIsAnError) {
  EXPECT_THROW(io::read_particles(temp_file("does_not_exist.bin")), Error);
}

TEST(ParticleIo, BinaryCountMismatchRejected) {
  auto bytes = io::encode_binary(sample_set());
  bytes.pop_back();
  EXPECT_THROW(io::decode_binary(bytes), Error);
  bytes = io::encode_binary(sample_set());
  bytes[8] = 9;  // claims nine records
  EXPECT_THROW(io::decode_binary(bytes), Error);
}

TEST(ParticleIo, BinaryBadMagicOrVersionRejected) {
  auto bytes = io::encode_binary(sample_set());
  bytes[0] = 'X';
  EXPECT_THROW(io::decode_binary(bytes), Error);
  bytes = io::encode_binary(sample_set());
  bytes[4] = 2;
  EXPECT_THROW(io::decode_binary(bytes), Error);
}

TEST(ParticleIo, CsvHeaderErrors) {
  EXPECT_THROW(io::decode_csv("id,x,y,z\n1,0,0,0\n"), Error);
  EXPECT_THROW(io::decode_csv("# box=1,1 periodic=0\nid,x,y,z\n"), Error);
  EXPECT_THROW(io::decode_csv("# box=1,1,1 periodic=2\nid,x,y,z\n"), Error);
  EXPECT_THROW(io::decode_csv("# box=1,1,1 periodic=0\nid,x,y\n"), Error);
  EXPECT_THROW(io::decode_csv("# box=1,1,1 periodic=0\nid,x,y,z\n1,0.5,0.5\n"), Error);
  EXPECT_THROW(io::decode_csv("# box=1,1,1 periodic=0\nid,x,y,z\n1,0.5,abc,0.5\n"), Error);
  EXPECT_THROW(io::decode_csv("# box=0,1,1 periodic=0\nid,x,y,z\n"), Error);
}

TEST(ParticleIo, CsvAcceptsCrLf) {
  const auto s = io::decode_csv("# box=1,1,1 periodic=0\r\nid,x,y,z\r\n4,0.5,0.25,0.125\r\n");
  ASSERT_EQ(s.particles.size(), 1u);
  EXPECT_EQ(s.particles[0], (Particle{4, {0.5, 0.25, 0.125}}));
}

TEST(ParticleIo, DuplicateIdsRejected) {
  EXPECT_THROW(io::decode_csv("# box=1,1,1 periodic=0\nid,x,y,z\n1,0,0,0\n1,0.5,0.5,0.5\n"), Error);
  auto s = sample_set();
  s.particles[1].id = s.particles[0].id;
  EXPECT_THROW(io::decode_binary(io::encode_binary(s)), Error);
}

TEST(ParticleIo, NonFiniteCoordinatesRejected) {
  EXPECT_THROW(io::decode_csv("# box=1,1,1 periodic=0\nid,x,y,z\n1,nan,0,0\n"), Error);
}

TEST(CatalogIo, FormatAndParse) {
  GroupCatalog cat;
  cat.entries = {{4, 30}, {0, 25}};
  const auto text = io::format_catalog(cat);
  EXPECT_EQ(text, "group_id,size\n4,30\n0,25\n");
  EXPECT_EQ(io::parse_catalog(text).entries, cat.entries);
  EXPECT_THROW(io::parse_catalog("id,size\n"), Error);
  const std::vector<Membership> m{{1, 1}, {2, 1}};
  EXPECT_EQ(io::format_membership(m), "particle_id,group_id\n1,1\n2,1\n");
}

TEST(Generate, SameSeedSameParticles) {
  const Box box = Box::make({1, 2, 3}, true);
  for (auto kind : {gen::Distribution::uniform, gen::Distribution::blobs}) {
    const auto a = gen::generate(kind, 500, box, 17);
    EXPECT_EQ(a, gen::generate(kind, 500, box, 17));
    EXPECT_NE(a, gen::generate(kind, 500, box, 18));
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].id, i);
      for (int d = 0; d < 3; ++d) {
        EXPECT_GE(a[i].pos[d], 0.0);
        EXPECT_LT(a[i].pos[d], box.extent[d]);
      }
    }
  }
}

TEST(Generate, BlobCountMatchesWellSeparatedBlobs) {
  const Box box = Box::make({1, 1, 1}, true);
  for (std::size_t count : {1u, 5u, 8u, 27u}) {
    const auto ps = gen::generate(gen::Distribution::blobs, 40 * count, box, count, {count, 0.003, 0.0});
    const auto part = oracle::naive_fof(ps, box, LinkingLength::make(0.05));
    EXPECT_EQ(test::sizes_at_least(part, 2).size(), count);
    EXPECT_EQ(part.block_count(), count);
  }
}

TEST(Generate, SingleParticle) {
  const auto ps = gen::generate(gen::Distribution::blobs, 1, Box::make({1, 1, 1}, false), 3);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].id, 0u);
}

TEST(Generate, BadParametersRejected) {
  const Box box = Box::make({1, 1, 1}, false);
  EXPECT_THROW(gen::generate(gen::Distribution::uniform, 0, box, 1), Error);
  EXPECT_THROW(gen::generate(gen::Distribution::blobs, 10, box, 1, {0, 0.1, 0}), Error);
  EXPECT_THROW(gen::generate(gen::Distribution::blobs, 10, box, 1, {2, -0.1, 0}), Error);
  EXPECT_THROW(gen::generate(gen::Distribution::blobs, 10, box, 1, {2, 0.1, 1.5}), Error);
}

TEST(Replicate, OnceIsIdentity) {
  const auto s = sample_set();
  EXPECT_EQ(gen::replicate(s, 1), s);
}

TEST(Replicate, TwiceGivesEightShiftedCopies) {
  io::ParticleSet s{Box::make({1, 1, 1}, true), gen::generate(gen::Distribution::uniform, 10, Box::make({1, 1, 1}, true), 2)};
  const auto r = gen::replicate(s, 2);
  ASSERT_EQ(r.particles.size(), 80u);
  EXPECT_EQ(r.box.extent, (Vec3{2, 2, 2}));
  std::map<std::uint64_t, Vec3> by_id;
  for (const auto& p : r.particles)
    ASSERT_TRUE(by_id.emplace(p.id, p.pos).second);
  for (std::uint64_t c = 0; c < 8; ++c)
    for (const auto& p : s.particles) {
      const Vec3 q = by_id.at(c * 10 + p.id);
      const Vec3 shift{static_cast<double>(c / 4), static_cast<double>((c / 2) % 2), static_cast<double>(c % 2)};
      for (int d = 0; d < 3; ++d)
        EXPECT_EQ(q[d], p.pos[d] + shift[d]);
    }
}

TEST(Replicate, IdOverflowRejected) {
  io::ParticleSet s{Box::make({1, 1, 1}, true), {{~std::uint64_t{0} / 4, {0.5, 0.5, 0.5}}}};
  EXPECT_THROW(gen::replicate(s, 2), Error);
  EXPECT_THROW(gen::replicate(s, std::array<std::size_t, 3>{0, 1, 1}), Error);
}

TEST(Replicate, InteriorGroupCountsScaleByEight) {
  const Box box = Box::make({1, 1, 1}, true);
  io::ParticleSet s{box, gen::generate(gen::Distribution::blobs, 1200, box, 9, {8, 0.01, 0.0})};
  const auto l = LinkingLength::make(0.02);
  const auto base = find_groups(s.particles, box, l, {2, 1, 4.0});
  const auto rep = gen::replicate(s, 2);
  const auto big = find_groups(rep.particles, rep.box, l, {2, 1, 4.0});
  std::map<std::uint64_t, std::uint64_t> a, b;
  for (const auto& e : base.catalog.entries)
    ++a[e.size];
  for (const auto& e : big.catalog.entries)
    ++b[e.size];
  for (auto& [size, n] : a)
    n *= 8;
  EXPECT_EQ(a, b);
}

TEST(Bench, Factor3) {
  EXPECT_EQ(bench::factor3(1), (std::array<std::size_t, 3>{1, 1, 1}));
  EXPECT_EQ(bench::factor3(8), (std::array<std::size_t, 3>{2, 2, 2}));
  EXPECT_EQ(bench::factor3(12), (std::array<std::size_t, 3>{3, 2, 2}));
  EXPECT_EQ(bench::factor3(7), (std::array<std::size_t, 3>{7, 1, 1}));
  for (std::size_t n = 1; n <= 64; ++n) {
    const auto f = bench::factor3(n);
    EXPECT_EQ(f[0] * f[1] * f[2], n);
  }
}

TEST(Bench, RecordsAndCsv) {
  const Box box = Box::make({1, 1, 1}, true);
  io::ParticleSet s{box, gen::generate(gen::Distribution::uniform, 2000, box, 1)};
  bench::BenchConfig cfg;
  cfg.threads = {1, 2};
  cfg.ranks = {1, 2};
  cfg.repeats = 2;
  cfg.label = "t";
  const auto recs = bench::run(s, LinkingLength::make(0.03), cfg);
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[0].efficiency, 1.0);
  for (const auto& r : recs) {
    EXPECT_EQ(r.n_particles, 2000u);
    EXPECT_GT(r.time_s, 0.0);
    EXPECT_GE(r.time_sd_s, 0.0);
    const double units = r.threads * r.ranks;
    EXPECT_DOUBLE_EQ(r.efficiency, recs[0].time_s / (units * r.time_s));
  }
  EXPECT_EQ(recs[3].threads, 2u);
  EXPECT_EQ(recs[3].ranks, 2);
  const auto csv = bench::format_csv(recs);
  EXPECT_TRUE(csv.starts_with(std::string(bench::kCsvHeader) + "\nt,2000,1,1,"));
}

TEST(Bench, WeakScalingReplicatesInput) {
  const Box box = Box::make({1, 1, 1}, true);
  io::ParticleSet s{box, gen::generate(gen::Distribution::uniform, 500, box, 1)};
  bench::BenchConfig cfg;
  cfg.mode = bench::Scaling::weak;
  cfg.threads = {1, 2, 4};
  cfg.repeats = 1;
  const auto recs = bench::run(s, LinkingLength::make(0.05), cfg);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1].n_particles, 1000u);
  EXPECT_EQ(recs[2].n_particles, 2000u);
  EXPECT_EQ(recs[0].label, "weak");
  for (const auto& r : recs)
    EXPECT_DOUBLE_EQ(r.efficiency, recs[0].time_s / r.time_s);
}
