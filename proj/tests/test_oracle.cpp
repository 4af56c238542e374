#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace fof;
using oracle::Partition;

namespace {

Partition make(std::vector<std::uint64_t> ids, std::vector<std::uint64_t> labels) {
  return Partition::from_labels(ids, labels);
}

} // namespace

TEST(NaiveFof, SingleParticle) {
  const Box box = Box::make({1, 1, 1}, false);
  const Particles ps{{42, {0.5, 0.5, 0.5}}};
  const auto p = oracle::naive_fof(ps, box, LinkingLength::make(0.1));
  EXPECT_EQ(p.size_multiset(), (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(p.representative(42), 42u);
}

TEST(NaiveFof, CloseNeighboursLink) {
  const Box box = Box::make({10, 10, 10}, false);
  const Particles ps{{3, {1.0, 1, 1}}, {8, {1.99, 1, 1}}};
  const auto p = oracle::naive_fof(ps, box, LinkingLength::make(1.0));
  EXPECT_EQ(p.size_multiset(), (std::vector<std::uint64_t>{2}));
  EXPECT_EQ(p.representative(8), 3u);
}

TEST(NaiveFof, PeriodicWrapLinks) {
  const Box open = Box::make({10, 10, 10}, false);
  const Box wrap = Box::make({10, 10, 10}, true);
  const Particles ps{{0, {0.2, 5, 5}}, {1, {9.7, 5, 5}}};
  EXPECT_EQ(oracle::naive_fof(ps, open, LinkingLength::make(1.0)).block_count(), 2u);
  EXPECT_EQ(oracle::naive_fof(ps, wrap, LinkingLength::make(1.0)).block_count(), 1u);
}

TEST(NaiveFof, RejectsOversizedInput) {
  const Box box = Box::make({1, 1, 1}, false);
  Particles ps(oracle::kMaxParticles + 1);
  for (std::size_t i = 0; i < ps.size(); ++i)
    ps[i].id = i;
  EXPECT_THROW(oracle::naive_fof(ps, box, LinkingLength::make(0.1)), Error);
}

TEST(BfsFof, AgreesWithNaiveOnRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = test::random_instance(seed, 100, 500);
    const auto a = oracle::naive_fof(inst.set.particles, inst.set.box, inst.l);
    const auto b = oracle::bfs_fof(inst.set.particles, inst.set.box, inst.l);
    EXPECT_TRUE(oracle::partitions_equal(a, b).equal) << "seed " << seed;
    EXPECT_EQ(a.representatives(), b.representatives());
  }
}

TEST(PartitionsEqual, RelabellingIsEqual) {
  const auto a = make({1, 2, 3, 4}, {7, 7, 9, 9});
  const auto b = make({4, 3, 2, 1}, {0, 0, 5, 5});
  EXPECT_TRUE(oracle::partitions_equal(a, b).equal);
}

TEST(PartitionsEqual, WitnessNamesMisclassifiedPair) {
  const auto a = make({1, 2, 3}, {0, 0, 1});
  const auto b = make({1, 2, 3}, {0, 1, 1});
  const auto cmp = oracle::partitions_equal(a, b);
  EXPECT_FALSE(cmp.equal);
  ASSERT_TRUE(cmp.witness.has_value());
  const auto [x, y] = *cmp.witness;
  EXPECT_NE(a.representative(x) == a.representative(y), b.representative(x) == b.representative(y));
}

TEST(PartitionsEqual, WitnessOnRandomPerturbations) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<std::uint64_t> ids(n), la(n), lb;
    for (std::size_t i = 0; i < n; ++i) {
      ids[i] = rng() % 1000 + 1000 * i;
      la[i] = rng() % 5;
    }
    lb = la;
    lb[rng() % n] = 99;  // may or may not change the partition
    const auto a = Partition::from_labels(ids, la);
    const auto b = Partition::from_labels(ids, lb);
    const auto cmp = oracle::partitions_equal(a, b);
    if (cmp.equal) {
      EXPECT_EQ(a.representatives(), b.representatives());
      continue;
    }
    ASSERT_TRUE(cmp.witness.has_value());
    const auto [x, y] = *cmp.witness;
    EXPECT_NE(a.representative(x) == a.representative(y), b.representative(x) == b.representative(y));
  }
}

TEST(PartitionsEqual, DifferentUniversesThrow) {
  EXPECT_THROW(oracle::partitions_equal(make({1, 2}, {0, 0}), make({1, 3}, {0, 0})), Error);
  EXPECT_THROW(oracle::partitions_equal(make({1, 2}, {0, 0}), make({1}, {0})), Error);
}

TEST(Partition, DuplicateIdsRejected) {
  EXPECT_THROW(make({1, 1}, {0, 1}), Error);
}
