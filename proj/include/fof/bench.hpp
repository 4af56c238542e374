#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fof/distributed.hpp"
#include "fof/engine.hpp"
#include "fof/generate.hpp"
#include "fof/particle_io.hpp"

namespace fof::bench {

enum class Scaling { strong, weak };
enum class Decomposition { slab, block };

struct BenchConfig {
  Scaling mode = Scaling::strong;
  std::vector<unsigned> threads{1};
  std::vector<int> ranks{1};
  int repeats = 3;
  std::string label;
  Decomposition decomposition = Decomposition::slab;
  double particles_per_cell = 4.0;
};

struct BenchRecord {
  std::string label;
  std::uint64_t n_particles = 0;
  unsigned threads = 1;
  int ranks = 1;
  double time_s = 0.0;
  double time_sd_s = 0.0;
  double efficiency = 0.0;
};

inline constexpr const char* kCsvHeader = "label,n_particles,threads,ranks,time_s,time_sd_s,efficiency";

inline dist::DomainDecomposition decompose(const Box& box, int ranks, Decomposition how) {
  return how == Decomposition::block ? dist::DomainDecomposition::blocks(box, ranks)
                                     : dist::DomainDecomposition::slabs(box, ranks);
}

/// Splits n into three factors as evenly as possible, largest first.
inline std::array<std::size_t, 3> factor3(std::size_t n) {
  std::array<std::size_t, 3> f{1, 1, 1};
  std::vector<std::size_t> primes;
  for (std::size_t p = 2; p * p <= n; ++p)
    while (n % p == 0) {
      primes.push_back(p);
      n /= p;
    }
  if (n > 1)
    primes.push_back(n);
  for (auto it = primes.rbegin(); it != primes.rend(); ++it) {
    auto smallest = std::min_element(f.begin(), f.end());
    *smallest *= *it;
  }
  std::sort(f.begin(), f.end(), std::greater<>());
  return f;
}

/// Wall time of one group-finding pass, excluding I/O and set-up.
inline double time_once(const io::ParticleSet& set, const LinkingLength& l, unsigned threads, int ranks,
                        const BenchConfig& cfg) {
  FofOptions opt;
  opt.threads = threads;
  opt.min_size = 1;
  opt.particles_per_cell = cfg.particles_per_cell;
  if (ranks <= 1) {
    const auto start = std::chrono::steady_clock::now();
    auto uf = run_local_fof(set.particles, set.box, l, threads, cfg.particles_per_cell);
    auto sizes = compute_group_sizes_parallel(uf, threads);
    const auto stop = std::chrono::steady_clock::now();
    (void)sizes;
    return std::chrono::duration<double>(stop - start).count();
  }
  const auto dd = decompose(set.box, ranks, cfg.decomposition);
  const auto parts = dd.split(set.particles);
  const auto start = std::chrono::steady_clock::now();
  dist::run_ranks(ranks, [&](dist::Communicator& comm) {
    (void)dist::run_distributed_fof(comm, dd, parts[comm.rank()], l, opt);
  });
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

/// One record per (threads, ranks) combination, in the order given. Each
/// record holds the mean and sample standard deviation of `repeats` runs.
/// Weak scaling grows the input with the worker count (threads x ranks) by
/// periodic replication. Efficiency is measured against the first record.
inline std::vector<BenchRecord> run(const io::ParticleSet& set, const LinkingLength& l, const BenchConfig& cfg,
                                    const std::function<void(const BenchRecord&)>& progress = {}) {
  if (cfg.repeats < 1)
    throw Error("repeats must be at least 1");
  if (cfg.threads.empty() || cfg.ranks.empty())
    throw Error("thread and rank lists must be non-empty");
  const std::string label = cfg.label.empty() ? (cfg.mode == Scaling::strong ? "strong" : "weak") : cfg.label;

  std::vector<BenchRecord> out;
  double base_time = 0.0;
  double base_units = 1.0;
  for (int ranks : cfg.ranks)
    for (unsigned threads : cfg.threads) {
      if (threads < 1 || ranks < 1)
        throw Error("thread and rank counts must be positive");
      const std::size_t units = static_cast<std::size_t>(threads) * static_cast<std::size_t>(ranks);
      io::ParticleSet scaled;
      const io::ParticleSet* input = &set;
      if (cfg.mode == Scaling::weak && units > 1) {
        scaled = gen::replicate(set, factor3(units));
        input = &scaled;
      }
      std::vector<double> t(static_cast<std::size_t>(cfg.repeats));
      for (auto& x : t)
        x = time_once(*input, l, threads, ranks, cfg);
      double mean = 0.0;
      for (double x : t)
        mean += x;
      mean /= static_cast<double>(t.size());
      double var = 0.0;
      for (double x : t)
        var += (x - mean) * (x - mean);
      const double sd = t.size() > 1 ? std::sqrt(var / static_cast<double>(t.size() - 1)) : 0.0;

      BenchRecord rec{label, input->particles.size(), threads, ranks, mean, sd, 1.0};
      if (out.empty()) {
        base_time = mean;
        base_units = static_cast<double>(units);
      }
      rec.efficiency = cfg.mode == Scaling::strong
                           ? base_time * base_units / (static_cast<double>(units) * mean)
                           : base_time / mean;
      out.push_back(rec);
      if (progress)
        progress(rec);
    }
  return out;
}

inline std::string format_csv(const std::vector<BenchRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  for (const auto& r : records)
    out += r.label + "," + std::to_string(r.n_particles) + "," + std::to_string(r.threads) + "," +
           std::to_string(r.ranks) + "," + num(r.time_s) + "," + num(r.time_sd_s) + "," + num(r.efficiency) + "\n";
  return out;
}

} // namespace fof::bench
