// fof: generate particles, find groups, check against brute force, benchmark.

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fof/fof.hpp"

namespace {

using namespace fof;

Box parse_box(const std::vector<double>& extent, bool periodic) {
  if (extent.size() == 1)
    return Box::make({extent[0], extent[0], extent[0]}, periodic);
  if (extent.size() == 3)
    return Box::make({extent[0], extent[1], extent[2]}, periodic);
  throw Error("--box takes one extent or three");
}

bench::Decomposition parse_decomposition(const std::string& s) {
  return s == "block" ? bench::Decomposition::block : bench::Decomposition::slab;
}

struct RunOutput {
  GroupCatalog catalog;
  std::vector<Membership> membership;
  double seconds = 0.0;
};

RunOutput find_all(const io::ParticleSet& set, const LinkingLength& l, unsigned threads, int ranks,
                   const std::string& decomposition, std::uint64_t min_size) {
  FofOptions opt;
  opt.threads = threads;
  opt.min_size = min_size;
  RunOutput out;
  if (ranks <= 1) {
    const auto start = std::chrono::steady_clock::now();
    auto res = find_groups(set.particles, set.box, l, opt);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.membership = std::move(res.membership);
    out.catalog = catalog_from_membership(out.membership, min_size);
    return out;
  }
  const auto dd = bench::decompose(set.box, ranks, parse_decomposition(decomposition));
  const auto start = std::chrono::steady_clock::now();
  auto results = dist::run_in_process(dd, set.particles, l, opt);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.catalog = results.front().catalog;
  out.membership = dist::gather_membership(results);
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Friends-of-friends group finder"};
  app.require_subcommand(1);

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "Generate a particle file");
  std::string kind = "uniform";
  std::size_t n = 1000;
  std::vector<double> box_extent{1.0};
  bool periodic = true;
  std::uint64_t seed = 1;
  std::size_t blobs = 8;
  double width = 0.01;
  double background = 0.0;
  std::string gen_out;
  gen_cmd->add_option("--kind", kind, "uniform or blobs")->check(CLI::IsMember({"uniform", "blobs"}));
  gen_cmd->add_option("--n", n, "Particle count")->required();
  gen_cmd->add_option("--box", box_extent, "Box extent (one value or three)")->delimiter(',');
  gen_cmd->add_option("--periodic", periodic, "Periodic box (0 or 1)");
  gen_cmd->add_option("--seed", seed, "Random seed");
  gen_cmd->add_option("--blobs", blobs, "Number of blobs");
  gen_cmd->add_option("--width", width, "Blob standard deviation");
  gen_cmd->add_option("--background", background, "Fraction of uniform background particles");
  gen_cmd->add_option("--out", gen_out, "Output file (.csv for text)")->required();

  // shared by run / verify / bench
  std::string in_path;
  double linking_length = 0.0;
  unsigned threads = 1;
  int ranks = 1;
  std::string decomposition = "slab";
  bool inclusive = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--in", in_path, "Particle file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--linking-length", linking_length, "Linking length")->required();
    cmd->add_option("--decomposition", decomposition, "slab or block")->check(CLI::IsMember({"slab", "block"}));
    cmd->add_flag("--inclusive", inclusive, "Link pairs at exactly the linking length");
  };

  auto* run_cmd = app.add_subcommand("run", "Find groups");
  add_common(run_cmd);
  std::uint64_t min_size = 20;
  std::string catalog_path, membership_path;
  run_cmd->add_option("--threads", threads, "Worker threads per rank");
  run_cmd->add_option("--ranks", ranks, "Simulated ranks");
  run_cmd->add_option("--min-size", min_size, "Smallest group reported in the catalog");
  run_cmd->add_option("--catalog", catalog_path, "Catalog CSV output");
  run_cmd->add_option("--membership", membership_path, "Membership CSV output");

  auto* verify_cmd = app.add_subcommand("verify", "Compare against the brute-force finder");
  add_common(verify_cmd);
  verify_cmd->add_option("--threads", threads, "Worker threads per rank");
  verify_cmd->add_option("--ranks", ranks, "Simulated ranks");

  auto* bench_cmd = app.add_subcommand("bench", "Strong or weak scaling benchmark");
  add_common(bench_cmd);
  std::string mode = "strong";
  std::vector<unsigned> threads_list{1};
  std::vector<int> ranks_list{1};
  int repeats = 3;
  std::string bench_out, label;
  bench_cmd->add_option("--mode", mode, "strong or weak")->check(CLI::IsMember({"strong", "weak"}));
  bench_cmd->add_option("--threads-list", threads_list, "Thread counts")->delimiter(',')->required();
  bench_cmd->add_option("--ranks-list", ranks_list, "Rank counts")->delimiter(',');
  bench_cmd->add_option("--repeats", repeats, "Runs per data point");
  bench_cmd->add_option("--label", label, "Label column value");
  bench_cmd->add_option("--out", bench_out, "CSV output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const LinkMode link_mode = inclusive ? LinkMode::inclusive : LinkMode::strict;

    if (*gen_cmd) {
      io::ParticleSet set;
      set.box = parse_box(box_extent, periodic);
      gen::BlobParams bp{blobs, width, background};
      set.particles = gen::generate(kind == "blobs" ? gen::Distribution::blobs : gen::Distribution::uniform, n,
                                    set.box, seed, bp);
      io::write_particles(gen_out, set);
      std::cout << "wrote " << set.particles.size() << " particles to " << gen_out << "\n";
      return 0;
    }

    const io::ParticleSet set = io::read_particles(in_path);
    const LinkingLength l = LinkingLength::make(linking_length, link_mode);
    if (threads < 1 || ranks < 1)
      throw Error("--threads and --ranks must be positive");

    if (*run_cmd) {
      const RunOutput res = find_all(set, l, threads, ranks, decomposition, min_size);
      if (!catalog_path.empty())
        io::write_text(catalog_path, io::format_catalog(res.catalog));
      if (!membership_path.empty())
        io::write_text(membership_path, io::format_membership(res.membership));
      std::cout << set.particles.size() << " particles, " << res.catalog.entries.size() << " groups with >= "
                << min_size << " members, " << res.seconds << " s\n";
      return 0;
    }

    if (*verify_cmd) {
      const RunOutput res = find_all(set, l, threads, ranks, decomposition, 1);
      std::vector<std::uint64_t> ids, labels;
      for (const auto& m : res.membership) {
        ids.push_back(m.particle_id);
        labels.push_back(m.group_id);
      }
      const auto engine = oracle::Partition::from_labels(ids, labels);
      const auto reference = oracle::naive_fof(set.particles, set.box, l);
      const auto cmp = oracle::partitions_equal(engine, reference);
      if (cmp) {
        std::cout << "ok: " << engine.block_count() << " groups match the brute-force result\n";
        return 0;
      }
      std::cout << "MISMATCH";
      if (cmp.witness)
        std::cout << ": particles " << cmp.witness->first << " and " << cmp.witness->second
                  << " are classified differently";
      std::cout << "\n";
      return 1;
    }

    if (*bench_cmd) {
      bench::BenchConfig cfg;
      cfg.mode = mode == "weak" ? bench::Scaling::weak : bench::Scaling::strong;
      cfg.threads = threads_list;
      cfg.ranks = ranks_list;
      cfg.repeats = repeats;
      cfg.label = label;
      cfg.decomposition = parse_decomposition(decomposition);
      const auto records = bench::run(set, l, cfg, [](const bench::BenchRecord& r) {
        std::cerr << r.label << " n=" << r.n_particles << " threads=" << r.threads << " ranks=" << r.ranks
                  << " time=" << r.time_s << "s sd=" << r.time_sd_s << " eff=" << r.efficiency << "\n";
      });
      io::write_text(bench_out, bench::format_csv(records));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "fof: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
