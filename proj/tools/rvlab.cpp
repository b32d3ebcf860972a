// Command-line laboratory: runs configured experiment stages, exact partition
// certificates, and report rendering.  Exit code 0 iff no stage threw and
// every hard check passed.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rvl/partition.hpp"
#include "rvl/runner.hpp"

namespace {

rvl::config load_or_default(const std::string& path) {
  if (path.empty()) return rvl::config{};
  return rvl::load_config(path);
}

int run_stages(const std::string& config_path, const std::string& stages,
               const std::string& out_dir, std::uint64_t seed, const std::string& threads) {
  rvl::config raw = load_or_default(config_path);
  if (!stages.empty()) raw.set("run", "stages", stages);
  rvl::run_report rep = rvl::run_experiment(raw, out_dir, seed);
  rep.threads_note = threads;
  rvl::emit_report(rep, out_dir);
  std::cout << rep.table();
  return rep.ok() ? 0 : 1;
}

void print_partition(const rvl::partition& p) {
  for (const auto& s : rvl::to_strings(p)) std::cout << s << " ";
  std::cout << "\n";
}

// The textbook witness: weakly 2-regular on [0,1], but the head of the
// partition stops being weakly 2-regular on [0,1/2].
int partition_suite(const std::string& out_dir) {
  using rvl::rational;
  rvl::run_report rep;
  rep.config_text = "[partitions]\nsuite = builtin\n";
  rep.config_hash = rvl::hex64(rvl::fnv1a64(rep.config_text));

  auto tau = rvl::partition::from_breaks(
      {rational(0), rational(1, 16), rational(7, 16), rational(1, 2), rational(1)});
  auto full = rvl::regularity(tau, rational(2));
  rep.add("partitions", "witness weakly 2-regular", full.weakly_regular ? 1.0 : 0.0, "exact",
          1.0, true);
  auto head = rvl::partition::from_breaks(
      {rational(0), rational(1, 16), rational(7, 16), rational(1, 2)});
  auto sub = rvl::regularity(head, rational(2));
  rep.add("partitions", "head loses weak 2-regularity", sub.weakly_regular ? 0.0 : 1.0,
          "exact", 1.0, true);

  auto w = rvl::counterexample_partition(rvl::segment(rational(0), rational(1)), 2, rational(2));
  std::vector<std::size_t> t1(w.tau1_count);
  for (std::size_t i = 0; i < w.tau1_count; ++i) t1[i] = i;
  rational sup1(0);
  for (auto i : t1) sup1 = std::max(sup1, w.tau.pieces[i].length());
  bool edge = rational(2) * rvl::union_length(w.tau, t1) /
                  rational((std::int64_t)w.tau1_count) ==
              sup1;
  rep.add("partitions", "irregularity certificate exact", edge ? 1.0 : 0.0, "exact", 1.0,
          true, "A=2 lambda=2");
  rvl::emit_report(rep, out_dir);
  std::cout << rep.table();
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for radial variation on Lipschitz half-spaces"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", threads = "1";
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "experiment config file (INI)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "global seed for derived randomness");
  app.add_option("--threads", threads, "recorded in the report; stages are sequential");

  auto* geo = app.add_subcommand("geometry", "build the boundary graph");
  auto* harm = app.add_subcommand("harmonic", "walk-on-spheres vs the mesh measure");
  auto* kern = app.add_subcommand("kernels", "kernel identity residuals");
  auto* omg = app.add_subcommand("omega", "refinement product convergence");
  auto* var = app.add_subcommand("variation", "variation profile and ball minimizers");
  auto* meas = app.add_subcommand("measure", "height-limit measure and scaling exponent");
  auto* run = app.add_subcommand("run", "all stages configured under [run]");
  auto* rpt = app.add_subcommand("report", "re-render and verify a stored report");

  auto* parts = app.add_subcommand("partitions", "exact partition certificates");
  for (auto* s : {geo, harm, kern, omg, var, meas, run, rpt, parts}) s->fallthrough();
  std::int64_t cx_A = 2;
  std::string cx_lambda = "2", certify_file, certify_lambda = "2";
  auto* cx = parts->add_subcommand("counterexample", "construct an irregularity witness");
  cx->add_option("--A", cx_A, "regularity constant the head must violate");
  cx->add_option("--lambda", cx_lambda, "rational p/q regularity of the full partition");
  auto* cert = parts->add_subcommand("certify", "check regularity of a stored partition");
  cert->add_option("file", certify_file, "JSON array of rational breaks")->required();
  cert->add_option("--lambda", certify_lambda, "rational p/q to certify against");

  CLI11_PARSE(app, argc, argv);

  try {
    if (geo->parsed()) return run_stages(config_path, "geometry", out_dir, seed, threads);
    if (harm->parsed())
      return run_stages(config_path, "geometry,measure,harmonic", out_dir, seed, threads);
    if (kern->parsed())
      return run_stages(config_path, "geometry,measure,kernels", out_dir, seed, threads);
    if (omg->parsed())
      return run_stages(config_path, "geometry,measure,kernels,omega", out_dir, seed, threads);
    if (var->parsed())
      return run_stages(config_path, "geometry,measure,kernels,variation", out_dir, seed,
                        threads);
    if (meas->parsed())
      return run_stages(config_path, "geometry,measure,kernels,variation,scaling", out_dir,
                        seed, threads);
    if (run->parsed()) return run_stages(config_path, "", out_dir, seed, threads);

    if (rpt->parsed()) {
      auto j = nlohmann::json::parse(rvl::read_text(out_dir + "/report.json"));
      rvl::run_report rep = rvl::report_from_json(j);
      std::cout << rep.table();
      std::string stored = j.at("hash").get<std::string>();
      if (rep.report_hash() != stored) {
        std::cerr << "report hash mismatch: stored " << stored << ", recomputed "
                  << rep.report_hash() << "\n";
        return 1;
      }
      return rep.ok() ? 0 : 1;
    }

    if (parts->parsed()) {
      using rvl::rational;
      if (cx->parsed()) {
        auto lam = rational::parse(cx_lambda);
        auto w = rvl::counterexample_partition(rvl::segment(rational(0), rational(1)), cx_A,
                                               lam);
        std::cout << "tau (" << w.tau.size() << " pieces, head " << w.tau1_count << "):\n";
        print_partition(w.tau);
        std::cout << "omega " << w.omega.str() << " eps " << w.eps.str() << "\n";
        std::filesystem::create_directories(out_dir);
        nlohmann::json out = rvl::to_strings(w.tau);
        rvl::write_text(out_dir + "/counterexample.json", out.dump() + "\n");
        bool ok = rvl::regularity(w.tau, lam).weakly_regular;
        std::cout << (ok ? "weakly regular, head violates by construction\n"
                         : "CONSTRUCTION FAILED\n");
        return ok ? 0 : 1;
      }
      if (cert->parsed()) {
        auto breaks = nlohmann::json::parse(rvl::read_text(certify_file))
                          .get<std::vector<std::string>>();
        auto p = rvl::partition_from_strings(breaks);
        auto r = rvl::regularity(p, rational::parse(certify_lambda));
        std::cout << "pieces " << p.size() << " lambda-regular " << r.lambda_regular
                  << " weakly " << r.weakly_regular << "\n";
        return r.weakly_regular ? 0 : 1;
      }
      return partition_suite(out_dir);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 2;
}
