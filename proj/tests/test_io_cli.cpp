#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <sys/wait.h>

#include "rvl/runner.hpp"

using namespace rvl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

config tiny_flat_config() {
  return parse_config_string(
      "[mesh]\n"
      "h0 = 0.05\ncore_half = 1.5\ngrowth = 1.15\nR_trunc = 200\n"
      "[kernels]\n"
      "tol = 0.005\n"  // identity residuals sit near 3e-3 on this coarse mesh
      "[omega]\n"
      "tol = 0.001\nn_max = 5\n");
}

config tiny_tent_config() {
  return parse_config_string(
      "[domain]\nkind = tent\nheight = 0.3\n"
      "[mesh]\n"
      "h0 = 0.05\ncore_half = 1.5\ngrowth = 1.15\nR_trunc = 200\n"
      "mode = mc\nwalks = 2000\n"
      "[run]\nstages = geometry, measure\n");
}

}  // namespace

TEST_CASE("config parser round trips and strips comments") {
  config c = parse_config_string(
      "# leading comment\n"
      "global_key = 7\n"
      "[mesh]\n"
      "h0 = 0.05   \n"
      "  mode=mc ; trailing section comment line follows\n"
      "; full comment\n"
      "[run]\n"
      "stages = a, b\n");
  CHECK(c.get("global", "global_key", "") == "7");
  CHECK(c.get("mesh", "h0", "") == "0.05");
  CHECK(c.get("mesh", "mode", "") == "mc ; trailing section comment line follows");
  CHECK(c.get("run", "stages", "") == "a, b");
  // canonical text is a fixed point of parse
  config again = parse_config_string(c.canonical());
  CHECK(again.canonical() == c.canonical());
  CHECK(again.content_hash() == c.content_hash());

  CHECK_THROWS_AS(parse_config_string("[unclosed\nk = v\n"), config_error);
  CHECK_THROWS_AS(parse_config_string("just a line\n"), config_error);
  CHECK_THROWS_AS(parse_config_string("= value\n"), config_error);
}

TEST_CASE("typed getters validate their values") {
  config c = parse_config_string(
      "[s]\nnum = 2.5\nint = 12\nflag = true\nbad = 1x\nfrac = 2.5\n");
  CHECK(c.get_num("s", "num", 0) == 2.5);
  CHECK(c.get_int("s", "int", 0) == 12);
  CHECK(c.get_bool("s", "flag", false));
  CHECK(c.get_num("s", "missing", -1.0) == -1.0);
  CHECK(c.get_int("s", "missing", 3) == 3);
  CHECK_FALSE(c.get_bool("s", "missing", false));
  CHECK_THROWS_AS(c.get_num("s", "bad", 0), config_error);
  CHECK_THROWS_AS(c.get_int("s", "frac", 0), config_error);
  CHECK_THROWS_AS(c.get_bool("s", "num", false), config_error);
  CHECK_THROWS_AS(c.require("s", "missing"), config_error);
  CHECK(c.require("s", "int") == "12");
}

TEST_CASE("csv render and re-parse preserve doubles bit for bit") {
  std::vector<std::vector<double>> rows{
      {1.0 / 3.0, 1e-17, 6.02214076e23},
      {-0.0, 3.141592653589793, -2.2250738585072014e-308},
      {0.1 + 0.2, 1.0, -1e308}};
  std::string body = csv_render({"a", "b", "c"}, rows);
  std::vector<std::string> header;
  auto back = csv_parse(body, &header);
  REQUIRE(header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      CHECK(back[i][j] == rows[i][j]);
      CHECK(std::signbit(back[i][j]) == std::signbit(rows[i][j]));
    }
  CHECK_THROWS_AS(csv_render({"a"}, {{1.0, 2.0}}), io_error);
  CHECK_THROWS_AS(csv_parse(""), io_error);
}

TEST_CASE("content hash is frozen") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("abc") == 16654208175385433931ull);
  CHECK(hex64(fnv1a64("abc")) == "e71fa2190541574b");
}

TEST_CASE("mesh cache json round trip is exact") {
  auto g = tent_graph2(0.3);
  mesh_params p{0.05, 1.0, 1.2, 50.0};
  boundary_mesh m = build_mesh(g, p, "mc", 9, 2000);
  auto j = mesh_to_json(m);
  boundary_mesh back = mesh_from_json(j, g);
  CHECK(back.breaks == m.breaks);
  CHECK(back.w == m.w);
  CHECK(back.se == m.se);
  CHECK(back.tail == m.tail);
  CHECK(back.seed == m.seed);
  CHECK(back.walks == m.walks);
  CHECK(back.provenance == "mc");
  // a different mesh geometry must be rejected, not silently adopted
  auto j2 = mesh_to_json(build_mesh(g, {0.1, 1.0, 1.2, 50.0}, "mc", 9, 500));
  j2["h0"] = 0.05;  // lie about the params; breaks no longer match
  CHECK_THROWS_AS(mesh_from_json(j2, g), io_error);
}

TEST_CASE("config validation rejects bad ranges before compute") {
  auto expect_error = [](const std::string& ini, const std::string& needle) {
    try {
      resolve_config(parse_config_string(ini));
      FAIL("expected config_error for: " << ini);
    } catch (const config_error& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring(needle));
    }
  };
  expect_error("[omega]\neps = 1.5\n", "omega.eps");
  expect_error("[omega]\neps = 0\n", "omega.eps");
  expect_error("[mesh]\ngrowth = 1.0\n", "mesh.growth");
  expect_error("[mesh]\nR_trunc = 1.0\n", "mesh.R_trunc");
  expect_error("[mesh]\nmode = guess\n", "mesh.mode");
  expect_error("[domain]\nkind = disk\n", "domain.kind");
  expect_error("[domain]\nkind = tent\n", "oracle requires a flat domain");
  expect_error("[variation]\ndelta = 0.3\n", "variation.delta");
  expect_error("[measure]\nradii = 0.1, 0.2\n", "decreasing");
  expect_error("[run]\nstages = geometry, nonsense\n", "unknown stage");
  expect_error("[run]\nstages = geometry, measure, omega\n", "omega requires kernels");
  expect_error("[kernels]\ny = 0\n", "kernels.y");
}

TEST_CASE("smoke run passes every hard check and emits the series") {
  run_report rep = run_experiment(tiny_flat_config());
  INFO(rep.table());
  CHECK(rep.ok());
  CHECK(rep.error.empty());
  REQUIRE_FALSE(rep.checks.empty());
  std::set<std::string> stages;
  for (const auto& c : rep.checks) {
    stages.insert(c.stage);
    if (c.hard) CHECK(c.pass);
    if (!c.relation.empty() && c.relation != "finite" && c.relation != "exact")
      CHECK(std::isfinite(c.tolerance));
  }
  CHECK(stages ==
        std::set<std::string>{"geometry", "measure", "kernels", "omega", "variation"});
  for (const char* s :
       {"mesh", "kernels", "omega_increments", "omega_levels", "variation_profile"})
    CHECK(rep.series.count(s) == 1);
  CHECK(rep.config_hash == tiny_flat_config().content_hash());
  // plot-ready: every emitted series re-parses
  for (const auto& [name, body] : rep.series) CHECK_FALSE(csv_parse(body).empty());
}

TEST_CASE("identical config and seed reproduce the report hash") {
  config c = tiny_tent_config();
  run_report a = run_experiment(c, "", 42);
  run_report b = run_experiment(c, "", 42);
  CHECK(a.report_hash() == b.report_hash());
  CHECK(a.core() == b.core());
  run_report other = run_experiment(c, "", 43);
  CHECK(other.report_hash() != a.report_hash());
}

TEST_CASE("mesh cache hit leaves the report byte-identical") {
  fs::path dir = fresh_dir("rvl_cache_test");
  config c = tiny_tent_config();
  run_report fresh = run_experiment(c, dir.string(), 42);
  bool cache_file = false;
  for (const auto& f : fs::directory_iterator(dir))
    if (f.path().filename().string().rfind("mesh_", 0) == 0) cache_file = true;
  CHECK(cache_file);
  run_report hit = run_experiment(c, dir.string(), 42);
  CHECK(hit.core() == fresh.core());
}

TEST_CASE("emitted report reloads with a matching hash") {
  fs::path dir = fresh_dir("rvl_report_test");
  run_report rep = run_experiment(tiny_flat_config(), dir.string());
  emit_report(rep, dir.string());
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "report.txt"));
  for (const auto& [name, body] : rep.series) {
    CHECK(fs::exists(dir / (name + ".csv")));
    CHECK(read_text((dir / (name + ".csv")).string()) == body);
  }
  auto j = nlohmann::json::parse(read_text((dir / "report.json").string()));
  run_report back = report_from_json(j);
  CHECK(back.report_hash() == rep.report_hash());
  CHECK(j.at("hash").get<std::string>() == rep.report_hash());
  REQUIRE(back.checks.size() == rep.checks.size());
  // one table row per check plus header, banner, and trailing hash line
  std::size_t lines = 0;
  for (char ch : rep.table())
    if (ch == '\n') ++lines;
  CHECK(lines == rep.checks.size() + 3);
}

TEST_CASE("empty check set is still a valid report") {
  run_report rep;
  rep.config_text = "[run]\nstages =\n";
  rep.config_hash = hex64(fnv1a64(rep.config_text));
  CHECK(rep.ok());
  run_report back = report_from_json(rep.to_json());
  CHECK(back.report_hash() == rep.report_hash());
  CHECK(back.checks.empty());
  CHECK(rep.table().find("-> ok") != std::string::npos);
}

TEST_CASE("hard check failures flip ok, soft ones do not") {
  run_report rep;
  rep.add("s", "soft miss", 2.0, "<=", 1.0, false);
  CHECK(rep.ok());
  rep.add("s", "hard miss", 2.0, "<=", 1.0, true);
  CHECK_FALSE(rep.ok());
  CHECK(rep.table().find("FAIL") != std::string::npos);
  CHECK(rep.table().find("soft") != std::string::npos);
}

#ifdef RVLAB_PATH
namespace {
int run_cli(const std::string& args) {
  std::string cmd = std::string(RVLAB_PATH) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
}  // namespace

TEST_CASE("cli binary drives the pipeline end to end") {
  fs::path dir = fresh_dir("rvl_cli_test");
  fs::path ini = dir / "smoke.ini";
  write_text(ini.string(), tiny_flat_config().canonical());

  CHECK(run_cli("partitions --out " + (dir / "parts").string()) == 0);
  CHECK(run_cli("kernels --config " + ini.string() + " --out " + (dir / "k").string()) == 0);
  CHECK(fs::exists(dir / "k" / "report.json"));
  CHECK(run_cli("report --out " + (dir / "k").string()) == 0);
  CHECK(run_cli("run --config " + ini.string() + " --out " + (dir / "r").string()) == 0);

  fs::path bad = dir / "bad.ini";
  write_text(bad.string(), "[omega]\neps = 1.5\n");
  CHECK(run_cli("run --config " + bad.string() + " --out " + (dir / "b").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "b"));

  // a tampered report fails verification
  fs::path rj = dir / "k" / "report.json";
  auto j = nlohmann::json::parse(read_text(rj.string()));
  j["deterministic"]["seed"] = 999;
  write_text(rj.string(), j.dump(1));
  CHECK(run_cli("report --out " + (dir / "k").string()) == 1);
}
#endif
