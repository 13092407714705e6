#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result sgne(const std::string& args) {
  const std::string cmd = std::string(SGNE_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sgne_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_files(const fs::path& dir, const std::string& ext) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

const std::string kCournot = std::string(SGNE_CONFIG_DIR) + "/nash_cournot_desk.json";
const std::string kEv = std::string(SGNE_CONFIG_DIR) + "/ev_charging_desk.json";

}  // namespace

TEST_CASE("missing config exits with 2 and says so") {
  const Result r = sgne("run --config /nonexistent/x.json --quiet");
  CHECK(r.code == 2);
  CHECK(r.output.find("config not found") != std::string::npos);
}

TEST_CASE("invalid config names the key") {
  const fs::path dir = scratch("badkey");
  std::ofstream(dir / "cfg.json") << R"({"scenario": {"name": "nash_cournot"}, "run": {"iterz": 5}})";
  const Result r = sgne("run --config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("run.iterz") != std::string::npos);
  std::ofstream(dir / "broken.json") << "{";
  CHECK(sgne("run --config " + (dir / "broken.json").string()).code == 2);
  CHECK(sgne("run --config " + kCournot + " --algo warp --quiet").code == 2);
  CHECK(sgne("run --config " + kCournot + " --seeds 4..1 --quiet").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("usage errors are config errors") {
  CHECK(sgne("run").code == 2);
  CHECK(sgne("frobnicate").code == 2);
  CHECK(sgne("--help").code == 0);
}

TEST_CASE("2 x 2 x 10 grid writes 40 traces and a summary") {
  const fs::path dir = scratch("grid");
  const Result r = sgne("run --config " + kCournot +
                        " --algo node-net,edge-net --topology complete,cycle --seeds 0..9 --quiet --out " +
                        dir.string());
  CHECK(r.code == 0);
  CHECK(count_files(dir, ".csv") == 40);
  CHECK(fs::exists(dir / "summary.json"));
  const std::string summary = slurp(dir / "summary.json");
  CHECK(summary.find("\"final_dist\"") != std::string::npos);
  CHECK(summary.find("\"iterations_to_tol\"") != std::string::npos);
  CHECK(summary.find("\"diverged_count\": 0") != std::string::npos);
  // 5000 iterations: header + 1000 + 400 thinned rows
  std::ifstream csv(dir / "edge-net__cycle__seed7.csv");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 1401);
  fs::remove_all(dir);
}

TEST_CASE("zero iterations give header-only traces") {
  const fs::path dir = scratch("zero");
  const Result r = sgne("run --config " + kEv + " --iters 0 --seeds 0..1 --quiet --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(count_files(dir, ".csv") == 8);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    CHECK(slurp(e.path()) ==
          "iter,dist_to_ref,primal_consensus_gap,dual_consensus_gap,constraint_violation,"
          "residual_or_nan,batch_size,wallclock_ms\n");
  }
  fs::remove_all(dir);
}

TEST_CASE("identical config and seeds give byte-identical output") {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  const std::string common = "run --config " + kEv + " --seeds 3..4 --iters 1500 --quiet --out ";
  REQUIRE(sgne(common + a.string()).code == 0);
  REQUIRE(sgne(common + b.string() + " --jobs 3").code == 0);
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    ++compared;
  }
  CHECK(compared == 9);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("every cell diverging exits with 3") {
  const fs::path dir = scratch("diverge");
  std::ofstream(dir / "cfg.json") << R"({
    "scenario": {"name": "nash_cournot"},
    "graph": {"topology": "complete"},
    "algorithm": ["node-net"],
    "step_sizes": {"mode": "bounds", "safety_factor": 1.0, "overrides": {"c": 5000}},
    "run": {"iters": 20000, "seeds": [0, 1], "exact_gradients": true}
  })";
  const Result r = sgne("run --config " + (dir / "cfg.json").string() + " --quiet --out " + (dir / "o").string());
  CHECK(r.code == 3);
  CHECK(count_files(dir / "o", ".csv") == 2);
  CHECK(slurp(dir / "o" / "node-net__complete__seed0.csv").find('\n') ==
        slurp(dir / "o" / "node-net__complete__seed0.csv").size() - 1);
  fs::remove_all(dir);
}

TEST_CASE("validate: desk configs pass") {
  for (const std::string& cfg : {kCournot, kEv}) {
    const Result r = sgne("validate --config " + cfg);
    CHECK(r.code == 0);
    CHECK(r.output.find("result: OK") != std::string::npos);
    CHECK(r.output.find("FAIL") == std::string::npos);
  }
}

TEST_CASE("validate: alpha at ten times its ceiling is flagged") {
  const fs::path dir = scratch("validate_alpha");
  // the two-agent budget game on a path has an alpha ceiling of 1 / 1.1
  std::ofstream(dir / "cfg.json") << R"({
    "scenario": {"name": "two_agent_budget"},
    "graph": {"topology": "path"},
    "algorithm": ["node-net"],
    "step_sizes": {"mode": "bounds", "overrides": {"alpha": 9.0909090909}}
  })";
  const Result r = sgne("validate --config " + (dir / "cfg.json").string());
  CHECK(r.code == 0);
  CHECK(r.output.find("FAIL alpha[0]") != std::string::npos);
  CHECK(r.output.find("result: FAILED") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("validate: a tenth of the minimum consensus gain warns with c_min") {
  const fs::path dir = scratch("validate_c");
  std::ofstream(dir / "cfg.json") << R"({
    "scenario": {"name": "nash_cournot"},
    "graph": {"topology": "cycle"},
    "algorithm": ["node-net"],
    "step_sizes": {"mode": "bounds", "c_multiplier": 0.1}
  })";
  const Result r = sgne("validate --config " + (dir / "cfg.json").string());
  CHECK(r.code == 0);
  CHECK(r.output.find("WARN c = 3.23538, c_min = 32.3538") != std::string::npos);
  fs::remove_all(dir);
}
