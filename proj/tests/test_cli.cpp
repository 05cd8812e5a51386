#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BGCON_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bgcon_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string demo = std::string(BGCON_SOURCE_DIR) + "/data/demo";
const std::string demo_inputs =
    " --edges " + demo + "/edges.csv --covariates " + demo + "/covariates.csv";

}  // namespace

TEST_CASE("demo fit writes all artifacts and is reproducible") {
  const fs::path a = scratch("fit_a"), b = scratch("fit_b");
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(run("--seed 5 fit" + demo_inputs + " --K 5 --burn-in 200 --samples 200 --out " + a.string()) == 0);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
  for (const char* f : {"posterior.bin", "trace.csv", "effects.csv", "edges_plot.json"}) {
    CHECK(fs::exists(a / f));
  }
  REQUIRE(run("--seed 5 fit" + demo_inputs + " --K 5 --burn-in 200 --samples 200 --out " + b.string()) == 0);
  CHECK(slurp(a / "effects.csv") == slurp(b / "effects.csv"));
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));

  // summarize reproduces the effects table from the checkpoint
  const fs::path c = scratch("summarize");
  REQUIRE(run("summarize --checkpoint " + (a / "posterior.bin").string() + " --out " + c.string()) == 0);
  CHECK(slurp(a / "effects.csv") == slurp(c / "effects.csv"));
}

TEST_CASE("resume continues a shorter run to the same result") {
  const fs::path full = scratch("resume_full"), part = scratch("resume_part");
  REQUIRE(run("fit" + demo_inputs + " --K 4 --burn-in 30 --samples 30 --out " + full.string()) == 0);
  REQUIRE(run("fit" + demo_inputs + " --K 4 --burn-in 30 --samples 10 --out " + part.string()) == 0);
  REQUIRE(run("fit" + demo_inputs + " --K 4 --burn-in 30 --samples 30 --resume --out " + part.string()) == 0);
  CHECK(slurp(full / "effects.csv") == slurp(part / "effects.csv"));
}

TEST_CASE("simulate, tune and predict run end to end") {
  const fs::path sim = scratch("sim");
  REQUIRE(run("--seed 3 simulate --J 5 --n 30 --out " + sim.string()) == 0);
  CHECK(fs::exists(sim / "truth.json"));
  const std::string inputs =
      " --edges " + (sim / "edges.csv").string() + " --covariates " + (sim / "covariates.csv").string();
  const fs::path fit = scratch("sim_fit");
  REQUIRE(run("fit" + inputs + " --K 4 --burn-in 20 --samples 20 --out " + fit.string()) == 0);
  const fs::path pred = fit / "prediction.csv";
  REQUIRE(run("predict --checkpoint " + (fit / "posterior.bin").string() + inputs + " --out " +
              pred.string()) == 0);
  CHECK(slurp(pred).rfind("length_mse,count_mean_loglik", 0) == 0);
}

TEST_CASE("config file supplies subcommand options") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  const fs::path ini = dir / "run.toml";
  std::ofstream(ini) << "seed = 5\n[fit]\nK = 5\nburn-in = 20\nsamples = 20\nout = \""
                     << (dir / "out").string() << "\"\n";
  REQUIRE(run("--config " + ini.string() + " fit" + demo_inputs) == 0);
  CHECK(fs::exists(dir / "out" / "effects.csv"));
}

TEST_CASE("exit codes") {
  CHECK(run("fit --edges /nonexistent/edges.csv --covariates /nonexistent/cov.csv") == 2);
  CHECK(run("fit" + demo_inputs + " --K seven") == 4);
  CHECK(run("fit --covariates x.csv") == 4);
  const fs::path dir = scratch("bad_csv");
  fs::create_directories(dir);
  std::ofstream(dir / "edges.csv") << "subject,region_a,region_b,count,mean_length\nS1,R1,R2,abc,1.0\n";
  CHECK(run("fit --edges " + (dir / "edges.csv").string() + " --covariates " + demo +
            "/covariates.csv") == 3);
}
