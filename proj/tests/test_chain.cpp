#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>

#include "bgcon/chain.hpp"
#include "bgcon/errors.hpp"
#include "bgcon/io.hpp"
#include "bgcon/serialize.hpp"
#include "fixtures.hpp"
#include "geweke.hpp"

using namespace bgcon;

namespace {

ModelSpec chain_spec(bool random_effects = true) {
  Hyperparams h;
  h.K = 4;
  ModelOptions o;
  o.random_effects = random_effects;
  return ModelSpec::make(h, o, 4);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("bgcon_test_" + name)).string();
}

std::string dump_draws(const McmcRun& run) {
  Json j;
  to_json(j, run);
  return j.at("draws").dump() + j.at("trace").dump() + j.at("chain").dump();
}

}  // namespace

TEST_CASE("state json round trip") {
  auto spec = chain_spec();
  auto data = fixtures::random_dataset(3, 4, 5);
  auto s = fixtures::random_state(spec, data, 6);
  const Json j = s;
  const ModelState back = j.get<ModelState>();
  CHECK(Json(back) == j);
  CHECK(back.theta[kCount].upper() == s.theta[kCount].upper());
  CHECK(back.xi == s.xi);
  CHECK(back.cluster[2] == s.cluster[2]);
  const ModelSpec spec_back = Json(spec).get<ModelSpec>();
  CHECK(spec_back.hyper.K == 4);
  CHECK(spec_back.basis.knots == spec.basis.knots);
  CHECK_THROWS_AS(parse_delta_prior("gaussian"), ConfigError);
}

TEST_CASE("zero samples gives an empty run") {
  auto data = fixtures::random_dataset(3, 4, 7);
  Schedule sch;
  sch.burn_in = 0;
  sch.samples = 0;
  const McmcRun run = run_chain(data, chain_spec(), sch, {});
  CHECK(run.draws.empty());
  CHECK(run.trace.empty());
  CHECK(run.complete());
  CHECK(run.J == 4);
  CHECK(run.chain.blocks.size() == 4);
}

TEST_CASE("schedule validation") {
  Schedule sch;
  sch.thin = 0;
  CHECK_THROWS_AS(sch.validate(), ConfigError);
  sch.thin = 1;
  sch.samples = -1;
  CHECK_THROWS_AS(sch.validate(), ConfigError);
}

TEST_CASE("initial state") {
  auto data = fixtures::random_dataset(5, 6, 8);
  auto spec = chain_spec();
  Schedule sch;
  const ModelState s = initial_state(data, spec, sch);
  CHECK_NOTHROW(s.validate(data));
  // A constant graphon equals its coefficient everywhere.
  double mean_log = 0.0;
  int observed = 0;
  for (std::size_t o = 0; o < data.counts.size(); ++o) {
    if (data.counts[o] >= 1) {
      mean_log += data.log_lengths[o];
      ++observed;
    }
  }
  mean_log /= observed;
  const auto effects = reconstruct_effect_matrices(s, spec);
  CHECK(effects[spec.family_index(kLength, 0)](0, 3) == doctest::Approx(mean_log).epsilon(1e-12));
  for (int j = 0; j < data.J; ++j) {
    CHECK(s.delta[j] > 0.25);
    CHECK(s.delta[j] < 0.75);
  }
  // Deterministic in the seed.
  CHECK(Json(initial_state(data, spec, sch)) == Json(s));
}

TEST_CASE("fixed seed gives identical chains") {
  auto data = fixtures::random_dataset(4, 5, 9);
  Schedule sch;
  sch.burn_in = 30;
  sch.samples = 20;
  sch.seed = 77;
  ChainOptions opt;
  opt.hmc.adapt_window = 10;
  const McmcRun a = run_chain(data, chain_spec(), sch, opt);
  const McmcRun b = run_chain(data, chain_spec(), sch, opt);
  CHECK(a.draws.size() == 20);
  CHECK(dump_draws(a) == dump_draws(b));
  sch.seed = 78;
  const McmcRun c = run_chain(data, chain_spec(), sch, opt);
  CHECK(dump_draws(a) != dump_draws(c));
}

TEST_CASE("thinning and adaptation freeze") {
  auto data = fixtures::random_dataset(4, 5, 10);
  Schedule sch;
  sch.burn_in = 40;
  sch.samples = 10;
  sch.thin = 3;
  ChainOptions opt;
  opt.hmc.adapt_window = 10;
  const McmcRun run = run_chain(data, chain_spec(), sch, opt);
  REQUIRE(run.draws.size() == 10);
  for (std::size_t r = 0; r < run.draws.size(); ++r) {
    CHECK(run.draws[r].iteration == 40 + 3 * static_cast<int>(r));
    CHECK(run.draws[r].state.inflation.empty());
  }
  // Step sizes never change after burn-in.
  std::map<std::string, double> frozen;
  for (const auto& row : run.trace) {
    if (row.iteration < sch.burn_in) continue;
    auto [it, inserted] = frozen.emplace(row.block, row.step_size);
    CHECK(it->second == row.step_size);
  }
  CHECK(frozen.size() == 4);
  for (const auto& b : run.chain.blocks) {
    CHECK(b.accepted <= b.proposals);
    CHECK(b.proposals == sch.total_iterations());
  }
}

TEST_CASE("without random effects the effects stay at zero") {
  auto data = fixtures::random_dataset(4, 5, 11);
  Schedule sch;
  sch.burn_in = 5;
  sch.samples = 5;
  const McmcRun run = run_chain(data, chain_spec(false), sch, {});
  CHECK(run.chain.blocks.size() == 3);
  for (const auto& d : run.draws) CHECK(d.state.eta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("latents can be held fixed") {
  auto data = fixtures::random_dataset(4, 5, 12);
  Schedule sch;
  sch.burn_in = 3;
  sch.samples = 5;
  ChainOptions opt;
  opt.update_latents = false;
  const McmcRun run = run_chain(data, chain_spec(), sch, opt);
  for (const auto& d : run.draws) {
    CHECK(d.state.xi == run.draws[0].state.xi);
    CHECK(d.state.delta == run.draws[0].state.delta);
  }
}

TEST_CASE("checkpoint resume reproduces the uninterrupted chain") {
  auto data = fixtures::random_dataset(4, 5, 13);
  Schedule sch;
  sch.burn_in = 20;
  sch.samples = 20;
  sch.seed = 5;
  ChainOptions opt;
  opt.hmc.adapt_window = 10;
  const McmcRun full = run_chain(data, chain_spec(), sch, opt);

  const std::string path = temp_path("resume.cbor");
  opt.checkpoint_every = 15;
  opt.checkpoint_path = path;
  struct Stop {};
  McmcRun partial = start_run(data, chain_spec(), sch, opt);
  try {
    continue_run(partial, data, [](int it, int) {
      if (it == 25) throw Stop{};
    });
  } catch (const Stop&) {
  }
  McmcRun resumed = load_run(path);
  CHECK(resumed.chain.iteration == 15);
  continue_run(resumed, data);
  CHECK(resumed.complete());
  // Options differ only in the checkpoint settings, so compare the chains.
  CHECK(dump_draws(resumed) == dump_draws(full));
  std::remove(path.c_str());
}

TEST_CASE("save and load a run") {
  auto data = fixtures::random_dataset(3, 4, 14);
  Schedule sch;
  sch.burn_in = 5;
  sch.samples = 5;
  const McmcRun run = run_chain(data, chain_spec(), sch, {});
  const std::string path = temp_path("run.cbor");
  save_run(run, path);
  const McmcRun back = load_run(path);
  CHECK(dump_draws(back) == dump_draws(run));
  CHECK(back.region_names == run.region_names);
  CHECK(back.spec.hyper.K == run.spec.hyper.K);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_run(path), IoError);
}

TEST_CASE("trace csv") {
  auto data = fixtures::random_dataset(3, 4, 15);
  Schedule sch;
  sch.burn_in = 2;
  sch.samples = 2;
  const McmcRun run = run_chain(data, chain_spec(), sch, {});
  const std::string path = temp_path("trace.csv");
  write_trace_csv(run, path);
  const std::string text = io::read_file(path);
  CHECK(text.rfind("iteration,block,acceptance,step_size,log_posterior\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 * 4);
  std::remove(path.c_str());
}

TEST_CASE("geweke joint distribution test (short)") {
  const auto stats = geweke::run(4000, 4000, 2024);
  for (const auto& s : stats) {
    INFO(s.name, " forward ", s.forward_mean, " chain ", s.chain_mean);
    CHECK(std::abs(s.z) < 4.0);
  }
}
