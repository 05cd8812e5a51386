#include "bgcon/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bgcon/errors.hpp"
#include "bgcon/io.hpp"

namespace bgcon {

namespace {

// Counter reserved for the draws that set up the initial state.
constexpr std::uint64_t kInitCounter = ~std::uint64_t{0};
// Burn-in iterations after which masses are refreshed regardless of the window.
constexpr int kWarmupRefresh = 10;

double probit_of(double p) {
  double lo = -8.0, hi = 8.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (stats::normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SymmetricCoeffMatrix constant_graphon(int K, double value) {
  return SymmetricCoeffMatrix(K, Eigen::VectorXd::Constant(upper_size(K), value));
}

BlockTuning& find_block(ChainState& chain, HmcBlock block) {
  for (auto& b : chain.blocks) {
    if (b.block == block) return b;
  }
  throw InvariantError("HMC block " + block_name(block) + " is not active");
}

void adapt_blocks(ChainState& chain, int iteration, const Schedule& schedule,
                  const ConnectomeDataset& data, const ModelSpec& spec,
                  const ChainOptions& options) {
  if (iteration >= schedule.burn_in) {
    throw InvariantError("step-size adaptation requested after burn-in");
  }
  for (auto& b : chain.blocks) {
    const double rate = b.window_count > 0 ? b.window_accept / b.window_count : 0.0;
    b.step_size = adapt_step_size(rate, b.step_size, options.hmc);
    b.window_accept = 0.0;
    b.window_count = 0;
    if (options.precondition) b.mass = block_mass(b.block, chain.state, data, spec);
  }
}

Json mass_to_json(const MassMatrix& m) {
  if (m.is_dense()) return Json{{"dense", true}, {"cholesky", matrix_to_json(m.cholesky())}};
  return Json{{"dense", false}, {"diagonal", vector_to_json(m.diagonal_values())}};
}

MassMatrix mass_from_json(const Json& j) {
  if (j.at("dense").get<bool>()) return MassMatrix::from_cholesky(matrix_from_json(j.at("cholesky")));
  return MassMatrix::diagonal(vector_from_json(j.at("diagonal")));
}

HmcBlock parse_block(const std::string& name) {
  for (HmcBlock b : {HmcBlock::count_coefficients, HmcBlock::count_random_effects,
                     HmcBlock::latent_xi, HmcBlock::latent_delta}) {
    if (block_name(b) == name) return b;
  }
  throw ConfigError("unknown HMC block '" + name + "'");
}

}  // namespace

void Schedule::validate() const {
  if (burn_in < 0 || samples < 0) throw ConfigError("burn-in and samples must be non-negative");
  if (thin < 1) throw ConfigError("thin must be at least 1");
}

ModelState initial_state(const ConnectomeDataset& data, const ModelSpec& spec,
                         const Schedule& schedule) {
  const int E = data.edges();
  ModelState s = ModelState::zeros(spec, data.J, data.n, E);
  Rng rng = make_stream(schedule.seed, schedule.chain, kInitCounter);

  double sum_log = 0.0, sum_log2 = 0.0, sum_count = 0.0;
  std::size_t observed = 0;
  std::vector<double> node_presence(data.J, 0.0);
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < E; ++e) {
      const std::size_t o = data.obs(i, e);
      const bool present = data.counts[o] >= 1;
      s.inflation[o] = present ? 1 : 0;
      if (!present) continue;
      ++observed;
      sum_log += data.log_lengths[o];
      sum_log2 += data.log_lengths[o] * data.log_lengths[o];
      sum_count += data.counts[o];
      node_presence[data.edge_list[e].a] += 1.0;
      node_presence[data.edge_list[e].b] += 1.0;
    }
  }
  const double total = static_cast<double>(data.counts.size());
  const int K = spec.hyper.K;
  if (observed > 0) {
    const double m = sum_log / observed;
    s.theta[kLength] = constant_graphon(K, m);
    s.theta[kCount] = constant_graphon(K, std::log(sum_count / observed));
    const double var = observed > 1 ? (sum_log2 - observed * m * m) / (observed - 1) : 0.0;
    s.sigma2 = var > 1e-8 ? var : 1.0;
  }
  if (total > 0) {
    const double frac = std::clamp(observed / total, 0.01, 0.99);
    s.theta[kPresence] = constant_graphon(K, probit_of(frac));
  }

  // xi starts at the rank of each node's connectivity.
  std::vector<int> order(data.J);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return node_presence[x] < node_presence[y]; });
  for (int r = 0; r < data.J; ++r) s.xi[order[r]] = (r + 0.5) / data.J;
  for (int j = 0; j < data.J; ++j) {
    s.delta[j] = 0.25 + 0.5 * stats::draw_uniform(rng);
    s.indicator[j] = 1;
  }
  return s;
}

std::vector<HmcBlock> active_blocks(const ModelSpec& spec, const ChainOptions& options) {
  std::vector<HmcBlock> out{HmcBlock::count_coefficients};
  if (spec.options.random_effects) out.push_back(HmcBlock::count_random_effects);
  if (options.update_latents) {
    out.push_back(HmcBlock::latent_xi);
    out.push_back(HmcBlock::latent_delta);
  }
  return out;
}

ChainState make_chain_state(ModelState state, const ConnectomeDataset& data,
                            const ModelSpec& spec, const ChainOptions& options) {
  options.hmc.validate();
  ChainState chain;
  chain.state = std::move(state);
  chain.state.validate(data);
  for (HmcBlock block : active_blocks(spec, options)) {
    BlockTuning b;
    b.block = block;
    const bool latent = block == HmcBlock::latent_xi || block == HmcBlock::latent_delta;
    b.step_size = latent ? options.latent_step : options.coefficient_step;
    b.mass = options.precondition ? block_mass(block, chain.state, data, spec)
                                  : MassMatrix::identity(get_block(chain.state, block).size());
    chain.blocks.push_back(std::move(b));
  }
  return chain;
}

std::vector<HmcStep> sweep(ChainState& chain, const ConnectomeDataset& data,
                           const ModelSpec& spec, const ChainOptions& options, Rng& rng) {
  ModelState& s = chain.state;
  const bool re = spec.options.random_effects;
  const int L = options.hmc.leapfrog_steps;

  draw_zero_inflation(s, data, spec, rng);
  const Eigen::VectorXd w = draw_presence_latents(s, data, spec, rng);
  gibbs_coefficients(kPresence, s, data, spec, &w, rng);
  if (re) gibbs_random_effects(kPresence, s, data, spec, &w, rng);
  gibbs_coefficients(kLength, s, data, spec, nullptr, rng);
  if (re) gibbs_random_effects(kLength, s, data, spec, nullptr, rng);

  std::vector<HmcStep> steps;
  const auto run_block = [&](HmcBlock block) {
    BlockTuning& b = find_block(chain, block);
    const HmcStep step = hmc_update(block, s, data, spec, b.step_size, L, b.mass, rng);
    ++b.proposals;
    if (step.accepted) ++b.accepted;
    if (step.divergent) ++b.divergent;
    b.window_accept += step.accept_prob;
    ++b.window_count;
    steps.push_back(step);
  };
  run_block(HmcBlock::count_coefficients);
  if (re) run_block(HmcBlock::count_random_effects);
  if (options.update_latents) {
    run_block(HmcBlock::latent_xi);
    run_block(HmcBlock::latent_delta);
    flip_indicators(s, spec, rng);
  }
  if (re) {
    for (int t = 0; t < kChannels; ++t) {
      dp_scale_update(t, s, spec, rng);
      s.alpha[t] = update_alpha(s.alpha[t], cluster_count(s.cluster[t]), s.n, spec.hyper.c1,
                                spec.hyper.c2, rng);
    }
  }
  gibbs_sigma2(s, data, spec, rng);

  for (std::size_t o = 0; o < data.counts.size(); ++o) {
    if (data.counts[o] >= 1 && !s.inflation[o]) {
      throw InvariantError("zero-inflation indicator is 0 on an observed edge");
    }
  }
  return steps;
}

McmcRun start_run(const ConnectomeDataset& data, const ModelSpec& spec, const Schedule& schedule,
                  const ChainOptions& options) {
  schedule.validate();
  McmcRun run;
  run.spec = spec;
  run.schedule = schedule;
  run.options = options;
  run.J = data.J;
  run.self_edges = data.self_edges;
  run.region_names = data.region_names;
  run.covariate_names = data.covariate_names;
  run.chain = make_chain_state(initial_state(data, spec, schedule), data, spec, options);
  return run;
}

void continue_run(McmcRun& run, const ConnectomeDataset& data, const ProgressCallback& progress) {
  const Schedule& sch = run.schedule;
  const ChainOptions& opt = run.options;
  ChainState& chain = run.chain;
  const int total = sch.total_iterations();
  if (data.J != run.J) throw InvariantError("dataset does not match the run's region count");
  for (int it = chain.iteration; it < total; ++it) {
    Rng rng = make_stream(sch.seed, sch.chain, static_cast<std::uint64_t>(it));
    std::vector<HmcStep> steps;
    try {
      steps = sweep(chain, data, run.spec, opt, rng);
    } catch (const EvaluationError& e) {
      throw EvaluationError(e.block(), "iteration " + std::to_string(it) + ": " + e.what());
    }
    const double lp = log_posterior_unconstrained(chain.state, data, run.spec);
    for (std::size_t b = 0; b < steps.size(); ++b) {
      run.trace.push_back(TraceRow{it, block_name(chain.blocks[b].block), steps[b].accept_prob,
                                   chain.blocks[b].step_size, lp});
    }
    if (opt.adapt && it < sch.burn_in) {
      if ((it + 1) % opt.hmc.adapt_window == 0) {
        adapt_blocks(chain, it, sch, data, run.spec, opt);
      } else if (opt.precondition && it < kWarmupRefresh) {
        // The starting point is far from the bulk; refresh masses while it moves.
        for (auto& b : chain.blocks) b.mass = block_mass(b.block, chain.state, data, run.spec);
      }
    }
    if (it >= sch.burn_in && (it - sch.burn_in) % sch.thin == 0) {
      Draw d;
      d.iteration = it;
      d.log_posterior = lp;
      d.state = chain.state;
      d.state.inflation.clear();
      run.draws.push_back(std::move(d));
    }
    chain.iteration = it + 1;
    if (opt.checkpoint_every > 0 && !opt.checkpoint_path.empty() &&
        chain.iteration % opt.checkpoint_every == 0) {
      save_run(run, opt.checkpoint_path);
    }
    if (progress) progress(chain.iteration, total);
  }
}

McmcRun run_chain(const ConnectomeDataset& data, const ModelSpec& spec, const Schedule& schedule,
                  const ChainOptions& options, const ProgressCallback& progress) {
  McmcRun run = start_run(data, spec, schedule, options);
  continue_run(run, data, progress);
  return run;
}

void write_trace_csv(const McmcRun& run, const std::string& path) {
  std::ostringstream out;
  out << "iteration,block,acceptance,step_size,log_posterior\n";
  for (const auto& r : run.trace) {
    out << r.iteration << ',' << r.block << ',' << io::format_double(r.acceptance) << ','
        << io::format_double(r.step_size) << ',' << io::format_double(r.log_posterior) << '\n';
  }
  io::write_file_atomic(path, out.str());
}

void to_json(Json& j, const McmcRun& run) {
  const auto& h = run.options.hmc;
  Json blocks = Json::array();
  for (const auto& b : run.chain.blocks) {
    blocks.push_back(Json{{"block", block_name(b.block)},
                          {"step_size", b.step_size},
                          {"mass", mass_to_json(b.mass)},
                          {"window_accept", b.window_accept},
                          {"window_count", b.window_count},
                          {"accepted", b.accepted},
                          {"proposals", b.proposals},
                          {"divergent", b.divergent}});
  }
  Json draws = Json::array();
  for (const auto& d : run.draws) {
    draws.push_back(Json{{"iteration", d.iteration}, {"log_posterior", d.log_posterior},
                         {"state", d.state}});
  }
  Json trace = {{"iteration", Json::array()}, {"block", Json::array()},
                {"acceptance", Json::array()}, {"step_size", Json::array()},
                {"log_posterior", Json::array()}};
  for (const auto& r : run.trace) {
    trace["iteration"].push_back(r.iteration);
    trace["block"].push_back(r.block);
    trace["acceptance"].push_back(r.acceptance);
    trace["step_size"].push_back(r.step_size);
    trace["log_posterior"].push_back(r.log_posterior);
  }
  j = Json{{"format", "bgcon-run-1"},
           {"spec", run.spec},
           {"schedule",
            {{"burn_in", run.schedule.burn_in},
             {"samples", run.schedule.samples},
             {"thin", run.schedule.thin},
             {"seed", run.schedule.seed},
             {"chain", run.schedule.chain}}},
           {"options",
            {{"leapfrog_steps", h.leapfrog_steps},
             {"adapt_window", h.adapt_window},
             {"band_low", h.band_low},
             {"band_high", h.band_high},
             {"shrink", h.shrink},
             {"grow", h.grow},
             {"adapt", run.options.adapt},
             {"precondition", run.options.precondition},
             {"update_latents", run.options.update_latents},
             {"coefficient_step", run.options.coefficient_step},
             {"latent_step", run.options.latent_step},
             {"checkpoint_every", run.options.checkpoint_every}}},
           {"J", run.J},
           {"self_edges", run.self_edges},
           {"region_names", run.region_names},
           {"covariate_names", run.covariate_names},
           {"draws", draws},
           {"trace", trace},
           {"chain", {{"iteration", run.chain.iteration}, {"state", run.chain.state},
                      {"blocks", blocks}}}};
}

void from_json(const Json& j, McmcRun& run) {
  if (j.value("format", std::string()) != "bgcon-run-1") {
    throw ConfigError("not a posterior checkpoint");
  }
  run.spec = j.at("spec").get<ModelSpec>();
  const Json& s = j.at("schedule");
  run.schedule.burn_in = s.at("burn_in");
  run.schedule.samples = s.at("samples");
  run.schedule.thin = s.at("thin");
  run.schedule.seed = s.at("seed");
  run.schedule.chain = s.at("chain");
  const Json& o = j.at("options");
  auto& h = run.options.hmc;
  h.leapfrog_steps = o.at("leapfrog_steps");
  h.adapt_window = o.at("adapt_window");
  h.band_low = o.at("band_low");
  h.band_high = o.at("band_high");
  h.shrink = o.at("shrink");
  h.grow = o.at("grow");
  run.options.adapt = o.at("adapt");
  run.options.precondition = o.at("precondition");
  run.options.update_latents = o.at("update_latents");
  run.options.coefficient_step = o.at("coefficient_step");
  run.options.latent_step = o.at("latent_step");
  run.options.checkpoint_every = o.at("checkpoint_every");
  // The checkpoint location is supplied by whoever loads the file.
  run.J = j.at("J");
  run.self_edges = j.at("self_edges");
  run.region_names = j.at("region_names").get<std::vector<std::string>>();
  run.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
  run.draws.clear();
  for (const auto& d : j.at("draws")) {
    run.draws.push_back(
        Draw{d.at("iteration"), d.at("log_posterior"), d.at("state").get<ModelState>()});
  }
  run.trace.clear();
  const Json& t = j.at("trace");
  for (std::size_t r = 0; r < t.at("iteration").size(); ++r) {
    run.trace.push_back(TraceRow{t["iteration"][r], t["block"][r], t["acceptance"][r],
                                 t["step_size"][r], t["log_posterior"][r]});
  }
  const Json& c = j.at("chain");
  run.chain.iteration = c.at("iteration");
  run.chain.state = c.at("state").get<ModelState>();
  run.chain.blocks.clear();
  for (const auto& b : c.at("blocks")) {
    BlockTuning bt;
    bt.block = parse_block(b.at("block"));
    bt.step_size = b.at("step_size");
    bt.mass = mass_from_json(b.at("mass"));
    bt.window_accept = b.at("window_accept");
    bt.window_count = b.at("window_count");
    bt.accepted = b.at("accepted");
    bt.proposals = b.at("proposals");
    bt.divergent = b.at("divergent");
    run.chain.blocks.push_back(std::move(bt));
  }
}

void save_run(const McmcRun& run, const std::string& path) {
  io::write_binary_atomic(path, Json::to_cbor(Json(run)));
}

McmcRun load_run(const std::string& path) {
  const std::vector<std::uint8_t> bytes = io::read_binary(path);
  Json j;
  try {
    j = Json::from_cbor(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": unreadable checkpoint (" + e.what() + ")");
  }
  return j.get<McmcRun>();
}

}  // namespace bgcon
