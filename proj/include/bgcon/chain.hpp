#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bgcon/dataset.hpp"
#include "bgcon/model.hpp"
#include "bgcon/samplers.hpp"
#include "bgcon/serialize.hpp"

namespace bgcon {

struct Schedule {
  int burn_in = 5000;
  int samples = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  std::uint64_t chain = 0;

  int total_iterations() const { return burn_in + samples * thin; }
  void validate() const;
};

struct ChainOptions {
  HmcConfig hmc;
  /// Step-size retuning and mass refresh every hmc.adapt_window burn-in iterations.
  bool adapt = true;
  /// Curvature-based masses; identity masses otherwise.
  bool precondition = true;
  /// When false xi, delta and the indicators stay at their initial values.
  bool update_latents = true;
  double coefficient_step = 0.2;
  double latent_step = 0.1;
  /// Write the run to checkpoint_path every this many iterations (0 = never).
  int checkpoint_every = 0;
  std::string checkpoint_path;
};

/// Step size, mass and acceptance bookkeeping of one HMC block.
struct BlockTuning {
  HmcBlock block = HmcBlock::count_coefficients;
  double step_size = 0.1;
  MassMatrix mass;
  double window_accept = 0.0;
  int window_count = 0;
  long accepted = 0;
  long proposals = 0;
  long divergent = 0;
};

struct ChainState {
  ModelState state;
  std::vector<BlockTuning> blocks;
  /// Number of completed iterations.
  int iteration = 0;
};

/// Retained posterior draw; the zero-inflation indicators are not stored.
struct Draw {
  int iteration = 0;
  double log_posterior = 0.0;
  ModelState state;
};

struct TraceRow {
  int iteration = 0;
  std::string block;
  double acceptance = 0.0;
  double step_size = 0.0;
  double log_posterior = 0.0;
};

struct McmcRun {
  ModelSpec spec;
  Schedule schedule;
  ChainOptions options;
  int J = 0;
  bool self_edges = false;
  std::vector<std::string> region_names;
  std::vector<std::string> covariate_names;
  std::vector<Draw> draws;
  std::vector<TraceRow> trace;
  ChainState chain;

  bool complete() const { return chain.iteration >= schedule.total_iterations(); }
};

/// Deterministic starting point derived from data summaries and the schedule seed.
ModelState initial_state(const ConnectomeDataset& data, const ModelSpec& spec,
                         const Schedule& schedule);

/// HMC blocks active under the given options.
std::vector<HmcBlock> active_blocks(const ModelSpec& spec, const ChainOptions& options);

ChainState make_chain_state(ModelState state, const ConnectomeDataset& data,
                            const ModelSpec& spec, const ChainOptions& options);

/**
 * One full sweep: zero-inflation indicators, probit augmentation, presence
 * and length conjugate blocks, HMC blocks, indicator flips, DP scales and
 * precisions, sigma2. Returns one step record per active HMC block.
 */
std::vector<HmcStep> sweep(ChainState& chain, const ConnectomeDataset& data,
                           const ModelSpec& spec, const ChainOptions& options, Rng& rng);

using ProgressCallback = std::function<void(int iteration, int total)>;

McmcRun start_run(const ConnectomeDataset& data, const ModelSpec& spec, const Schedule& schedule,
                  const ChainOptions& options);

/// Continues `run` until its schedule is complete. Deterministic given the schedule seed.
void continue_run(McmcRun& run, const ConnectomeDataset& data,
                  const ProgressCallback& progress = {});

McmcRun run_chain(const ConnectomeDataset& data, const ModelSpec& spec, const Schedule& schedule,
                  const ChainOptions& options, const ProgressCallback& progress = {});

void write_trace_csv(const McmcRun& run, const std::string& path);

/// Binary (CBOR) checkpoint of the whole run.
void save_run(const McmcRun& run, const std::string& path);
McmcRun load_run(const std::string& path);

void to_json(Json& j, const McmcRun& run);
void from_json(const Json& j, McmcRun& run);

}  // namespace bgcon
