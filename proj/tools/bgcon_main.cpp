#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "bgcon/chain.hpp"
#include "bgcon/errors.hpp"
#include "bgcon/inference.hpp"
#include "bgcon/io.hpp"
#include "bgcon/serialize.hpp"
#include "bgcon/simulate.hpp"
#include "bgcon/study.hpp"

using namespace bgcon;
namespace fs = std::filesystem;

namespace {

// Exit codes per error class.
enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kIo = 2,
  kParse = 3,
  kConfig = 4,
  kInvariant = 5,
  kEvaluation = 6,
  kDomain = 7,
};

struct HyperFlags {
  Hyperparams h;
  std::string K = "auto";
  std::string latent_prior = "beta_mixture";
  bool no_random_effects = false;

  void add(CLI::App* app) {
    app->add_option("--a", h.a, "prior sd of coefficients and latent logits")->capture_default_str();
    app->add_option("--M", h.M, "Beta(M, M) shape of the delta mixture")->capture_default_str();
    app->add_option("--q", h.q, "weight of the uniform delta component")->capture_default_str();
    app->add_option("--b1", h.b1, "inverse-gamma shape of the DP base measure")->capture_default_str();
    app->add_option("--b2", h.b2, "inverse-gamma scale of the DP base measure")->capture_default_str();
    app->add_option("--c1", h.c1, "gamma shape of the DP precision")->capture_default_str();
    app->add_option("--c2", h.c2, "gamma rate of the DP precision")->capture_default_str();
    app->add_option("--d1", h.d1, "gamma shape of 1/sigma^2")->capture_default_str();
    app->add_option("--d2", h.d2, "gamma rate of 1/sigma^2")->capture_default_str();
    app->add_option("--K", K, "number of B-spline basis functions, or 'auto'")->capture_default_str();
    app->add_option("--degree", h.degree, "spline degree")->capture_default_str();
    app->add_option("--latent-prior", latent_prior, "beta_mixture or logit_normal")
        ->check(CLI::IsMember({"beta_mixture", "logit_normal"}))
        ->capture_default_str();
    app->add_flag("--no-random-effects", no_random_effects, "drop the subject random effects");
  }

  bool auto_K() const { return K == "auto"; }
  Hyperparams resolved(int K_value) const {
    Hyperparams out = h;
    out.K = K_value;
    return out;
  }
  int fixed_K() const {
    try {
      std::size_t used = 0;
      const int value = std::stoi(K, &used);
      if (used != K.size()) throw std::invalid_argument(K);
      return value;
    } catch (const std::exception&) {
      throw ConfigError("--K must be an integer or 'auto', got '" + K + "'");
    }
  }
  ModelOptions options() const {
    ModelOptions o;
    o.random_effects = !no_random_effects;
    o.delta_prior = parse_delta_prior(latent_prior);
    return o;
  }
};

struct ScheduleFlags {
  Schedule s;
  int chains = 1;
  void add(CLI::App* app) {
    app->add_option("--burn-in", s.burn_in, "burn-in iterations")->capture_default_str();
    app->add_option("--samples", s.samples, "retained iterations")->capture_default_str();
    app->add_option("--thin", s.thin, "keep every thin-th post-burn-in iteration")->capture_default_str();
    app->add_option("--chains", chains, "independent chains (pooled in the summaries)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }
};

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError(path + ": file not found");
}

void progress_bar(const std::string& label, int iteration, int total) {
  const int step = std::max(1, total / 10);
  if (iteration % step == 0 || iteration == total) {
    std::cerr << label << ' ' << iteration << '/' << total << std::endl;
  }
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> grid;
  const auto colon = text.find(':');
  try {
    if (colon != std::string::npos) {
      const int lo = std::stoi(text.substr(0, colon)), hi = std::stoi(text.substr(colon + 1));
      for (int k = lo; k <= hi; ++k) grid.push_back(k);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) grid.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse grid '" + text + "' (use 7:20 or 7,9,11)");
  }
  if (grid.empty()) throw ConfigError("empty grid '" + text + "'");
  for (int k : grid) {
    if (k < 1) throw ConfigError("grid values must be positive");
  }
  return grid;
}

McmcRun pooled(const std::vector<McmcRun>& runs) {
  McmcRun out = runs.front();
  for (std::size_t c = 1; c < runs.size(); ++c) {
    out.draws.insert(out.draws.end(), runs[c].draws.begin(), runs[c].draws.end());
  }
  return out;
}

void write_summaries(const McmcRun& run, const std::string& out, int top, double level) {
  const EffectSummary summary = summarize_effects(run, level);
  io::write_file_atomic(path_in(out, "effects.csv"), effect_summary_csv(summary, top));
  io::write_file_atomic(path_in(out, "edges_plot.json"), edge_plot_json(summary));
}

std::string chain_file(const std::string& stem, const std::string& ext, int c, int chains) {
  return chains == 1 ? stem + ext : stem + "_chain" + std::to_string(c + 1) + ext;
}

int run_main(int argc, char** argv) {
  CLI::App app{"Bayesian graphon regression for multi-subject connectomes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI configuration file; command-line flags override it");
  std::uint64_t seed = 1;
  int threads = 1;
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for chains and replications")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "tune (K=auto), run the sampler and summarize");
  std::string edges, covariates, out = "bgcon_out";
  bool self_edges = false, resume = false;
  int checkpoint_every = 500, top = 0, tune_draws = 10;
  double level = 0.95;
  std::string grid_text = "7:20";
  HyperFlags fit_hyper;
  ScheduleFlags fit_schedule;
  fit->add_option("--edges", edges, "edge CSV (subject,region_a,region_b,count,mean_length)")->required();
  fit->add_option("--covariates", covariates, "covariate CSV (subject,mci,ad,male,age)")->required();
  fit->add_option("--out", out, "output directory")->capture_default_str();
  fit->add_flag("--self-edges", self_edges, "include self-edges (j = k)");
  fit->add_flag("--resume", resume, "continue from an existing checkpoint in the output directory");
  fit->add_option("--checkpoint-every", checkpoint_every, "iterations between checkpoints (0 = end only)")
      ->capture_default_str();
  fit->add_option("--top", top, "keep only the top ranks per family in effects.csv (0 = all)");
  fit->add_option("--level", level, "credible level")->capture_default_str();
  fit->add_option("--grid", grid_text, "K grid for K=auto")->capture_default_str();
  fit->add_option("--tune-draws", tune_draws, "latent draws per K for K=auto")->capture_default_str();
  fit_hyper.add(fit);
  fit_schedule.add(fit);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset in the ingestion format");
  int sim_J = 20, sim_n = 100;
  GeneratorConfig gen;
  std::string sim_out = "bgcon_sim";
  const auto add_generator = [&](CLI::App* cmd) {
    cmd->add_option("--sigma", gen.sigma, "error sd of log length")->capture_default_str();
    cmd->add_option("--noise-var", gen.noise_var, "variance of the truth perturbations")->capture_default_str();
    cmd->add_option("--age-sd", gen.age_sd, "sd of the age covariate")->capture_default_str();
    cmd->add_option("--presence-shift", gen.baseline_shift, "shift of the presence baseline")
        ->capture_default_str();
  };
  sim->add_option("--J", sim_J, "regions")->capture_default_str();
  sim->add_option("--n", sim_n, "subjects")->capture_default_str();
  sim->add_option("--out", sim_out, "output directory")->capture_default_str();
  add_generator(sim);

  // study
  auto* study = app.add_subcommand("study", "simulation study: Bayes graphon vs per-edge ANCOVA");
  StudyConfig sc;
  std::string study_out = "bgcon_study";
  bool no_prediction = false, no_estimation = false;
  study->add_option("--J", sc.J, "regions")->capture_default_str();
  study->add_option("--n", sc.n_list, "sample sizes")->capture_default_str();
  study->add_option("--replications", sc.replications, "replications per sample size")->capture_default_str();
  study->add_option("--methods", sc.methods, "bayes and/or ancova")->capture_default_str();
  study->add_option("--burn-in", sc.schedule.burn_in, "burn-in iterations")->capture_default_str();
  study->add_option("--samples", sc.schedule.samples, "retained iterations")->capture_default_str();
  study->add_option("--K", sc.hyper.K, "basis functions of the fitted model")->capture_default_str();
  study->add_option("--out", study_out, "output directory")->capture_default_str();
  study->add_flag("--no-prediction", no_prediction, "skip the half/half prediction fits");
  study->add_flag("--no-estimation", no_estimation, "skip the estimation-accuracy fits");
  add_generator(study);

  // tune
  auto* tune = app.add_subcommand("tune", "AIC grid search over the number of basis functions");
  std::string tune_out = "tune.csv";
  double tune_sd = 10.0;
  tune->add_option("--edges", edges, "edge CSV")->required();
  tune->add_option("--covariates", covariates, "covariate CSV")->required();
  tune->add_flag("--self-edges", self_edges, "include self-edges");
  tune->add_option("--grid", grid_text, "K grid, e.g. 7:20 or 7,9,11")->capture_default_str();
  tune->add_option("--draws", tune_draws, "latent draws per K")->capture_default_str();
  tune->add_option("--latent-sd", tune_sd, "sd of the logit-normal latent draws")->capture_default_str();
  tune->add_option("--out", tune_out, "output CSV")->capture_default_str();

  // summarize
  auto* summarize = app.add_subcommand("summarize", "re-summarize saved checkpoints");
  std::vector<std::string> checkpoints;
  std::string sum_out = "bgcon_out";
  summarize->add_option("--checkpoint", checkpoints, "checkpoint file(s) of one model")->required();
  summarize->add_option("--out", sum_out, "output directory")->capture_default_str();
  summarize->add_option("--top", top, "keep only the top ranks per family (0 = all)");
  summarize->add_option("--level", level, "credible level")->capture_default_str();

  // predict
  auto* predict = app.add_subcommand("predict", "held-out prediction metrics of a saved fit");
  std::string pred_out = "prediction.csv";
  predict->add_option("--checkpoint", checkpoints, "checkpoint file(s)")->required();
  predict->add_option("--edges", edges, "held-out edge CSV")->required();
  predict->add_option("--covariates", covariates, "held-out covariate CSV")->required();
  predict->add_flag("--self-edges", self_edges, "include self-edges");
  predict->add_option("--out", pred_out, "output CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "FileError" ? kIo : kConfig;
  }

  if (*fit) {
    require_file(edges);
    require_file(covariates);
    IngestOptions ingest;
    ingest.self_edges = self_edges;
    const ConnectomeDataset data = read_dataset(edges, covariates, ingest);
    int K = fit_hyper.auto_K() ? 0 : fit_hyper.fixed_K();
    fs::create_directories(out);
    if (fit_hyper.auto_K()) {
      TuneOptions to;
      to.grid = parse_grid(grid_text);
      to.latent_draws = tune_draws;
      to.latent_sd = fit_hyper.h.a;
      to.seed = seed;
      to.degree = fit_hyper.h.degree;
      try {
        const TuneReport report = tune_basis_size(data, to);
        io::write_file_atomic(path_in(out, "tune.csv"), tune_report_csv(report));
        K = report.chosen_K;
        std::cerr << "tuning selected K = " << K << std::endl;
      } catch (const DomainError& e) {
        K = *std::min_element(to.grid.begin(), to.grid.end());
        std::cerr << "warning: tuning failed (" << e.what() << "); using K = " << K << std::endl;
      }
    }
    const ModelSpec spec = ModelSpec::make(fit_hyper.resolved(K), fit_hyper.options(), data.covariates());
    const int chains = fit_schedule.chains;
    std::vector<McmcRun> runs(chains);
    std::vector<std::exception_ptr> errors(chains);
    const auto run_one = [&](int c) {
      try {
        Schedule s = fit_schedule.s;
        s.seed = seed;
        s.chain = static_cast<std::uint64_t>(c);
        ChainOptions options;
        options.checkpoint_every = checkpoint_every;
        options.checkpoint_path = path_in(out, chain_file("posterior", ".bin", c, chains));
        const std::string label = chains == 1 ? "iteration" : "chain " + std::to_string(c + 1);
        const auto progress = [&](int it, int total) { progress_bar(label, it, total); };
        if (resume && fs::exists(options.checkpoint_path)) {
          runs[c] = load_run(options.checkpoint_path);
          if (runs[c].spec.hyper.K != spec.hyper.K || runs[c].schedule.seed != s.seed) {
            throw ConfigError("checkpoint " + options.checkpoint_path + " belongs to a different configuration");
          }
          if (runs[c].schedule.burn_in != s.burn_in || runs[c].schedule.thin != s.thin) {
            throw ConfigError("--resume can only extend --samples");
          }
          runs[c].schedule.samples = std::max(runs[c].schedule.samples, s.samples);
          runs[c].options.checkpoint_every = checkpoint_every;
          runs[c].options.checkpoint_path = options.checkpoint_path;
          continue_run(runs[c], data, progress);
        } else {
          runs[c] = run_chain(data, spec, s, options, progress);
        }
        save_run(runs[c], options.checkpoint_path);
        write_trace_csv(runs[c], path_in(out, chain_file("trace", ".csv", c, chains)));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    };
    if (threads <= 1 || chains == 1) {
      for (int c = 0; c < chains; ++c) run_one(c);
    } else {
      for (int first = 0; first < chains; first += threads) {
        std::vector<std::thread> pool;
        for (int c = first; c < std::min(chains, first + threads); ++c) pool.emplace_back(run_one, c);
        for (auto& t : pool) t.join();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (int c = 0; c < chains; ++c) {
      for (const auto& b : runs[c].chain.blocks) {
        std::cerr << "chain " << c + 1 << ' ' << block_name(b.block) << ": acceptance "
                  << (b.proposals ? static_cast<double>(b.accepted) / b.proposals : 0.0)
                  << ", step " << b.step_size << ", divergent " << b.divergent << std::endl;
      }
    }
    write_summaries(pooled(runs), out, top, level);
    std::cout << "wrote " << out << std::endl;
    return kOk;
  }

  if (*sim) {
    auto [data, truth] = generate_dataset(sim_J, sim_n, seed, gen);
    fs::create_directories(sim_out);
    write_edges_csv(data, path_in(sim_out, "edges.csv"));
    write_covariates_csv(data, path_in(sim_out, "covariates.csv"));
    Json t;
    t["J"] = truth.J;
    t["xi"] = vector_to_json(truth.xi);
    t["delta"] = vector_to_json(truth.delta);
    ModelSpec names_spec;
    Json effects = Json::object();
    for (std::size_t f = 0; f < truth.effects.size(); ++f) {
      effects[family_name(static_cast<int>(f), names_spec, data.covariate_names)] =
          matrix_to_json(truth.effects[f]);
    }
    t["effects"] = effects;
    t["sigma"] = gen.sigma;
    t["noise_var"] = gen.noise_var;
    t["age_sd"] = gen.age_sd;
    t["seed"] = seed;
    io::write_file_atomic(path_in(sim_out, "truth.json"), t.dump(1) + "\n");
    std::cout << "wrote " << sim_out << std::endl;
    return kOk;
  }

  if (*study) {
    sc.seed = seed;
    sc.threads = threads;
    sc.generator = gen;
    sc.estimation = !no_estimation;
    sc.prediction = !no_prediction;
    sc.schedule.seed = seed;
    const StudyReport report = run_study(sc, [](const std::string& m) { std::cerr << m << std::endl; });
    write_study(report, study_out);
    std::cout << study_markdown(report);
    return kOk;
  }

  if (*tune) {
    require_file(edges);
    require_file(covariates);
    IngestOptions ingest;
    ingest.self_edges = self_edges;
    const ConnectomeDataset data = read_dataset(edges, covariates, ingest);
    TuneOptions to;
    to.grid = parse_grid(grid_text);
    to.latent_draws = tune_draws;
    to.latent_sd = tune_sd;
    to.seed = seed;
    const TuneReport report = tune_basis_size(data, to);
    io::write_file_atomic(tune_out, tune_report_csv(report));
    std::cout << "chosen K = " << report.chosen_K << " (lowest mean AIC at K = " << report.argmin_K << ")\n";
    return kOk;
  }

  if (*summarize) {
    std::vector<McmcRun> runs;
    for (const auto& c : checkpoints) {
      require_file(c);
      runs.push_back(load_run(c));
    }
    fs::create_directories(sum_out);
    write_summaries(pooled(runs), sum_out, top, level);
    std::cout << "wrote " << sum_out << std::endl;
    return kOk;
  }

  if (*predict) {
    std::vector<McmcRun> runs;
    for (const auto& c : checkpoints) {
      require_file(c);
      runs.push_back(load_run(c));
    }
    require_file(edges);
    require_file(covariates);
    IngestOptions ingest;
    ingest.self_edges = self_edges;
    const ConnectomeDataset heldout = read_dataset(edges, covariates, ingest);
    const HeldoutPrediction pred = posterior_predict(pooled(runs), heldout, seed);
    const PredictionMetrics m = prediction_metrics(pred, heldout);
    std::ostringstream csv;
    csv << "length_mse,count_mean_loglik,length_entries,subjects\n"
        << io::format_double(m.length_mse) << ',' << io::format_double(m.count_mean_loglik) << ','
        << m.length_entries << ',' << heldout.n << '\n';
    io::write_file_atomic(pred_out, csv.str());
    std::cout << csv.str();
    return kOk;
  }
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kParse;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kConfig;
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kInvariant;
  } catch (const EvaluationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kEvaluation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kFailure;
  }
}
