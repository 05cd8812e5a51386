#include "bgcon/study.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "bgcon/errors.hpp"
#include "bgcon/inference.hpp"
#include "bgcon/io.hpp"

namespace bgcon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellResult {
  // Per method: estimates of the 15 families.
  std::vector<std::vector<Eigen::MatrixXd>> estimates;
  std::vector<StudyPredictionRow> prediction;
};

std::string context(int n, int replication) {
  return "study cell n=" + std::to_string(n) + ", replication=" + std::to_string(replication) + ": ";
}

}  // namespace

void StudyConfig::validate() const {
  if (J < 2) throw ConfigError("study J must be at least 2");
  if (n_list.empty()) throw ConfigError("study n_list is empty");
  for (int n : n_list) {
    if (n < 2 || (prediction && n < 4)) throw ConfigError("study sample sizes are too small");
  }
  if (replications < 1) throw ConfigError("study replications must be positive");
  if (methods.empty()) throw ConfigError("study needs at least one method");
  for (const auto& m : methods) {
    if (m != "bayes" && m != "ancova") throw ConfigError("unknown study method '" + m + "'");
  }
  if (!estimation && !prediction) throw ConfigError("study has neither estimation nor prediction");
  if (threads < 1) throw ConfigError("threads must be positive");
  hyper.validate();
  schedule.validate();
}

bool StudyConfig::has(const std::string& method) const {
  for (const auto& m : methods) {
    if (m == method) return true;
  }
  return false;
}

std::vector<Eigen::MatrixXd> posterior_mean_effects(const McmcRun& run) {
  if (run.draws.empty()) throw DomainError("no retained draws");
  std::vector<Eigen::MatrixXd> mean;
  for (const Draw& d : run.draws) {
    const auto m = reconstruct_effect_matrices(d.state, run.spec);
    if (mean.empty()) {
      mean = m;
    } else {
      for (std::size_t f = 0; f < m.size(); ++f) mean[f] += m[f];
    }
  }
  for (auto& m : mean) m /= static_cast<double>(run.draws.size());
  return mean;
}

StudyReport run_study(const StudyConfig& config, const StudyLog& log) {
  config.validate();
  StudyReport report;
  report.config = config;
  Rng truth_rng = make_stream(config.seed, 0, 0);
  const TruthSpec truth = make_truth(config.J, config.generator, truth_rng);

  ModelOptions model_options;
  model_options.random_effects = false;
  const ModelSpec spec = ModelSpec::make(config.hyper, model_options, 4);
  std::vector<std::string> methods;
  if (config.has("bayes")) methods.push_back("bayes");
  if (config.has("ancova")) methods.push_back("ancova");

  for (std::size_t ni = 0; ni < config.n_list.size(); ++ni) {
    const int n = config.n_list[ni];
    std::vector<CellResult> cells(config.replications);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= config.replications) return;
        try {
          Rng rng = make_stream(config.seed, 1 + ni, static_cast<std::uint64_t>(r));
          const ConnectomeDataset data = generate_observations(truth, n, rng);
          CellResult& cell = cells[r];
          Schedule schedule = config.schedule;
          schedule.chain = 1000 * (ni + 1) + 2 * r;
          if (config.estimation) {
            for (const auto& m : methods) {
              if (m == "bayes") {
                const McmcRun run = run_chain(data, spec, schedule, config.chain);
                cell.estimates.push_back(posterior_mean_effects(run));
              } else {
                cell.estimates.push_back(ancova_fit(data).effect_matrices());
              }
            }
          }
          if (config.prediction) {
            std::vector<int> first, second;
            for (int i = 0; i < n; ++i) (i < n / 2 ? first : second).push_back(i);
            const ConnectomeDataset train = data.subset(first);
            const ConnectomeDataset test = data.subset(second);
            std::vector<HeldoutPrediction> preds;
            for (const auto& m : methods) {
              if (m == "bayes") {
                Schedule s2 = schedule;
                s2.chain += 1;
                const McmcRun run = run_chain(train, spec, s2, config.chain);
                preds.push_back(posterior_predict(run, test, config.seed));
              } else {
                preds.push_back(ancova_predict(ancova_fit(train), test));
              }
            }
            if (preds.size() == 2) common_support(preds[0], preds[1]);
            for (std::size_t k = 0; k < preds.size(); ++k) {
              cell.prediction.push_back({n, r, methods[k], prediction_metrics(preds[k], test)});
            }
          }
          if (log) log(context(n, r) + "done");
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) {
            try {
              throw EvaluationError("study", context(n, r) + e.what());
            } catch (...) {
              failure = std::current_exception();
            }
          }
          next = config.replications;
        }
      }
    };
    const int workers = std::min(config.threads, config.replications);
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    if (config.estimation) {
      const std::vector<std::string> covariates{"mci", "ad", "male", "age"};
      for (std::size_t k = 0; k < methods.size(); ++k) {
        for (int f = 0; f < spec.families(); ++f) {
          Eigen::MatrixXd target = truth.effects[f];
          for (int j = 0; j < config.J; ++j) {
            for (int c = 0; c <= j; ++c) target(j, c) = kNaN;
          }
          std::vector<Eigen::MatrixXd> est;
          for (const auto& cell : cells) est.push_back(cell.estimates[k][f]);
          AccuracyCell acc;
          try {
            acc = accuracy(est, target);
          } catch (const DomainError&) {
            acc = {kNaN, kNaN, kNaN, 0};
          }
          report.accuracy.push_back({n, family_name(f, spec, covariates), methods[k], acc});
        }
      }
    }
    for (const auto& cell : cells) {
      report.prediction.insert(report.prediction.end(), cell.prediction.begin(), cell.prediction.end());
    }
  }
  return report;
}

std::string study_accuracy_csv(const StudyReport& report, int n) {
  std::vector<AccuracyRow> rows;
  for (const auto& r : report.accuracy) {
    if (r.n == n) rows.push_back({r.family, r.method, r.cell});
  }
  return accuracy_csv(rows);
}

std::string study_prediction_csv(const StudyReport& report) {
  std::ostringstream out;
  out << "n,replication,method,length_mse,count_mean_loglik\n";
  for (const auto& r : report.prediction) {
    out << r.n << ',' << r.replication << ',' << r.method << ','
        << io::format_double(r.metrics.length_mse) << ','
        << io::format_double(r.metrics.count_mean_loglik) << '\n';
  }
  return out.str();
}

std::string study_markdown(const StudyReport& report) {
  const StudyConfig& c = report.config;
  std::vector<std::string> methods;
  for (const auto& m : {"bayes", "ancova"}) {
    if (c.has(m)) methods.push_back(m);
  }
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "# Simulation study\n\nJ = " << c.J << ", replications = " << c.replications
      << ", seed = " << c.seed << ", MCMC " << c.schedule.burn_in << " + " << c.schedule.samples
      << ", K = " << c.hyper.K << ".\n";
  for (int n : c.n_list) {
    if (!report.accuracy.empty()) {
      out << "\n## Estimation accuracy, n = " << n << " (x 1e-2)\n\n| family |";
      for (const auto& m : methods) out << ' ' << m << " bias2 | " << m << " var | " << m << " MSE |";
      out << "\n|---|";
      for (std::size_t k = 0; k < methods.size(); ++k) out << "---|---|---|";
      out << '\n';
      std::vector<std::string> families;
      for (const auto& r : report.accuracy) {
        if (r.n == n && r.method == methods[0]) families.push_back(r.family);
      }
      for (const auto& fam : families) {
        out << "| " << fam << " |";
        for (const auto& m : methods) {
          for (const auto& r : report.accuracy) {
            if (r.n == n && r.family == fam && r.method == m) {
              out << ' ' << 100.0 * r.cell.bias2 << " | " << 100.0 * r.cell.variance << " | "
                  << 100.0 * r.cell.mse << " |";
            }
          }
        }
        out << '\n';
      }
    }
    if (!report.prediction.empty()) {
      out << "\n## Prediction, n = " << n << " (first half fitted, second half held out)\n\n"
          << "| method | length MSE | count mean log-lik | replications |\n|---|---|---|---|\n";
      for (const auto& m : methods) {
        double mse = 0.0, ll = 0.0;
        int count = 0;
        for (const auto& r : report.prediction) {
          if (r.n == n && r.method == m) {
            mse += r.metrics.length_mse;
            ll += r.metrics.count_mean_loglik;
            ++count;
          }
        }
        if (count > 0) out << "| " << m << " | " << mse / count << " | " << ll / count << " | " << count << " |\n";
      }
    }
  }
  return out.str();
}

void write_study(const StudyReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  if (!report.accuracy.empty()) {
    for (int n : report.config.n_list) {
      io::write_file_atomic((base / ("accuracy_n" + std::to_string(n) + ".csv")).string(),
                            study_accuracy_csv(report, n));
    }
  }
  if (!report.prediction.empty()) {
    io::write_file_atomic((base / "prediction.csv").string(), study_prediction_csv(report));
  }
  io::write_file_atomic((base / "report.md").string(), study_markdown(report));
}

}  // namespace bgcon
