#include "bgcon/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "bgcon/errors.hpp"
#include "bgcon/glm.hpp"
#include "bgcon/io.hpp"
#include "bgcon/serialize.hpp"
#include "bgcon/stats.hpp"

namespace bgcon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Memory budget for buffered effect draws (doubles).
constexpr std::size_t kSampleBudget = std::size_t{32} << 20;

}  // namespace

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

IntervalSummary summarize_sample(std::vector<double> values, double level) {
  if (values.empty()) throw DomainError("empty posterior sample");
  IntervalSummary s;
  double sum = 0.0;
  long above = 0, below = 0;
  for (double v : values) {
    sum += v;
    above += v > 0.0;
    below += v < 0.0;
  }
  const double S = static_cast<double>(values.size());
  s.mean = sum / S;
  std::sort(values.begin(), values.end());
  s.lo = sorted_quantile(values, 0.5 * (1.0 - level));
  s.hi = sorted_quantile(values, 0.5 * (1.0 + level));
  s.interval_len = s.hi - s.lo;
  s.tail_prob = std::max(above, below) / S;
  s.significant = s.lo > 0.0 || s.hi < 0.0;
  return s;
}

EffectSummary summarize_effect_samples(const std::vector<Eigen::MatrixXd>& samples,
                                       const std::vector<Edge>& edges,
                                       std::vector<std::string> family_names,
                                       std::vector<std::string> region_names, double level) {
  EffectSummary out;
  out.family_names = std::move(family_names);
  out.region_names = std::move(region_names);
  out.level = level;
  const int E = static_cast<int>(edges.size());
  std::vector<double> column;
  for (std::size_t f = 0; f < samples.size(); ++f) {
    if (samples[f].cols() != E) throw DomainError("effect sample width differs from the edge count");
    if (samples[f].rows() < 2) throw DomainError("summaries need at least two draws");
    std::vector<EffectRow> rows(E);
    for (int e = 0; e < E; ++e) {
      column.assign(samples[f].col(e).data(), samples[f].col(e).data() + samples[f].rows());
      rows[e].family = static_cast<int>(f);
      rows[e].edge = e;
      rows[e].a = edges[e].a;
      rows[e].b = edges[e].b;
      rows[e].summary = summarize_sample(column, level);
    }
    std::vector<int> order(E);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      const auto& sx = rows[x].summary;
      const auto& sy = rows[y].summary;
      if (sx.tail_prob != sy.tail_prob) return sx.tail_prob > sy.tail_prob;
      if (sx.interval_len != sy.interval_len) return sx.interval_len < sy.interval_len;
      return x < y;
    });
    for (int r = 0; r < E; ++r) rows[order[r]].rank = r + 1;
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  return out;
}

EffectSummary summarize_effects(const McmcRun& run, double level) {
  const int S = static_cast<int>(run.draws.size());
  if (S < 2) throw DomainError("summaries need at least two retained draws");
  const ModelSpec& spec = run.spec;
  const ConnectomeDataset layout = ConnectomeDataset::empty(0, run.J, spec.d, run.self_edges);
  const int E = layout.edges();
  const int F = spec.families();
  std::vector<std::string> names;
  for (int f = 0; f < F; ++f) names.push_back(family_name(f, spec, run.covariate_names));

  // Families are processed in groups so the buffered draws stay within budget.
  const std::size_t per_family = static_cast<std::size_t>(S) * static_cast<std::size_t>(E);
  const int group = static_cast<int>(std::clamp<std::size_t>(kSampleBudget / std::max<std::size_t>(per_family, 1), 1, F));
  EffectSummary out;
  for (int first = 0; first < F; first += group) {
    const int last = std::min(F, first + group);
    std::vector<Eigen::MatrixXd> samples(last - first, Eigen::MatrixXd(S, E));
    for (int s = 0; s < S; ++s) {
      const EdgeTerms terms = compute_edge_terms(run.draws[s].state, layout, spec);
      for (int f = first; f < last; ++f) samples[f - first].row(s) = terms.values.col(f).transpose();
    }
    std::vector<std::string> group_names(names.begin() + first, names.begin() + last);
    EffectSummary part = summarize_effect_samples(samples, layout.edge_list, group_names,
                                                  run.region_names, level);
    for (auto& row : part.rows) row.family += first;
    out.rows.insert(out.rows.end(), part.rows.begin(), part.rows.end());
  }
  out.family_names = names;
  out.region_names = run.region_names;
  out.level = level;
  return out;
}

std::string effect_summary_csv(const EffectSummary& summary, int top) {
  std::vector<const EffectRow*> rows;
  for (const auto& r : summary.rows) {
    if (top <= 0 || r.rank <= top) rows.push_back(&r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const EffectRow* x, const EffectRow* y) {
    if (x->family != y->family) return x->family < y->family;
    return x->rank < y->rank;
  });
  std::ostringstream out;
  out << "family,region_a,region_b,mean,lo,hi,tail_prob,interval_len,rank\n";
  for (const EffectRow* r : rows) {
    const auto& s = r->summary;
    out << summary.family_names[r->family] << ',' << summary.region_names[r->a] << ','
        << summary.region_names[r->b] << ',' << io::format_double(s.mean) << ','
        << io::format_double(s.lo) << ',' << io::format_double(s.hi) << ','
        << io::format_double(s.tail_prob) << ',' << io::format_double(s.interval_len) << ','
        << r->rank << '\n';
  }
  return out.str();
}

std::string edge_plot_json(const EffectSummary& summary) {
  Json doc;
  const int J = static_cast<int>(summary.region_names.size());
  Json regions = Json::array();
  for (int j = 0; j < J; ++j) {
    const double angle = 2.0 * M_PI * j / std::max(J, 1);
    regions.push_back({{"name", summary.region_names[j]},
                       {"angle", angle},
                       {"x", std::cos(angle)},
                       {"y", std::sin(angle)}});
  }
  doc["regions"] = regions;
  doc["level"] = summary.level;
  Json families = Json::object();
  for (const auto& name : summary.family_names) families[name] = Json::array();
  std::vector<const EffectRow*> rows;
  for (const auto& r : summary.rows) {
    if (r.summary.significant) rows.push_back(&r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const EffectRow* x, const EffectRow* y) {
    if (x->family != y->family) return x->family < y->family;
    return x->rank < y->rank;
  });
  for (const EffectRow* r : rows) {
    families[summary.family_names[r->family]].push_back({{"a", summary.region_names[r->a]},
                                                         {"b", summary.region_names[r->b]},
                                                         {"mean", r->summary.mean},
                                                         {"tail_prob", r->summary.tail_prob},
                                                         {"rank", r->rank}});
  }
  doc["significant_edges"] = families;
  return doc.dump(2) + "\n";
}

double graphon_aic(const ConnectomeDataset& data, const BasisConfig& basis,
                   const Eigen::VectorXd& xi, const Eigen::VectorXd& delta) {
  const int K = basis.K;
  const int P = upper_size(K);
  const int E = data.edges();
  const int n = data.n;
  Eigen::MatrixXd basis_xi(K, data.J), basis_delta(K, data.J);
  for (int j = 0; j < data.J; ++j) {
    basis_xi.col(j) = bspline_basis(xi[j], basis);
    basis_delta.col(j) = bspline_basis(delta[j], basis);
  }
  Eigen::MatrixXd fx(P, E), fd(P, E);
  for (int e = 0; e < E; ++e) {
    const Edge& edge = data.edge_list[e];
    symmetric_features(basis_xi.col(edge.a), basis_xi.col(edge.b), fx.col(e));
    symmetric_features(basis_delta.col(edge.a), basis_delta.col(edge.b), fd.col(e));
  }
  const glm::GraphonDesign design(fx, fd, data.Z);
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * E;
  Eigen::VectorXd y_len(rows), w_len(rows), y_pres(rows), y_count(rows), w_count(rows);
  for (Eigen::Index o = 0; o < rows; ++o) {
    const bool seen = data.counts[o] >= 1;
    y_len[o] = seen ? data.log_lengths[o] : 0.0;
    w_len[o] = seen ? static_cast<double>(data.counts[o]) : 0.0;
    y_pres[o] = seen ? 1.0 : 0.0;
    y_count[o] = static_cast<double>(data.counts[o]);
    w_count[o] = seen ? 1.0 : 0.0;
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(rows);
  const Eigen::VectorXd all = Eigen::VectorXd::Ones(rows);
  glm::IrlsOptions opt;
  opt.drop_aliased = true;
  opt.rank_tolerance = 1e-10;
  double aic = 0.0;
  for (const glm::FitResult& r : {glm::wls(design, y_len, w_len, zero, opt),
                                  glm::probit_irls(design, y_pres, all, zero, opt),
                                  glm::poisson_irls(design, y_count, w_count, zero, opt)}) {
    if (!r.converged || r.rank_deficient || !std::isfinite(r.loglik)) return kNaN;
    aic += 2.0 * static_cast<double>(r.rank) - 2.0 * r.loglik;
  }
  return aic;
}

TuneReport tune_basis_size(const ConnectomeDataset& data, const TuneOptions& options) {
  if (data.n == 0 || data.edges() == 0) throw DomainError("tuning needs a nonempty dataset");
  if (options.grid.empty()) throw ConfigError("empty basis-size grid");
  if (options.latent_draws < 1) throw ConfigError("latent_draws must be positive");
  TuneReport report;
  report.grid = options.grid;
  const int G = static_cast<int>(options.grid.size());
  const int R = options.latent_draws;
  report.aic = Eigen::MatrixXd::Constant(G, R, kNaN);
  report.mean_aic = Eigen::VectorXd::Constant(G, kNaN);
  report.used_draws.assign(G, 0);
  for (int g = 0; g < G; ++g) {
    const BasisConfig basis = BasisConfig::uniform(options.grid[g], options.degree);
    double sum = 0.0;
    for (int r = 0; r < R; ++r) {
      Rng rng = make_stream(options.seed, 1000 + static_cast<std::uint64_t>(options.grid[g]),
                            static_cast<std::uint64_t>(r));
      Eigen::VectorXd xi(data.J), delta(data.J);
      for (int j = 0; j < data.J; ++j) xi[j] = stats::inv_logit(options.latent_sd * stats::draw_normal(rng));
      for (int j = 0; j < data.J; ++j) delta[j] = stats::inv_logit(options.latent_sd * stats::draw_normal(rng));
      report.aic(g, r) = graphon_aic(data, basis, xi, delta);
      if (std::isfinite(report.aic(g, r))) {
        sum += report.aic(g, r);
        ++report.used_draws[g];
      }
    }
    if (report.used_draws[g] > 0) report.mean_aic[g] = sum / report.used_draws[g];
  }
  int best = -1;
  for (int g = 0; g < G; ++g) {
    if (std::isfinite(report.mean_aic[g]) && (best < 0 || report.mean_aic[g] < report.mean_aic[best])) {
      best = g;
    }
  }
  if (best < 0) throw DomainError("no basis size produced a finite AIC");
  report.argmin_K = options.grid[best];
  report.chosen_K = knee_choice(options.grid, report.mean_aic, options.knee);
  return report;
}

int knee_choice(const std::vector<int>& grid, const Eigen::VectorXd& mean_aic, double knee) {
  const int G = static_cast<int>(grid.size());
  if (mean_aic.size() != G) throw DomainError("AIC vector and grid differ in length");
  std::vector<int> order;
  for (int g = 0; g < G; ++g) {
    if (std::isfinite(mean_aic[g])) order.push_back(g);
  }
  if (order.empty()) throw DomainError("no basis size produced a finite AIC");
  std::sort(order.begin(), order.end(), [&](int x, int y) { return grid[x] < grid[y]; });
  for (std::size_t x = 0; x < order.size(); ++x) {
    const double base = mean_aic[order[x]];
    bool flat = true;
    for (std::size_t y = x + 1; y < order.size() && flat; ++y) {
      flat = (base - mean_aic[order[y]]) / std::abs(base) < knee;
    }
    if (flat) return grid[order[x]];
  }
  return grid[order.back()];
}

std::string tune_report_csv(const TuneReport& report) {
  std::ostringstream out;
  out << "K,mean_aic,used_draws,chosen\n";
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    out << report.grid[g] << ',' << io::format_double(report.mean_aic[static_cast<Eigen::Index>(g)])
        << ',' << report.used_draws[g] << ',' << (report.grid[g] == report.chosen_K ? 1 : 0) << '\n';
  }
  return out.str();
}

namespace {

// Random effect of a new subject from the DP mixture of draw `s`.
double draw_new_random_effect(const ModelState& s, int channel, const Hyperparams& h, Rng& rng) {
  std::map<int, std::pair<int, double>> clusters;
  for (int i = 0; i < s.n; ++i) {
    auto& c = clusters[s.cluster[channel][i]];
    ++c.first;
    c.second = s.tau2(channel, i);
  }
  double u = stats::draw_uniform(rng) * (s.n + s.alpha[channel]);
  double tau2 = kNaN;
  for (const auto& [label, c] : clusters) {
    u -= c.first;
    if (u < 0.0) {
      tau2 = c.second;
      break;
    }
  }
  if (std::isnan(tau2)) tau2 = stats::draw_inverse_gamma(h.b1, h.b2, rng);
  return std::sqrt(tau2) * stats::draw_normal(rng);
}

}  // namespace

HeldoutPrediction posterior_predict(const McmcRun& run, const ConnectomeDataset& heldout,
                                    std::uint64_t seed) {
  if (heldout.J != run.J || heldout.self_edges != run.self_edges ||
      (!run.region_names.empty() && heldout.region_names != run.region_names)) {
    throw InvariantError("held-out regions differ from the fitted run");
  }
  if (heldout.covariates() != run.spec.d) {
    throw InvariantError("held-out covariate count differs from the fitted run");
  }
  if (run.draws.empty()) throw DomainError("prediction needs at least one retained draw");
  const int n = heldout.n, E = heldout.edges();
  const int S = static_cast<int>(run.draws.size());
  HeldoutPrediction out;
  out.mean_log_length = Eigen::MatrixXd::Zero(n, E);
  out.count_log_prob = Eigen::MatrixXd::Constant(n, E, -std::numeric_limits<double>::infinity());
  for (int s = 0; s < S; ++s) {
    ModelState state = run.draws[s].state;
    state.n = n;
    state.eta = Eigen::MatrixXd::Zero(kChannels, n);
    if (run.spec.options.random_effects) {
      Rng rng = make_stream(seed, 11, static_cast<std::uint64_t>(s));
      for (int i = 0; i < n; ++i) {
        for (int t = 0; t < kChannels; ++t) {
          state.eta(t, i) = draw_new_random_effect(run.draws[s].state, t, run.spec.hyper, rng);
        }
      }
    }
    const EdgeTerms terms = compute_edge_terms(state, heldout, run.spec);
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < E; ++e) {
        const double mu = linear_predictor(terms, state, heldout, kLength, i, e);
        const double pi = linear_predictor(terms, state, heldout, kPresence, i, e);
        const double lambda = linear_predictor(terms, state, heldout, kCount, i, e);
        out.mean_log_length(i, e) += mu;
        out.count_log_prob(i, e) = stats::log_add_exp(
            out.count_log_prob(i, e), zip_log_pmf(heldout.counts[heldout.obs(i, e)], pi, lambda));
      }
    }
  }
  out.mean_log_length /= S;
  out.count_log_prob.array() -= std::log(static_cast<double>(S));
  return out;
}

HeldoutPrediction ancova_predict(const AncovaFit& fit, const ConnectomeDataset& heldout) {
  if (heldout.J != fit.J || heldout.edge_list.size() != fit.edge_list.size()) {
    throw InvariantError("held-out regions differ from the ANCOVA fit");
  }
  const int n = heldout.n, E = heldout.edges(), d = fit.d;
  HeldoutPrediction out;
  out.mean_log_length = Eigen::MatrixXd::Constant(n, E, kNaN);
  out.count_log_prob = Eigen::MatrixXd::Constant(n, E, kNaN);
  Eigen::VectorXd x(1 + d);
  for (int i = 0; i < n; ++i) {
    x[0] = 1.0;
    x.tail(d) = heldout.Z.row(i).transpose();
    for (int e = 0; e < E; ++e) {
      if (fit.ok[kLength][e]) out.mean_log_length(i, e) = fit.estimates[kLength].row(e).dot(x);
      if (fit.ok[kPresence][e] && fit.ok[kCount][e]) {
        out.count_log_prob(i, e) = zip_log_pmf(heldout.counts[heldout.obs(i, e)],
                                               fit.estimates[kPresence].row(e).dot(x),
                                               fit.estimates[kCount].row(e).dot(x));
      }
    }
  }
  return out;
}

}  // namespace bgcon
