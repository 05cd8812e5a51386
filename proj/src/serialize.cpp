#include "bgcon/serialize.hpp"

#include "bgcon/errors.hpp"

namespace bgcon {

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index c = 0; c < v.size(); ++c) out.push_back(v[c]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) v[static_cast<Eigen::Index>(c)] = j[c].get<double>();
  return v;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = vector_from_json(j[r]).transpose();
  return m;
}

void to_json(Json& j, const Hyperparams& h) {
  j = Json{{"a", h.a},   {"M", h.M},   {"q", h.q},   {"b1", h.b1}, {"b2", h.b2}, {"c1", h.c1},
           {"c2", h.c2}, {"d1", h.d1}, {"d2", h.d2}, {"K", h.K},   {"degree", h.degree}};
}

void from_json(const Json& j, Hyperparams& h) {
  h.a = j.at("a");
  h.M = j.at("M");
  h.q = j.at("q");
  h.b1 = j.at("b1");
  h.b2 = j.at("b2");
  h.c1 = j.at("c1");
  h.c2 = j.at("c2");
  h.d1 = j.at("d1");
  h.d2 = j.at("d2");
  h.K = j.at("K");
  h.degree = j.at("degree");
}

std::string delta_prior_name(DeltaPrior p) {
  return p == DeltaPrior::beta_mixture ? "beta_mixture" : "logit_normal";
}

DeltaPrior parse_delta_prior(const std::string& name) {
  if (name == "beta_mixture") return DeltaPrior::beta_mixture;
  if (name == "logit_normal") return DeltaPrior::logit_normal;
  throw ConfigError("unknown latent prior '" + name + "' (expected beta_mixture or logit_normal)");
}

void to_json(Json& j, const ModelOptions& o) {
  j = Json{{"random_effects", o.random_effects}, {"delta_prior", delta_prior_name(o.delta_prior)}};
}

void from_json(const Json& j, ModelOptions& o) {
  o.random_effects = j.at("random_effects");
  o.delta_prior = parse_delta_prior(j.at("delta_prior"));
}

void to_json(Json& j, const ModelSpec& spec) {
  j = Json{{"hyper", spec.hyper}, {"options", spec.options}, {"d", spec.d}};
}

void from_json(const Json& j, ModelSpec& spec) {
  spec = ModelSpec::make(j.at("hyper").get<Hyperparams>(), j.at("options").get<ModelOptions>(),
                         j.at("d").get<int>());
}

void to_json(Json& j, const ModelState& s) {
  Json theta = Json::array(), gamma = Json::array(), cluster = Json::array();
  for (int t = 0; t < kChannels; ++t) {
    theta.push_back(vector_to_json(s.theta[t].upper()));
    Json g = Json::array();
    for (const auto& c : s.gamma[t]) g.push_back(vector_to_json(c.upper()));
    gamma.push_back(g);
    cluster.push_back(s.cluster[t]);
  }
  j = Json{{"K", s.K},
           {"d", s.d},
           {"J", s.J},
           {"n", s.n},
           {"theta", theta},
           {"gamma", gamma},
           {"xi", vector_to_json(s.xi)},
           {"delta", vector_to_json(s.delta)},
           {"indicator", s.indicator},
           {"eta", matrix_to_json(s.eta)},
           {"tau2", matrix_to_json(s.tau2)},
           {"cluster", cluster},
           {"alpha", s.alpha},
           {"sigma2", s.sigma2},
           {"inflation", s.inflation}};
}

void from_json(const Json& j, ModelState& s) {
  s.K = j.at("K");
  s.d = j.at("d");
  s.J = j.at("J");
  s.n = j.at("n");
  for (int t = 0; t < kChannels; ++t) {
    s.theta[t] = SymmetricCoeffMatrix(s.K, vector_from_json(j.at("theta")[t]));
    s.gamma[t].clear();
    for (const auto& g : j.at("gamma")[t]) s.gamma[t].emplace_back(s.K, vector_from_json(g));
    s.cluster[t] = j.at("cluster")[t].get<std::vector<int>>();
  }
  s.xi = vector_from_json(j.at("xi"));
  s.delta = vector_from_json(j.at("delta"));
  s.indicator = j.at("indicator").get<std::vector<std::uint8_t>>();
  s.eta = matrix_from_json(j.at("eta"));
  s.tau2 = matrix_from_json(j.at("tau2"));
  if (s.n == 0) {
    s.eta.resize(kChannels, 0);
    s.tau2.resize(kChannels, 0);
  }
  s.alpha = j.at("alpha").get<std::array<double, kChannels>>();
  s.sigma2 = j.at("sigma2");
  s.inflation = j.at("inflation").get<std::vector<std::uint8_t>>();
}

}  // namespace bgcon
