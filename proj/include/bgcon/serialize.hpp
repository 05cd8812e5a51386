#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "bgcon/model.hpp"

namespace bgcon {

using Json = nlohmann::json;

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);
/// Row-major nested arrays.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

void to_json(Json& j, const Hyperparams& h);
void from_json(const Json& j, Hyperparams& h);
void to_json(Json& j, const ModelOptions& o);
void from_json(const Json& j, ModelOptions& o);
void to_json(Json& j, const ModelSpec& spec);
void from_json(const Json& j, ModelSpec& spec);
void to_json(Json& j, const ModelState& s);
void from_json(const Json& j, ModelState& s);

std::string delta_prior_name(DeltaPrior p);
/// Throws ConfigError on an unknown name.
DeltaPrior parse_delta_prior(const std::string& name);

}  // namespace bgcon
