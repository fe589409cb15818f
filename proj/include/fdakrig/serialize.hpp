#pragma once

#include <json.hpp>

#include "fdakrig/kriging.hpp"
#include "fdakrig/marginal_cov.hpp"
#include "fdakrig/mean_field.hpp"
#include "fdakrig/score_model.hpp"

namespace fdakrig {

using Json = nlohmann::json;

/// Version tag written into every persisted object.
inline constexpr int kSchemaVersion = 1;

Json toJson(const Eigen::VectorXd& v);
Json toJson(const Eigen::MatrixXd& m);
Eigen::VectorXd vectorFromJson(const Json& j);
Eigen::MatrixXd matrixFromJson(const Json& j);

Json toJson(const BasisSystem& b);
BasisSystem basisFromJson(const Json& j);

Json toJson(const MeanFit& f);
MeanFit meanFitFromJson(const Json& j);

Json toJson(const FpcBasis& f);
FpcBasis fpcsFromJson(const Json& j);

/// Selection summary of a covariance fit (the coefficient surface included).
Json toJson(const MarginalCovFit& f);
MarginalCovFit covFitFromJson(const Json& j);

Json toJson(const MeasurementErrorFit& f);
MeasurementErrorFit kappaFromJson(const Json& j);

Json toJson(const MaternParams& p);
MaternParams maternFromJson(const Json& j);

Json toJson(const DecorrelationTransform& t);
DecorrelationTransform transformFromJson(const Json& j);

Json toJson(const SpatialFieldModel& m);
SpatialFieldModel modelFromJson(const Json& j);

/// Theta and the lower triangle of Sigma, row by row.
Json toJson(const ConditionalScoreDist& d);
ConditionalScoreDist scoreDistFromJson(const Json& j);

}  // namespace fdakrig
