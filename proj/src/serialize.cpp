#include "fdakrig/serialize.hpp"

#include "fdakrig/errors.hpp"

namespace fdakrig {
namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  return j.at(key);
}

Variable variableFromName(const std::string& s) {
  if (s == "temperature") return Variable::Temperature;
  if (s == "salinity") return Variable::Salinity;
  throw ParseError("unknown variable '" + s + "'");
}

Json point(const GeoPoint& p) { return Json{{"lon", p.lon}, {"lat", p.lat}}; }
GeoPoint pointFromJson(const Json& j) { return {field(j, "lon").get<double>(), field(j, "lat").get<double>()}; }

}  // namespace

Json toJson(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json toJson(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

Eigen::VectorXd vectorFromJson(const Json& j) {
  if (!j.is_array()) throw ParseError("expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrixFromJson(const Json& j) {
  if (!j.is_array()) throw ParseError("expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json toJson(const BasisSystem& b) { return Json{{"order", b.order()}, {"breakpoints", b.breakpoints()}}; }

BasisSystem basisFromJson(const Json& j) {
  return BasisSystem(field(j, "breakpoints").get<std::vector<double>>(), field(j, "order").get<int>());
}

Json toJson(const MeanFit& f) {
  return Json{{"schema", kSchemaVersion},
              {"center", point(f.center)},
              {"day0", f.day0},
              {"variable", variableName(f.variable)},
              {"basis", toJson(f.basis)},
              {"years", f.years},
              {"coefficients", toJson(f.coefficients)},
              {"a", f.a},
              {"gcv", f.gcv},
              {"trace", f.trace},
              {"n_used", f.n_used},
              {"h_s", f.h_s}};
}

MeanFit meanFitFromJson(const Json& j) {
  MeanFit f;
  f.center = pointFromJson(field(j, "center"));
  f.day0 = field(j, "day0").get<double>();
  f.variable = variableFromName(field(j, "variable").get<std::string>());
  f.basis = basisFromJson(field(j, "basis"));
  f.years = field(j, "years").get<std::vector<int>>();
  f.coefficients = matrixFromJson(field(j, "coefficients"));
  f.a = field(j, "a").get<double>();
  f.gcv = field(j, "gcv").get<double>();
  f.trace = field(j, "trace").get<double>();
  f.n_used = field(j, "n_used").get<int>();
  f.h_s = field(j, "h_s").get<double>();
  return f;
}

Json toJson(const FpcBasis& f) {
  return Json{{"variable", variableName(f.variable)},
              {"basis", toJson(f.basis)},
              {"coeffs", toJson(f.coeffs)},
              {"eigenvalues", toJson(f.eigenvalues)}};
}

FpcBasis fpcsFromJson(const Json& j) {
  FpcBasis f;
  f.variable = variableFromName(field(j, "variable").get<std::string>());
  f.basis = basisFromJson(field(j, "basis"));
  f.coeffs = matrixFromJson(field(j, "coeffs"));
  f.eigenvalues = vectorFromJson(field(j, "eigenvalues"));
  if (f.coeffs.rows() > 0 && f.coeffs.cols() != f.basis.size()) throw ParseError("FPC coefficients do not fit the basis");
  return f;
}

Json toJson(const MarginalCovFit& f) {
  return Json{{"schema", kSchemaVersion},
              {"center", point(f.center)},
              {"day0", f.day0},
              {"variable", variableName(f.variable)},
              {"basis", toJson(f.basis)},
              {"alpha", toJson(f.alpha)},
              {"lambda", f.lambda},
              {"gcv", f.gcv},
              {"cv", f.cv},
              {"trace", f.trace},
              {"n_used", f.n_used},
              {"n_pairs", f.n_pairs}};
}

MarginalCovFit covFitFromJson(const Json& j) {
  MarginalCovFit f;
  f.center = pointFromJson(field(j, "center"));
  f.day0 = field(j, "day0").get<double>();
  f.variable = variableFromName(field(j, "variable").get<std::string>());
  f.basis = basisFromJson(field(j, "basis"));
  f.alpha = matrixFromJson(field(j, "alpha"));
  f.lambda = field(j, "lambda").get<double>();
  f.gcv = field(j, "gcv").get<double>();
  f.cv = field(j, "cv").get<double>();
  f.trace = field(j, "trace").get<double>();
  f.n_used = field(j, "n_used").get<int>();
  f.n_pairs = field(j, "n_pairs").get<long>();
  return f;
}

Json toJson(const MeasurementErrorFit& f) {
  return Json{{"schema", kSchemaVersion},
              {"basis", toJson(f.basis)},
              {"beta", toJson(f.beta)},
              {"factor", f.factor},
              {"lambda", f.lambda},
              {"trace", f.trace},
              {"clamped", f.clamped}};
}

MeasurementErrorFit kappaFromJson(const Json& j) {
  MeasurementErrorFit f;
  f.basis = basisFromJson(field(j, "basis"));
  f.beta = vectorFromJson(field(j, "beta"));
  f.factor = field(j, "factor").get<double>();
  f.lambda = field(j, "lambda").get<double>();
  f.trace = field(j, "trace").get<double>();
  f.clamped = field(j, "clamped").get<int>();
  if (f.beta.size() != f.basis.size()) throw ParseError("measurement-error coefficients do not fit the basis");
  return f;
}

Json toJson(const MaternParams& p) {
  return Json{{"gamma", p.gamma},
              {"theta_s1", p.theta_s1},
              {"theta_s2", p.theta_s2},
              {"theta_d", p.theta_d},
              {"sigma2", p.sigma2}};
}

MaternParams maternFromJson(const Json& j) {
  return MaternParams{field(j, "gamma").get<double>(), field(j, "theta_s1").get<double>(),
                      field(j, "theta_s2").get<double>(), field(j, "theta_d").get<double>(),
                      field(j, "sigma2").get<double>()};
}

Json toJson(const DecorrelationTransform& t) {
  return Json{{"K1", t.K1}, {"K2", t.K2}, {"V", toJson(t.V)}, {"gamma", toJson(t.gamma)}};
}

DecorrelationTransform transformFromJson(const Json& j) {
  DecorrelationTransform t;
  t.K1 = field(j, "K1").get<int>();
  t.K2 = field(j, "K2").get<int>();
  t.V = matrixFromJson(field(j, "V"));
  t.gamma = vectorFromJson(field(j, "gamma"));
  if (t.V.rows() != t.size() || t.V.cols() != t.size()) throw ParseError("transform has the wrong size");
  return t;
}

Json toJson(const SpatialFieldModel& m) {
  Json params = Json::array();
  for (const auto& p : m.params) params.push_back(toJson(p));
  return Json{{"schema", kSchemaVersion},
              {"center", point(m.center)},
              {"nu", m.nu},
              {"fpcsT", toJson(m.fpcsT)},
              {"fpcsS", toJson(m.fpcsS)},
              {"transform", toJson(m.transform)},
              {"params", params}};
}

SpatialFieldModel modelFromJson(const Json& j) {
  SpatialFieldModel m;
  m.center = pointFromJson(field(j, "center"));
  m.nu = field(j, "nu").get<double>();
  m.fpcsT = fpcsFromJson(field(j, "fpcsT"));
  m.fpcsS = fpcsFromJson(field(j, "fpcsS"));
  m.transform = transformFromJson(field(j, "transform"));
  for (const auto& p : field(j, "params")) m.params.push_back(maternFromJson(p));
  if (static_cast<int>(m.params.size()) != m.transform.size()) throw ParseError("one Matern parameter set per component");
  return m;
}

Json toJson(const ConditionalScoreDist& d) {
  Json lower = Json::array();
  for (Eigen::Index r = 0; r < d.Sigma.rows(); ++r)
    for (Eigen::Index c = 0; c <= r; ++c) lower.push_back(d.Sigma(r, c));
  return Json{{"K1", d.K1}, {"K2", d.K2}, {"theta", toJson(d.theta)}, {"sigma_lower", lower}};
}

ConditionalScoreDist scoreDistFromJson(const Json& j) {
  ConditionalScoreDist d;
  d.K1 = field(j, "K1").get<int>();
  d.K2 = field(j, "K2").get<int>();
  d.theta = vectorFromJson(field(j, "theta"));
  const int K = d.K1 + d.K2;
  const Json& lower = field(j, "sigma_lower");
  if (d.theta.size() != K || static_cast<int>(lower.size()) != K * (K + 1) / 2)
    throw ParseError("score distribution has the wrong size");
  d.Sigma.resize(K, K);
  std::size_t i = 0;
  for (int r = 0; r < K; ++r)
    for (int c = 0; c <= r; ++c) d.Sigma(r, c) = d.Sigma(c, r) = lower[i++].get<double>();
  return d;
}

}  // namespace fdakrig
