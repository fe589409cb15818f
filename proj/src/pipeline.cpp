#include "fdakrig/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "fdakrig/errors.hpp"
#include "fdakrig/io.hpp"
#include "fdakrig/locality.hpp"
#include "fdakrig/log.hpp"
#include "fdakrig/rng.hpp"

namespace fdakrig {
namespace {

constexpr Stage kStages[] = {Stage::Mean, Stage::Covariance, Stage::Scores, Stage::Nugget, Stage::Predict, Stage::Cv};

std::string trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trimmed(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parseValue(const std::string& s, const std::string& what) {
  const std::string t = trimmed(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ParseError("cannot parse " + what + " from '" + t + "'");
  return v;
}

std::vector<int> parseYears(const std::string& s) {
  std::vector<int> out;
  for (const std::string& part : split(s, ',')) {
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parseValue<int>(part, "year"));
    } else {
      const int a = parseValue<int>(part.substr(0, dash), "year"), b = parseValue<int>(part.substr(dash + 1), "year");
      if (b < a) throw ParseError("year range '" + part + "' is decreasing");
      for (int y = a; y <= b; ++y) out.push_back(y);
    }
  }
  return out;
}

std::string formatYears(const std::vector<int>& years) {
  std::string s;
  for (std::size_t i = 0; i < years.size(); ++i) s += (i ? "," : "") + std::to_string(years[i]);
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::uint64_t pointSeed(std::uint64_t seed, Stage s, const std::string& key) {
  return streamSeed(seed, {static_cast<std::uint64_t>(s) + 1, fnv1a(key)});
}

struct ConfigKey {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
ConfigKey numberKey(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { c.*member = parseValue<T>(v, "number"); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return formatDouble(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

const std::vector<std::pair<std::string, ConfigKey>>& configKeys() {
  static const std::vector<std::pair<std::string, ConfigKey>> keys = {
      {"grid", {[](RunConfig& c, const std::string& v) { c.grid = GridSpec::parse(v); },
                [](const RunConfig& c) { return c.grid.format(); }}},
      {"day0", numberKey(&RunConfig::day0)},
      {"years", {[](RunConfig& c, const std::string& v) { c.years = parseYears(v); },
                 [](const RunConfig& c) { return formatYears(c.years); }}},
      {"data", {[](RunConfig& c, const std::string& v) { c.data = v; },
                [](const RunConfig& c) { return c.data.string(); }}},
      {"out", {[](RunConfig& c, const std::string& v) { c.out = v; },
               [](const RunConfig& c) { return c.out.string(); }}},
      {"seed", numberKey(&RunConfig::seed)},
      {"workers", numberKey(&RunConfig::workers)},
      {"mean_breakpoints", numberKey(&RunConfig::meanBreakpoints)},
      {"cov_breakpoints", numberKey(&RunConfig::covBreakpoints)},
      {"mean_bandwidth", numberKey(&RunConfig::meanBandwidth)},
      {"cov_bandwidth", numberKey(&RunConfig::covBandwidth)},
      {"day_bandwidth", numberKey(&RunConfig::dayBandwidth)},
      {"min_per_year", numberKey(&RunConfig::minPerYear)},
      {"radius", numberKey(&RunConfig::radius)},
      {"K1", numberKey(&RunConfig::K1)},
      {"K2", numberKey(&RunConfig::K2)},
      {"em_iterations", numberKey(&RunConfig::emIterations)},
      {"nu", numberKey(&RunConfig::nu)},
      {"kappa_bias",
       {[](RunConfig& c, const std::string& v) {
          if (v == "digamma")
            c.kappaBias = KappaBias::Digamma;
          else if (v == "chisquare")
            c.kappaBias = KappaBias::ChiSquare;
          else
            throw ParseError("kappa_bias must be digamma or chisquare");
        },
        [](const RunConfig& c) { return std::string(c.kappaBias == KappaBias::Digamma ? "digamma" : "chisquare"); }}},
      {"alpha", numberKey(&RunConfig::alpha)},
      {"alpha1", numberKey(&RunConfig::alpha1)},
      {"alpha2", numberKey(&RunConfig::alpha2)},
      {"predict_step", numberKey(&RunConfig::predictStep)},
      {"ohc_depth", numberKey(&RunConfig::ohcDepth)},
      {"cv_max_profiles", numberKey(&RunConfig::cvMaxProfiles)},
  };
  return keys;
}

Json readJson(const std::filesystem::path& path) {
  try {
    return Json::parse(readFile(path));
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void writeJson(const std::filesystem::path& path, const Json& j) { writeFileAtomic(path, j.dump(1) + "\n"); }

Json statusJson(const PointStatus& s) {
  return Json{{"point", s.key}, {"lon", s.location.lon}, {"lat", s.location.lat}, {"ok", s.ok}, {"message", s.message}};
}

std::vector<double> pressureGrid(double step) {
  std::vector<double> p;
  const int n = static_cast<int>(std::floor(kPressureMax / step + 1e-9));
  for (int i = 0; i <= n; ++i) p.push_back(std::min(kPressureMax, i * step));
  if (p.back() < kPressureMax) p.push_back(kPressureMax);
  return p;
}

Json scoredProfileJson(const ScoredProfile& s) {
  return Json{{"id", s.id},
              {"lon", s.location.lon},
              {"lat", s.location.lat},
              {"day", s.day},
              {"year", s.year},
              {"mode", s.mode == ProfileMode::Delayed ? "D" : "R"},
              {"Z", toJson(s.Z)},
              {"W", s.W ? toJson(*s.W) : Json(nullptr)}};
}

ScoredProfile scoredProfileFromJson(const Json& j) {
  ScoredProfile s;
  s.id = j.at("id").get<std::string>();
  s.location = {j.at("lon").get<double>(), j.at("lat").get<double>()};
  s.day = j.at("day").get<double>();
  s.year = j.at("year").get<int>();
  s.mode = j.at("mode").get<std::string>() == "D" ? ProfileMode::Delayed : ProfileMode::Realtime;
  s.Z = vectorFromJson(j.at("Z"));
  if (!j.at("W").is_null()) s.W = vectorFromJson(j.at("W"));
  return s;
}

Json binJson(const CvBin& b) {
  return Json{{"lo", b.lo},           {"hi", b.hi},         {"count", b.count}, {"coverage", b.coverage},
              {"rmse", b.rmse},       {"median", b.median}, {"q3", b.q3}};
}

CvBin binFromJson(const Json& j) {
  CvBin b;
  b.lo = j.at("lo").get<double>();
  b.hi = j.at("hi").get<double>();
  b.count = j.at("count").get<long>();
  b.coverage = j.at("coverage").get<double>();
  b.rmse = j.at("rmse").get<double>();
  b.median = j.at("median").get<double>();
  b.q3 = j.at("q3").get<double>();
  return b;
}

Json summaryJson(const CvSummary& s) {
  Json cov = Json::array(), lev = Json::array();
  for (const auto& b : s.coverageBins) cov.push_back(binJson(b));
  for (const auto& b : s.levelBins) lev.push_back(binJson(b));
  return Json{{"profiles", s.profiles},         {"skipped", s.skipped}, {"measurements", s.measurements},
              {"coverage", s.coverage},         {"band_coverage", s.bandCoverage},
              {"rmse", s.rmse},                 {"coverage_bins", cov}, {"level_bins", lev}};
}

CvSummary summaryFromJson(const Json& j) {
  CvSummary s;
  s.profiles = j.at("profiles").get<long>();
  s.skipped = j.at("skipped").get<long>();
  s.measurements = j.at("measurements").get<long>();
  s.coverage = j.at("coverage").get<double>();
  s.bandCoverage = j.at("band_coverage").get<double>();
  s.rmse = j.at("rmse").get<double>();
  for (const auto& b : j.at("coverage_bins")) s.coverageBins.push_back(binFromJson(b));
  for (const auto& b : j.at("level_bins")) s.levelBins.push_back(binFromJson(b));
  return s;
}

Json recordJson(const CvRecord& r) {
  return Json{{"id", r.id},
              {"neighbors", r.neighbors},
              {"pressure", r.pressure},
              {"observed", r.observed},
              {"predicted", r.predicted},
              {"sd", r.sd},
              {"in_interval", r.inInterval},
              {"in_band", r.inBand}};
}

CvRecord recordFromJson(const Json& j) {
  CvRecord r;
  r.id = j.at("id").get<std::string>();
  r.neighbors = j.at("neighbors").get<int>();
  r.pressure = j.at("pressure").get<std::vector<double>>();
  r.observed = j.at("observed").get<std::vector<double>>();
  r.predicted = j.at("predicted").get<std::vector<double>>();
  r.sd = j.at("sd").get<std::vector<double>>();
  r.inInterval = j.at("in_interval").get<std::vector<bool>>();
  r.inBand = j.at("in_band").get<bool>();
  return r;
}

/// Inputs shared by all grid points of one stage.
struct StageContext {
  std::vector<GeoPoint> points;
  BasisSystem meanBasis = BasisSystem::equispaced(2);
  BasisSystem covBasis = BasisSystem::equispaced(2);
  ResidualProfileSet residT;
  ResidualProfileSet residS;
  /// Cv stage: fitted points and each residual's nearest fitted point.
  std::vector<std::size_t> cvPoints;
  std::vector<std::size_t> cvOwnerT;
  std::vector<std::size_t> cvOwnerS;
};

bool nearCenter(const ResidualProfile& r, const GeoPoint& c, double day0, double radius, double dayRadius) {
  return greatCircleDistance(r.location, c) <= radius && dayDistance(r.day, day0) <= dayRadius;
}

ResidualProfileSet selectNear(const ResidualProfileSet& all, const GeoPoint& c, double day0, double radius,
                              double dayRadius) {
  ResidualProfileSet out;
  for (const auto& r : all)
    if (nearCenter(r, c, day0, radius, dayRadius)) out.push_back(r);
  return out;
}

struct LoadedPoint {
  MeanFit meanT, meanS;
  SpatialFieldModel model;
  ScoreSet scores;
  MeasurementErrorFit kappaT, kappaS;
};

LoadedPoint loadPoint(const RunConfig& config, const GeoPoint& p, bool withMean) {
  LoadedPoint lp;
  if (withMean) {
    const Json mean = readJson(stageOutputPath(config, p, Stage::Mean));
    lp.meanT = meanFitFromJson(mean.at("T"));
    lp.meanS = meanFitFromJson(mean.at("S"));
  }
  const Json scores = readJson(stageOutputPath(config, p, Stage::Scores));
  lp.model = modelFromJson(scores.at("model"));
  for (const auto& s : scores.at("scores")) lp.scores.push_back(scoredProfileFromJson(s));
  const Json nugget = readJson(stageOutputPath(config, p, Stage::Nugget));
  lp.kappaT = kappaFromJson(nugget.at("T"));
  lp.kappaS = kappaFromJson(nugget.at("S"));
  return lp;
}

FunctionalPrediction assemble(const LoadedPoint& lp, const ConditionalScoreDist& dist, const PredictionTarget& t) {
  FunctionalPrediction pred;
  pred.dist = dist;
  pred.fpcsT = lp.model.fpcsT;
  pred.fpcsS = lp.model.fpcsS;
  pred.meanT = meanCurveAt(lp.meanT, t);
  pred.meanS = meanCurveAt(lp.meanS, t);
  pred.kappaT = lp.kappaT;
  pred.kappaS = lp.kappaS;
  return pred;
}

Json runMean(const RunConfig& config, const StageContext& ctx, const ProfileSet& profiles, const GeoPoint& c) {
  MeanConfig mc;
  mc.kernel = {config.meanBandwidth, config.dayBandwidth};
  mc.years = config.years;
  mc.minPerYear = config.minPerYear;
  const MeanFit t = fitMean(profiles, c, config.day0, ctx.meanBasis, Variable::Temperature, mc);
  const MeanFit s = fitMean(profiles, c, config.day0, ctx.meanBasis, Variable::Salinity, mc);
  return Json{{"schema", kSchemaVersion}, {"T", toJson(t)}, {"S", toJson(s)}};
}

Json runCovariance(const RunConfig& config, const StageContext& ctx, const GeoPoint& c, const std::string& key) {
  MarginalCovConfig cc;
  cc.kernel = {config.covBandwidth, config.dayBandwidth};
  cc.seed = pointSeed(config.seed, Stage::Covariance, key);
  const MarginalCovFit t = fitMarginalCovariance(ctx.residT, c, config.day0, ctx.covBasis, Variable::Temperature, cc);
  const MarginalCovFit s = fitMarginalCovariance(ctx.residS, c, config.day0, ctx.covBasis, Variable::Salinity, cc);
  const FpcBasis ft = extractFpcs(t, config.K1);
  const FpcBasis fs = extractFpcs(s, config.K2);
  return Json{{"schema", kSchemaVersion}, {"T", toJson(t)}, {"S", toJson(s)}, {"fpcsT", toJson(ft)},
              {"fpcsS", toJson(fs)}};
}

Json runScores(const RunConfig& config, const StageContext& ctx, const GeoPoint& c, const std::string& key) {
  const Json cov = readJson(stageOutputPath(config, c, Stage::Covariance));
  const FpcBasis ft = fpcsFromJson(cov.at("fpcsT"));
  const FpcBasis fs = fpcsFromJson(cov.at("fpcsS"));
  ScoreSetSummary summary;
  const ScoreSet scores =
      buildScoreSet(selectNear(ctx.residT, c, config.day0, config.radius, config.dayBandwidth), ft,
                    selectNear(ctx.residS, c, config.day0, config.radius, config.dayBandwidth), fs, &summary);
  if (scores.empty()) throw InsufficientDataError("no scored profiles within the radius");
  const DecorrelationTransform transform = decorrelateScores(scores);
  EmConfig em;
  em.iterations = config.emIterations;
  em.fit.nu = config.nu;
  em.fit.seed = pointSeed(config.seed, Stage::Scores, key);
  const EmResult fit = emFitMissingSalinity(scores, transform, c, em);
  SpatialFieldModel model;
  model.center = c;
  model.fpcsT = ft;
  model.fpcsS = fs;
  model.transform = transform;
  model.params = fit.params;
  model.nu = config.nu;
  Json list = Json::array();
  for (const auto& s : scores) list.push_back(scoredProfileJson(s));
  return Json{{"schema", kSchemaVersion},
              {"model", toJson(model)},
              {"em_relative_change", fit.relativeChange},
              {"rejected_temperature", summary.rejectedTemperature},
              {"rejected_salinity", summary.rejectedSalinity},
              {"scores", list}};
}

MeasurementErrorFit nuggetFor(const RunConfig& config, const StageContext& ctx, const ResidualProfileSet& all,
                              const FpcBasis& fpcs, const GeoPoint& c) {
  const ResidualProfileSet near = selectNear(all, c, config.day0, config.covBandwidth, config.dayBandwidth);
  std::vector<std::optional<Eigen::VectorXd>> scores;
  scores.reserve(near.size());
  for (const auto& r : near) scores.push_back(estimateScores(r, fpcs));
  MeasurementErrorConfig mc;
  mc.kernel = {config.covBandwidth, config.dayBandwidth};
  mc.bias = config.kappaBias;
  return fitMeasurementError(near, fpcs, scores, c, config.day0, ctx.covBasis, mc);
}

Json runNugget(const RunConfig& config, const StageContext& ctx, const GeoPoint& c) {
  const Json cov = readJson(stageOutputPath(config, c, Stage::Covariance));
  const MeasurementErrorFit t = nuggetFor(config, ctx, ctx.residT, fpcsFromJson(cov.at("fpcsT")), c);
  const MeasurementErrorFit s = nuggetFor(config, ctx, ctx.residS, fpcsFromJson(cov.at("fpcsS")), c);
  return Json{{"schema", kSchemaVersion}, {"T", toJson(t)}, {"S", toJson(s)}};
}

Json runPredict(const RunConfig& config, const GeoPoint& c, const std::string& key) {
  const LoadedPoint lp = loadPoint(config, c, true);
  Json years = Json::array();
  std::vector<PointPrediction> preds;
  for (int y : config.years) {
    const PredictionTarget t{c, config.day0, y};
    const ConditionalScoreDist dist = conditionalScoreDistribution(lp.model, lp.scores, t, config.radius);
    int neighbors = 0;
    for (const auto& s : lp.scores)
      neighbors += s.year == y && greatCircleDistance(s.location, c) <= config.radius;
    years.push_back(Json{{"year", y}, {"neighbors", neighbors}, {"dist", toJson(dist)}});
    preds.push_back({key, t, assemble(lp, dist, t)});
  }
  writePredictions(preds, predictionOutputConfig(config), OutputFormat::Csv,
                   stageOutputPath(config, c, Stage::Predict).parent_path() / "predictions.csv");
  return Json{{"schema", kSchemaVersion}, {"years", years}};
}

Json runCv(const RunConfig& config, const StageContext& ctx, std::size_t pointIndex, const GeoPoint& c) {
  const LoadedPoint lp = loadPoint(config, c, false);
  const CvModel cm{lp.model, lp.kappaT, lp.kappaS};
  Json out{{"schema", kSchemaVersion}};
  for (const Variable v : {Variable::Temperature, Variable::Salinity}) {
    const bool isT = v == Variable::Temperature;
    const ResidualProfileSet& all = isT ? ctx.residT : ctx.residS;
    const std::vector<std::size_t>& owner = isT ? ctx.cvOwnerT : ctx.cvOwnerS;
    ResidualProfileSet mine;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (owner[i] == pointIndex) mine.push_back(all[i]);
    CvConfig cc;
    cc.variable = v;
    cc.radius = config.radius;
    cc.alpha = config.alpha;
    cc.alpha1 = config.alpha1;
    cc.alpha2 = config.alpha2;
    cc.maxProfiles = config.cvMaxProfiles;
    Json records = Json::array();
    CvSummary summary;
    if (!mine.empty()) {
      const CvResult res = crossValidate(std::span<const CvModel>(&cm, 1), lp.scores, mine, cc);
      for (const auto& r : res.records) records.push_back(recordJson(r));
      summary = res.summary;
    }
    out[isT ? "T" : "S"] = Json{{"summary", summaryJson(summary)}, {"records", records}};
  }
  return out;
}

StageContext prepareContext(const RunConfig& config, const ProfileSet& profiles, Stage stage,
                            const std::vector<GeoPoint>& points) {
  StageContext ctx;
  ctx.points = points;
  ctx.meanBasis = BasisSystem::equispaced(config.meanBreakpoints);
  ctx.covBasis = BasisSystem::equispaced(config.covBreakpoints);
  if (stage == Stage::Mean || stage == Stage::Predict) return ctx;
  std::vector<MeanFit> fitsT, fitsS;
  for (const auto& p : points) {
    const auto path = stageOutputPath(config, p, Stage::Mean);
    if (!std::filesystem::exists(path)) continue;
    const Json j = readJson(path);
    fitsT.push_back(meanFitFromJson(j.at("T")));
    fitsS.push_back(meanFitFromJson(j.at("S")));
  }
  ctx.residT = computeResiduals(profiles, fitsT, Variable::Temperature);
  ctx.residS = computeResiduals(profiles, fitsS, Variable::Salinity);
  if (stage == Stage::Cv) {
    for (std::size_t i = 0; i < points.size(); ++i)
      if (std::filesystem::exists(stageOutputPath(config, points[i], Stage::Scores)) &&
          std::filesystem::exists(stageOutputPath(config, points[i], Stage::Nugget)))
        ctx.cvPoints.push_back(i);
    auto owners = [&](const ResidualProfileSet& rs) {
      std::vector<std::size_t> own(rs.size(), points.size());
      for (std::size_t r = 0; r < rs.size(); ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : ctx.cvPoints) {
          const double d = greatCircleDistance(points[i], rs[r].location);
          if (d < best) {
            best = d;
            own[r] = i;
          }
        }
      }
      return own;
    };
    ctx.cvOwnerT = owners(ctx.residT);
    ctx.cvOwnerS = owners(ctx.residS);
  }
  return ctx;
}

void writeCvAggregate(const RunConfig& config, const std::vector<GeoPoint>& points,
                      const std::vector<PointStatus>& status) {
  for (const Variable v : {Variable::Temperature, Variable::Salinity}) {
    std::vector<CvRecord> records;
    long skipped = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!status[i].ok) continue;
      const Json j = readJson(stageOutputPath(config, points[i], Stage::Cv)).at(v == Variable::Temperature ? "T" : "S");
      skipped += j.at("summary").at("skipped").get<long>();
      for (const auto& r : j.at("records")) records.push_back(recordFromJson(r));
    }
    const CvSummary s = summarize(records, skipped);
    writeJson(config.out / (std::string("cv_") + variableName(v) + ".json"),
              Json{{"schema", kSchemaVersion}, {"variable", variableName(v)}, {"summary", summaryJson(s)}});
  }
}

void appendCurveRows(std::ostream& out, const std::string& prefix, const char* var, const char* quantity,
                     std::span<const double> pressures, const Eigen::VectorXd& values) {
  for (std::size_t j = 0; j < pressures.size(); ++j)
    out << prefix << var << ',' << quantity << ',' << j << ',' << formatDouble(pressures[j]) << ','
        << formatDouble(values(static_cast<Eigen::Index>(j))) << '\n';
}

void appendScalarRow(std::ostream& out, const std::string& prefix, const char* var, const char* quantity,
                     long index, double value) {
  out << prefix << var << ',' << quantity << ',' << index << ",NA," << formatDouble(value) << '\n';
}

struct VariableOutput {
  Eigen::VectorXd mean, sd, lo, hi, bandLo, bandHi;
  GaussianSummary integral;
  bool fullScale = false;
};

VariableOutput variableOutput(const FunctionalPrediction& pred, Variable v, const PredictionOutputConfig& oc) {
  VariableOutput o;
  o.fullScale = pred.meanCurve(v).has_value();
  const CurvePrediction c = predictFunction(pred, oc.pressures, v, o.fullScale);
  o.mean = c.mean;
  o.sd = c.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  const Interval iv = pointwiseInterval(pred, oc.pressures, v, oc.alpha, o.fullScale);
  o.lo = iv.lo;
  o.hi = iv.hi;
  const Band b = simultaneousBand(pred, oc.pressures, v, static_cast<int>(oc.pressures.size()), oc.alpha1, oc.alpha2,
                                  o.fullScale);
  o.bandLo = b.lo;
  o.bandHi = b.hi;
  o.integral = integralDistribution(pred, v, kPressureMin, kPressureMax);
  return o;
}

}  // namespace

PredictionOutputConfig predictionOutputConfig(const RunConfig& config) {
  PredictionOutputConfig oc;
  oc.pressures = pressureGrid(config.predictStep);
  oc.alpha = config.alpha;
  oc.alpha1 = config.alpha1;
  oc.alpha2 = config.alpha2;
  oc.ohcDepth = config.ohcDepth;
  return oc;
}

std::vector<GeoPoint> GridSpec::points() const {
  validate();
  const auto count = [](double lo, double hi, double step) {
    return static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  };
  std::vector<GeoPoint> out;
  const int nlat = count(latMin, latMax, latStep), nlon = count(lonMin, lonMax, lonStep);
  for (int i = 0; i < nlat; ++i)
    for (int j = 0; j < nlon; ++j) out.push_back({lonMin + j * lonStep, latMin + i * latStep});
  return out;
}

void GridSpec::validate() const {
  if (!(lonStep > 0.0) || !(latStep > 0.0)) throw ValidationError("grid: resolution must be > 0");
  if (!(latMin >= -90.0 && latMax <= 90.0 && latMin <= latMax)) throw ValidationError("grid: invalid latitude range");
  if (!(lonMin >= -180.0 && lonMax < 180.0 && lonMin <= lonMax)) throw ValidationError("grid: invalid longitude range");
}

GridSpec GridSpec::parse(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ParseError("grid spec '" + text + "': expected LON,LAT or LON0:LON1:DLON,LAT0:LAT1:DLAT");
  GridSpec g;
  auto axis = [&](const std::string& s, double& lo, double& hi, double& step) {
    const auto f = split(s, ':');
    if (f.size() == 1) {
      lo = hi = parseValue<double>(f[0], "grid coordinate");
      step = 1.0;
    } else if (f.size() == 3) {
      lo = parseValue<double>(f[0], "grid coordinate");
      hi = parseValue<double>(f[1], "grid coordinate");
      step = parseValue<double>(f[2], "grid step");
    } else {
      throw ParseError("grid spec '" + text + "': bad axis '" + s + "'");
    }
  };
  axis(parts[0], g.lonMin, g.lonMax, g.lonStep);
  axis(parts[1], g.latMin, g.latMax, g.latStep);
  g.validate();
  return g;
}

std::string GridSpec::format() const {
  return formatDouble(lonMin) + ":" + formatDouble(lonMax) + ":" + formatDouble(lonStep) + "," + formatDouble(latMin) +
         ":" + formatDouble(latMax) + ":" + formatDouble(latStep);
}

std::string pointKey(const GeoPoint& p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "lon%.4f_lat%.4f", p.lon, p.lat);
  return buf;
}

const char* stageName(Stage s) {
  switch (s) {
    case Stage::Mean: return "mean";
    case Stage::Covariance: return "cov";
    case Stage::Scores: return "scores";
    case Stage::Nugget: return "nugget";
    case Stage::Predict: return "predict";
    case Stage::Cv: return "cv";
  }
  return "?";
}

Stage stageFromName(const std::string& name) {
  for (Stage s : kStages)
    if (name == stageName(s)) return s;
  throw ParseError("unknown stage '" + name + "'");
}

std::span<const Stage> allStages() { return kStages; }

std::vector<Stage> stagePrerequisites(Stage s) {
  switch (s) {
    case Stage::Mean: return {};
    case Stage::Covariance: return {Stage::Mean};
    case Stage::Scores: return {Stage::Mean, Stage::Covariance};
    case Stage::Nugget: return {Stage::Mean, Stage::Covariance};
    case Stage::Predict: return {Stage::Mean, Stage::Scores, Stage::Nugget};
    case Stage::Cv: return {Stage::Mean, Stage::Scores, Stage::Nugget};
  }
  return {};
}

void RunConfig::validate() const {
  grid.validate();
  if (years.empty()) throw ValidationError("config: no years");
  if (workers < 1) throw ValidationError("config: workers must be >= 1");
  if (meanBreakpoints < 2 || covBreakpoints < 2) throw ValidationError("config: at least 2 breakpoints");
  if (!(meanBandwidth > 0.0) || !(covBandwidth > 0.0) || !(dayBandwidth > 0.0) || !(radius > 0.0))
    throw ValidationError("config: bandwidths and radius must be > 0");
  if (K1 < 1 || K2 < 1) throw ValidationError("config: K1 and K2 must be >= 1");
  if (emIterations < 1) throw ValidationError("config: em_iterations must be >= 1");
  if (!(nu > 0.0)) throw ValidationError("config: nu must be > 0");
  for (double a : {alpha, alpha1, alpha2})
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("config: significance levels must lie in (0, 1)");
  if (!(predictStep > 0.0)) throw ValidationError("config: predict_step must be > 0");
  if (!(ohcDepth > 0.0 && ohcDepth <= kPressureMax)) throw ValidationError("config: ohc_depth must lie in (0, 2000]");
}

void setConfigValue(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, k] : configKeys())
    if (name == key) {
      k.set(config, value);
      return;
    }
  throw ParseError("unknown config key '" + key + "'");
}

RunConfig parseRunConfig(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trimmed(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(lineNo) + ": expected key = value");
    try {
      setConfigValue(base, trimmed(line.substr(0, eq)), trimmed(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw ParseError("config line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

RunConfig loadRunConfig(const std::filesystem::path& path, RunConfig base) {
  return parseRunConfig(readFile(path), std::move(base));
}

std::string formatRunConfig(const RunConfig& config) {
  std::string s;
  for (const auto& [name, k] : configKeys()) s += name + " = " + k.get(config) + "\n";
  return s;
}

int StageReport::succeeded() const {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [](const PointStatus& p) { return p.ok; }));
}

int StageReport::failed() const { return static_cast<int>(points.size()) - succeeded(); }

std::filesystem::path stageOutputPath(const RunConfig& config, const GeoPoint& p, Stage s) {
  return config.out / "points" / pointKey(p) / (std::string(stageName(s)) + ".json");
}

std::vector<StageReport> runGrid(const RunConfig& config, const ProfileSet& profiles, std::span<const Stage> stages) {
  config.validate();
  const std::vector<GeoPoint> points = config.grid.points();
  std::vector<StageReport> reports;
  for (const Stage stage : stages) {
    for (const Stage pre : stagePrerequisites(stage)) {
      const bool any = std::any_of(points.begin(), points.end(), [&](const GeoPoint& p) {
        return std::filesystem::exists(stageOutputPath(config, p, pre));
      });
      if (!any)
        throw DependencyError(std::string("stage '") + stageName(stage) + "' requires the outputs of stage '" +
                              stageName(pre) + "'");
    }
    const StageContext ctx = prepareContext(config, profiles, stage, points);
    std::vector<PointStatus> status(points.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < points.size(); i = next++) {
        const GeoPoint& c = points[i];
        PointStatus& st = status[i];
        st.key = pointKey(c);
        st.location = c;
        const auto path = stageOutputPath(config, c, stage);
        try {
          for (const Stage pre : stagePrerequisites(stage))
            if (!std::filesystem::exists(stageOutputPath(config, c, pre)))
              throw DependencyError(std::string("no output of stage '") + stageName(pre) + "' at this point");
          Json j;
          switch (stage) {
            case Stage::Mean: j = runMean(config, ctx, profiles, c); break;
            case Stage::Covariance: j = runCovariance(config, ctx, c, st.key); break;
            case Stage::Scores: j = runScores(config, ctx, c, st.key); break;
            case Stage::Nugget: j = runNugget(config, ctx, c); break;
            case Stage::Predict: j = runPredict(config, c, st.key); break;
            case Stage::Cv: j = runCv(config, ctx, i, c); break;
          }
          j["point"] = st.key;
          writeJson(path, j);
          st.ok = true;
        } catch (const std::exception& e) {
          st.ok = false;
          st.message = e.what();
          std::error_code ec;
          std::filesystem::remove(path, ec);
          logWarn(std::string("stage ") + stageName(stage) + " failed at " + st.key + ": " + e.what());
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < config.workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    Json list = Json::array();
    for (const auto& s : status) list.push_back(statusJson(s));
    writeJson(config.out / (std::string("stage_") + stageName(stage) + ".json"),
              Json{{"schema", kSchemaVersion}, {"stage", stageName(stage)}, {"points", list}});
    if (stage == Stage::Cv) writeCvAggregate(config, points, status);
    reports.push_back(StageReport{stage, std::move(status)});
  }
  return reports;
}

FunctionalPrediction loadPrediction(const RunConfig& config, const GeoPoint& p, int year) {
  const LoadedPoint lp = loadPoint(config, p, true);
  const Json pj = readJson(stageOutputPath(config, p, Stage::Predict));
  for (const auto& y : pj.at("years"))
    if (y.at("year").get<int>() == year)
      return assemble(lp, scoreDistFromJson(y.at("dist")), PredictionTarget{p, config.day0, year});
  throw ArgumentError("no prediction for year " + std::to_string(year) + " at " + pointKey(p));
}

void writePredictions(std::span<const PointPrediction> predictions, const PredictionOutputConfig& config,
                      OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::Csv) {
    out << "# fdakrig predictions schema_version=" << kSchemaVersion << '\n';
    out << "point,lon,lat,day,year,variable,quantity,index,pressure,value\n";
  } else {
    out << Json{{"schema_version", kSchemaVersion}, {"kind", "fdakrig-predictions"}, {"pressures", config.pressures}}
               .dump()
        << '\n';
  }
  for (const PointPrediction& pp : predictions) {
    const FunctionalPrediction& pred = pp.prediction;
    const PredictionTarget& t = pp.target;
    std::optional<OhcEstimate> ohc;
    if (pred.meanT && pred.meanS) ohc = ohcDistribution(pred, EquationOfState::toy(), OhcGrid::fine(config.ohcDepth));
    if (format == OutputFormat::Csv) {
      const std::string prefix = pp.key + ',' + formatDouble(t.location.lon) + ',' + formatDouble(t.location.lat) + ',' +
                                 formatDouble(t.day) + ',' + std::to_string(t.year) + ',';
      const auto K = pred.dist.theta.size();
      for (Eigen::Index k = 0; k < K; ++k) appendScalarRow(out, prefix, "scores", "theta", k, pred.dist.theta(k));
      long idx = 0;
      for (Eigen::Index r = 0; r < K; ++r)
        for (Eigen::Index c = 0; c <= r; ++c) appendScalarRow(out, prefix, "scores", "sigma", idx++, pred.dist.Sigma(r, c));
      for (const Variable v : {Variable::Temperature, Variable::Salinity}) {
        if (pred.fpcs(v).count() == 0) continue;
        const VariableOutput o = variableOutput(pred, v, config);
        const char* name = variableName(v);
        appendCurveRows(out, prefix, name, "mean", config.pressures, o.mean);
        appendCurveRows(out, prefix, name, "sd", config.pressures, o.sd);
        appendCurveRows(out, prefix, name, "interval_lo", config.pressures, o.lo);
        appendCurveRows(out, prefix, name, "interval_hi", config.pressures, o.hi);
        appendCurveRows(out, prefix, name, "band_lo", config.pressures, o.bandLo);
        appendCurveRows(out, prefix, name, "band_hi", config.pressures, o.bandHi);
        appendScalarRow(out, prefix, name, "integral_mean", 0, o.integral.mean);
        appendScalarRow(out, prefix, name, "integral_var", 0, o.integral.variance);
      }
      if (ohc) {
        appendScalarRow(out, prefix, "temperature", "ohc_mean", 0, ohc->mean);
        appendScalarRow(out, prefix, "temperature", "ohc_var", 0, ohc->variance);
      }
    } else {
      Json rec{{"point", pp.key},
               {"lon", t.location.lon},
               {"lat", t.location.lat},
               {"day", t.day},
               {"year", t.year},
               {"scores", toJson(pred.dist)}};
      for (const Variable v : {Variable::Temperature, Variable::Salinity}) {
        if (pred.fpcs(v).count() == 0) continue;
        const VariableOutput o = variableOutput(pred, v, config);
        rec[variableName(v)] = Json{{"full_scale", o.fullScale},
                                    {"mean", toJson(o.mean)},
                                    {"sd", toJson(o.sd)},
                                    {"interval_lo", toJson(o.lo)},
                                    {"interval_hi", toJson(o.hi)},
                                    {"band_lo", toJson(o.bandLo)},
                                    {"band_hi", toJson(o.bandHi)},
                                    {"integral_mean", o.integral.mean},
                                    {"integral_var", o.integral.variance}};
      }
      if (ohc) rec["ohc"] = Json{{"mean", ohc->mean}, {"variance", ohc->variance}, {"depth", config.ohcDepth}};
      out << rec.dump() << '\n';
    }
  }
  if (!out) throw IoError("writePredictions: write failed");
}

void writePredictions(std::span<const PointPrediction> predictions, const PredictionOutputConfig& config,
                      OutputFormat format, const std::filesystem::path& path) {
  std::ostringstream os;
  writePredictions(predictions, config, format, os);
  writeFileAtomic(path, os.str());
}

CvSummary loadCvSummary(const RunConfig& config, Variable v) {
  return summaryFromJson(readJson(config.out / (std::string("cv_") + variableName(v) + ".json")).at("summary"));
}

}  // namespace fdakrig
