#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fdakrig/functionals.hpp"
#include "fdakrig/kriging.hpp"
#include "fdakrig/marginal_cov.hpp"
#include "fdakrig/mean_field.hpp"
#include "fdakrig/profile.hpp"
#include "fdakrig/serialize.hpp"

namespace fdakrig {

/// Regular lon/lat grid of prediction and fitting centers.
struct GridSpec {
  double lonMin = -180.0;
  double lonMax = 179.0;
  double latMin = -80.0;
  double latMax = 80.0;
  double lonStep = 1.0;
  double latStep = 1.0;

  /// Points ordered by latitude, then longitude; both ends inclusive.
  std::vector<GeoPoint> points() const;
  void validate() const;

  /// "LON,LAT" for a single point or "LON0:LON1:DLON,LAT0:LAT1:DLAT".
  static GridSpec parse(const std::string& text);
  std::string format() const;
};

/// Output directory name of a grid point.
std::string pointKey(const GeoPoint& p);

enum class Stage { Mean, Covariance, Scores, Nugget, Predict, Cv };

const char* stageName(Stage s);
Stage stageFromName(const std::string& name);
std::span<const Stage> allStages();
/// Stages whose outputs `s` reads.
std::vector<Stage> stagePrerequisites(Stage s);

struct RunConfig {
  GridSpec grid;
  double day0 = 45.25;
  std::vector<int> years = defaultYears();
  std::filesystem::path data;
  std::filesystem::path out = "fdakrig_out";
  std::uint64_t seed = 0;
  int workers = 1;

  int meanBreakpoints = 200;
  int covBreakpoints = 100;
  double meanBandwidth = 900.0;  // km
  double covBandwidth = 550.0;   // km
  double dayBandwidth = 45.25;   // days
  int minPerYear = 10;
  double radius = 1100.0;  // km
  int K1 = 10;
  int K2 = 10;
  int emIterations = 6;
  double nu = 0.5;
  KappaBias kappaBias = KappaBias::Digamma;

  double alpha = 0.0455;
  double alpha1 = 0.02275;
  double alpha2 = 0.02275;
  double predictStep = 10.0;  // dbar
  double ohcDepth = 2000.0;   // dbar
  long cvMaxProfiles = -1;

  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and
/// malformed values raise ParseError naming the line.
RunConfig parseRunConfig(const std::string& text, RunConfig base = {});
RunConfig loadRunConfig(const std::filesystem::path& path, RunConfig base = {});
/// Sets one key from its text value.
void setConfigValue(RunConfig& config, const std::string& key, const std::string& value);
/// Every key with its current value, in parseRunConfig format.
std::string formatRunConfig(const RunConfig& config);

struct PointStatus {
  std::string key;
  GeoPoint location;
  bool ok = false;
  std::string message;
};

struct StageReport {
  Stage stage = Stage::Mean;
  std::vector<PointStatus> points;
  int succeeded() const;
  int failed() const;
};

/// Runs `stages` in the given order over every grid point. Each point's
/// outputs are written atomically to out/points/<key>/<stage>.json; a failing
/// point is logged, flagged in out/stage_<name>.json and skipped by later
/// stages. Throws DependencyError when a prerequisite stage has no output
/// at any grid point.
std::vector<StageReport> runGrid(const RunConfig& config, const ProfileSet& profiles, std::span<const Stage> stages);

/// Path of a stage output of one grid point.
std::filesystem::path stageOutputPath(const RunConfig& config, const GeoPoint& p, Stage s);

/// Reloads the prediction of one grid point and year from persisted stage
/// outputs.
FunctionalPrediction loadPrediction(const RunConfig& config, const GeoPoint& p, int year);

struct PointPrediction {
  std::string key;
  PredictionTarget target;
  FunctionalPrediction prediction;
};

struct PredictionOutputConfig {
  std::vector<double> pressures;
  double alpha = 0.0455;
  double alpha1 = 0.02275;
  double alpha2 = 0.02275;
  double ohcDepth = 2000.0;
};

/// Output grid every predict_step dbar over [0, 2000] with the configured
/// significance levels.
PredictionOutputConfig predictionOutputConfig(const RunConfig& config);

enum class OutputFormat { Csv, Jsonl };

/// Score means and covariance lower triangles, full-scale curves with
/// pointwise intervals and simultaneous bands on the requested pressures,
/// and heat-content (toy equation of state, 0.5-dbar grid) and integral
/// summaries. The first line carries the
/// schema version. Throws IoError.
void writePredictions(std::span<const PointPrediction> predictions, const PredictionOutputConfig& config,
                      OutputFormat format, std::ostream& out);
void writePredictions(std::span<const PointPrediction> predictions, const PredictionOutputConfig& config,
                      OutputFormat format, const std::filesystem::path& path);

/// Aggregated cross-validation summary over all grid points, written by the
/// Cv stage to out/cv_<variable>.json.
CvSummary loadCvSummary(const RunConfig& config, Variable v);

}  // namespace fdakrig
