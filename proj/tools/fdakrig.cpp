#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "fdakrig/errors.hpp"
#include "fdakrig/functionals.hpp"
#include "fdakrig/io.hpp"
#include "fdakrig/log.hpp"
#include "fdakrig/pipeline.hpp"
#include "fdakrig/rng.hpp"
#include "fdakrig/synthetic.hpp"

using namespace fdakrig;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string grid;
  std::string data;
  std::string out;
  bool quiet = false;
};

RunConfig resolveConfig(const GlobalOptions& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : loadRunConfig(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  if (!g.grid.empty()) c.grid = GridSpec::parse(g.grid);
  if (!g.data.empty()) c.data = g.data;
  if (!g.out.empty()) c.out = g.out;
  c.validate();
  return c;
}

ProfileSet requireData(const RunConfig& c) {
  if (c.data.empty()) throw ArgumentError("no input data: pass --data or set 'data' in the config");
  return loadProfiles(c.data);
}

void printReports(const std::vector<StageReport>& reports) {
  for (const auto& r : reports) {
    std::printf("stage %-8s ok %d failed %d\n", stageName(r.stage), r.succeeded(), r.failed());
    for (const auto& p : r.points)
      if (!p.ok) std::printf("  %s: %s\n", p.key.c_str(), p.message.c_str());
  }
}

int runStages(const GlobalOptions& g, std::initializer_list<Stage> stages) {
  const RunConfig c = resolveConfig(g);
  const ProfileSet data = requireData(c);
  const std::vector<Stage> list(stages);
  const auto reports = runGrid(c, data, list);
  printReports(reports);
  return 0;
}

void printCvSummary(const CvSummary& s, const char* name) {
  std::printf("%s: profiles %ld skipped %ld measurements %ld coverage %.4f band %.4f rmse %.6g\n", name, s.profiles,
              s.skipped, s.measurements, s.coverage, s.bandCoverage, s.rmse);
}

std::vector<double> unitGrid(double hi) {
  std::vector<double> p;
  for (int i = 0; i <= static_cast<int>(hi); ++i) p.push_back(i);
  return p;
}

Curve interpolant(const std::vector<double>& p, Eigen::VectorXd v) {
  return [p, v = std::move(v)](double x) {
    const auto it = std::upper_bound(p.begin(), p.end(), x);
    if (it == p.begin()) return v(0);
    if (it == p.end()) return v(static_cast<Eigen::Index>(p.size() - 1));
    const auto j = static_cast<Eigen::Index>(it - p.begin());
    const double w = (x - p[static_cast<std::size_t>(j - 1)]) / (p[static_cast<std::size_t>(j)] - p[static_cast<std::size_t>(j - 1)]);
    return (1.0 - w) * v(j - 1) + w * v(j);
  };
}

int runFunctionals(const GlobalOptions& g, const std::string& kind, int draws, const std::string& outPath) {
  const RunConfig c = resolveConfig(g);
  const EquationOfState eos = EquationOfState::toy();
  std::ostringstream os;
  if (kind == "ohc")
    os << "point,lon,lat,year,depth,ohc_mean,ohc_var\n";
  else if (kind == "mld")
    os << "point,lon,lat,year,draws,censored,mld_mean,mld_median,mld_skewness\n";
  else
    os << "point,lon,lat,year,draws,inversion_proportion\n";
  for (const GeoPoint& p : c.grid.points()) {
    if (!std::filesystem::exists(stageOutputPath(c, p, Stage::Predict))) continue;
    const std::string key = pointKey(p);
    for (int y : c.years) {
      const FunctionalPrediction pred = loadPrediction(c, p, y);
      const std::string prefix =
          key + "," + formatDouble(p.lon) + "," + formatDouble(p.lat) + "," + std::to_string(y) + ",";
      const std::uint64_t seed = streamSeed(c.seed, {0xf0, static_cast<std::uint64_t>(y), std::bit_cast<std::uint64_t>(p.lon), std::bit_cast<std::uint64_t>(p.lat)});
      if (kind == "ohc") {
        const OhcEstimate e = ohcDistribution(pred, eos, OhcGrid::fine(c.ohcDepth));
        os << prefix << formatDouble(c.ohcDepth) << "," << formatDouble(e.mean) << "," << formatDouble(e.variance) << "\n";
      } else if (kind == "mld") {
        const std::vector<double> grid = unitGrid(kPressureMax);
        const SimulatedCurves sim = simulateCurves(pred, grid, draws, seed);
        std::vector<std::optional<double>> depths;
        for (int b = 0; b < draws; ++b)
          depths.push_back(mldThreshold(interpolant(grid, sim.T.row(b).transpose()),
                                        interpolant(grid, sim.S.row(b).transpose()), eos));
        const MldStats s = mldBootstrapStats(std::span(&depths, 1));
        os << prefix << draws << "," << s.censored << "," << formatDouble(s.yearMean[0]) << ","
           << formatDouble(s.yearMedian[0]) << "," << formatDouble(s.skewness[0]) << "\n";
      } else {
        const std::vector<double> grid = unitGrid(kPressureMax);
        const SimulatedCurves sim = simulateCurves(pred, grid, draws, seed);
        os << prefix << draws << "," << formatDouble(gridInversionProportion(densityOf(sim, grid, eos))) << "\n";
      }
    }
  }
  if (outPath.empty())
    std::cout << os.str();
  else
    writeFileAtomic(outPath, os.str());
  return 0;
}

int runReport(const GlobalOptions& g) {
  const RunConfig c = resolveConfig(g);
  for (const Stage s : allStages()) {
    const auto path = c.out / (std::string("stage_") + stageName(s) + ".json");
    if (!std::filesystem::exists(path)) continue;
    const Json j = Json::parse(readFile(path));
    int ok = 0, failed = 0;
    for (const auto& p : j.at("points")) (p.at("ok").get<bool>() ? ok : failed)++;
    std::printf("%-8s ok %6d failed %6d\n", stageName(s), ok, failed);
  }
  for (const Variable v : {Variable::Temperature, Variable::Salinity}) {
    if (!std::filesystem::exists(c.out / (std::string("cv_") + variableName(v) + ".json"))) continue;
    const CvSummary s = loadCvSummary(c, v);
    printCvSummary(s, variableName(v));
    std::printf("  %-18s %8s %9s %12s %12s %12s\n", "pressure bin", "count", "coverage", "rmse", "median", "q3");
    for (const auto& b : s.levelBins)
      if (b.count > 0)
        std::printf("  [%7.2f, %7.2f) %8ld %9.4f %12.6g %12.6g %12.6g\n", b.lo, b.hi, b.count, b.coverage, b.rmse,
                    b.median, b.q3);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional kriging of ocean profile data"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Root random seed");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--grid", g.grid, "LON,LAT or LON0:LON1:DLON,LAT0:LAT1:DLAT");
  app.add_option("--data", g.data, "Profile table (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_flag("--quiet", g.quiet, "Only report errors");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic profile table from the standard model");
  std::string synthOut = "synthetic.csv";
  std::string center;
  int perYear = 300;
  std::vector<int> synthYears{2009, 2010, 2011};
  double realtime = 0.2, radius = 800.0;
  synth->add_option("-o,--output", synthOut, "Output profile table");
  synth->add_option("--center", center, "LON,LAT of the sampling disc");
  synth->add_option("--profiles-per-year", perYear)->check(CLI::NonNegativeNumber);
  synth->add_option("--years", synthYears);
  synth->add_option("--realtime-fraction", realtime)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--radius", radius, "Sampling radius in km")->check(CLI::NonNegativeNumber);

  auto* fitMeanCmd = app.add_subcommand("fit-mean", "Fit local mean surfaces");
  auto* fitCovCmd = app.add_subcommand("fit-cov", "Fit marginal covariances and FPCs");
  auto* fitScoresCmd = app.add_subcommand("fit-scores", "Fit score fields (ML with EM) and measurement error");
  auto* predictCmd = app.add_subcommand("predict", "Predict curves at grid points");
  std::string format = "csv";
  std::string predOut;
  predictCmd->add_option("--format", format)->check(CLI::IsMember({"csv", "jsonl"}));
  predictCmd->add_option("-o,--output", predOut, "Combined prediction file (default out/predictions.<format>)");
  auto* cvCmd = app.add_subcommand("cv", "Leave-one-profile-out validation");
  auto* funCmd = app.add_subcommand("functionals", "Derived functionals from persisted predictions");
  std::string kind;
  int draws = 200;
  std::string funOut;
  funCmd->add_option("kind", kind)->required()->check(CLI::IsMember({"ohc", "mld", "inversions"}));
  funCmd->add_option("--draws", draws, "Conditional simulations per point and year")->check(CLI::PositiveNumber);
  funCmd->add_option("-o,--output", funOut);
  auto* reportCmd = app.add_subcommand("report", "Tabulate stage status and validation summaries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (g.quiet) setLogLevel(LogLevel::Error);

  try {
    if (*synth) {
      SyntheticModelSpec spec = SyntheticModelSpec::standard();
      if (!center.empty()) {
        const GridSpec pt = GridSpec::parse(center);
        spec.plan.center = {pt.lonMin, pt.latMin};
      }
      spec.plan.profilesPerYear = perYear;
      spec.plan.years = synthYears;
      spec.plan.realtimeFraction = realtime;
      spec.plan.radius = radius;
      const std::uint64_t seed = g.seed.value_or(0);
      const SyntheticDataset d = synthesizeDataset(spec, seed);
      writeProfiles(d.profiles, std::filesystem::path(synthOut));
      std::printf("wrote %zu profiles to %s\n", d.profiles.size(), synthOut.c_str());
      return 0;
    }
    if (*fitMeanCmd) return runStages(g, {Stage::Mean});
    if (*fitCovCmd) return runStages(g, {Stage::Covariance});
    if (*fitScoresCmd) return runStages(g, {Stage::Scores, Stage::Nugget});
    if (*predictCmd) {
      const RunConfig c = resolveConfig(g);
      const ProfileSet data = requireData(c);
      const Stage st[] = {Stage::Predict};
      printReports(runGrid(c, data, st));
      std::vector<PointPrediction> preds;
      for (const GeoPoint& p : c.grid.points()) {
        if (!std::filesystem::exists(stageOutputPath(c, p, Stage::Predict))) continue;
        for (int y : c.years) preds.push_back({pointKey(p), {p, c.day0, y}, loadPrediction(c, p, y)});
      }
      const PredictionOutputConfig oc = predictionOutputConfig(c);
      const std::filesystem::path path = predOut.empty() ? c.out / ("predictions." + format) : std::filesystem::path(predOut);
      writePredictions(preds, oc, format == "csv" ? OutputFormat::Csv : OutputFormat::Jsonl, path);
      std::printf("wrote %zu predictions to %s\n", preds.size(), path.string().c_str());
      return 0;
    }
    if (*cvCmd) {
      const RunConfig c = resolveConfig(g);
      const ProfileSet data = requireData(c);
      const Stage st[] = {Stage::Cv};
      printReports(runGrid(c, data, st));
      printCvSummary(loadCvSummary(c, Variable::Temperature), "temperature");
      printCvSummary(loadCvSummary(c, Variable::Salinity), "salinity");
      return 0;
    }
    if (*funCmd) return runFunctionals(g, kind, draws, funOut);
    if (*reportCmd) return runReport(g);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::Validation ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
