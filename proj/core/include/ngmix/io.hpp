#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngmix/estimator.hpp"
#include "ngmix/model.hpp"
#include "ngmix/predict.hpp"

namespace ngmix {

/// Long-format table: subject_id, time, y, then covariate columns.
struct LongTable {
  std::vector<std::string> columns;  ///< covariate names
  std::vector<std::string> subject;
  std::vector<double> time;
  std::vector<double> y;                  ///< NaN where missing
  std::vector<std::vector<double>> cov;   ///< one row per record
  std::vector<int> line;                  ///< source line, 0 for generated rows

  std::size_t rows() const { return time.size(); }
  int column(const std::string& name) const;  ///< -1 when absent
};

/// Parses a CSV file. `require_y` false accepts files without a y column.
LongTable read_table(const std::string& path, bool require_y = true);
LongTable parse_table(const std::string& text, const std::string& source, bool require_y = true);
void write_table(const std::string& path, const LongTable& table);

/// Column lists of the fixed and random designs. "1" is the intercept, "time" the time column.
struct Formula {
  std::vector<std::string> fixed{"1"};
  std::vector<std::string> random;
};

struct Dataset {
  std::vector<SubjectRecord> subjects;  ///< sorted by id, rows by time
  std::vector<std::string> fixed_names;
  std::vector<std::string> random_names;
  int dropped_missing = 0;
};

/// Groups rows by subject and builds the designs. Rows with missing y are
/// dropped unless `keep_missing` is set.
Dataset build_dataset(const LongTable& table, const Formula& formula, const std::string& source,
                      bool keep_missing = false);
Dataset ingest(const std::string& path, const Formula& formula);

struct ModelConfig {
  Formula formula;
  NvmSpec noise;
  NoiseScope scope = NoiseScope::PerObservation;
  NvmSpec re;
  ProcessKind process = ProcessKind::None;
  NvmSpec proc;
  double kappa0 = 1.0;
  GridOptions grid;
};

struct CovariateSpec {
  std::string name;
  std::string kind = "normal";  ///< "normal" | "uniform" | "bernoulli"
  double a = 0.0;               ///< mean / lower bound / probability
  double b = 1.0;               ///< sd / upper bound
  bool per_subject = true;
};

struct SimulateConfig {
  int subjects = 100;
  int n_per_subject = 5;
  double t_max = 10.0;
  std::vector<CovariateSpec> covariates;
  ModelParams truth;
};

struct PredictConfig {
  PredictMode mode = PredictMode::Smooth;
  std::optional<double> cut;
  std::optional<DeclineCriterion> criterion;
  int draws = 1000;
  int burn_in = 50;
  bool with_noise = false;
};

struct RunConfig {
  int schema_version = 1;
  ModelConfig model;
  FitConfig fit;
  SimulateConfig simulate;
  PredictConfig predict;
  std::string text;  ///< the raw JSON document
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& source);

/// Parameter skeleton for the configured model: families, tail parameters,
/// kappa0 and zero skews, with p and q taken from the formula.
ModelParams model_skeleton(const ModelConfig& model);

/// Simulated long table with covariates, times and outcomes.
LongTable simulate_table(const RunConfig& cfg, int subjects, std::uint64_t seed);

/// params.json, fixed_effects.csv and trace.csv under `dir`.
void write_results(const FitResult& fit, const RunConfig& cfg, const std::string& dir);

/// Parameters and design names stored in a params.json.
struct StoredFit {
  ModelParams params;
  Formula formula;
  GridOptions grid;
};
StoredFit read_params(const std::string& path);

void write_predictions(const std::string& path, const std::vector<PredictiveSummary>& summaries);

}  // namespace ngmix
