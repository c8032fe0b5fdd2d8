#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oodshape/intervals.hpp"
#include "oodshape/metrics.hpp"
#include "oodshape/optimizer.hpp"
#include "oodshape/scoring.hpp"
#include "oodshape/shaping.hpp"
#include "oodshape/tensor_io.hpp"

namespace oodshape::bench {

/// How an "ours" method obtains theta.
enum class ThetaFit { IdOnly, WithOod, Alternating };

/// One entry of the config's "methods" list, before data-dependent
/// thresholds are resolved.
struct MethodSpec {
  std::string name;  // identity, ours-v, ours-e, react, bfact, vra-p, ash-p, ash-b, ash-s, dice
  std::string label; // row label, unique within a config
  ThetaFit fit = ThetaFit::IdOnly;
  std::optional<double> t;       // react / bfact absolute threshold
  std::optional<double> t_pct;   // react / bfact threshold as a training-set percentile
  int n = 2;                     // bfact order
  std::optional<double> low, high;         // vra-p absolute
  std::optional<double> low_pct, high_pct; // vra-p percentiles
  double p = 0.0;                // ash / dice percentile

  bool is_ours() const { return name == "ours-v" || name == "ours-e"; }
};

struct ScoreSpec {
  std::string label;
  ScoreKind kind;
};

struct BenchmarkConfig {
  std::filesystem::path weights_path;
  std::filesystem::path bias_path;
  DatasetEntry id_train;
  DatasetEntry id_test;
  std::vector<DatasetEntry> ood;
  std::optional<DatasetEntry> fit_ood;
  std::vector<MethodSpec> methods;
  std::vector<ScoreSpec> scores;
  std::size_t k = kDefaultBins;
  double lo_pct = kDefaultLowPercentile;
  double hi_pct = kDefaultHighPercentile;
  OutOfRange out_of_range = OutOfRange::Zero;
  std::optional<std::size_t> subsample; // rows of id_train used for E[I(z)]
  std::uint64_t seed = 0;
  std::size_t alternating_iters = 10;
  std::optional<std::size_t> alternating_subsample = 10000;
  std::optional<std::size_t> diagnostics_subsample = 10000;
  std::filesystem::path output_dir;
  bool write_scores = false;
  nlohmann::json echo;
};

/// Parses and validates a config object; relative paths resolve against
/// `base_dir`. Unknown keys are rejected.
BenchmarkConfig parse_config(const nlohmann::json &j, const std::filesystem::path &base_dir);
BenchmarkConfig load_config(const std::filesystem::path &path);

struct BenchmarkData {
  LinearClassifier classifier;
  FeatureMatrix id_train;
  FeatureMatrix id_test;
  std::vector<FeatureMatrix> ood;
  std::optional<FeatureMatrix> fit_ood;
};

BenchmarkData load_data(const BenchmarkConfig &config);

struct RunReport {
  IntervalPartition partition;
  std::vector<EvalResult> rows;     // ordered by dataset, method, score
  std::vector<EvalResult> averages; // one per (method, score), dataset "AVERAGE"
  std::vector<std::pair<std::string, ThetaSolution>> thetas;
  nlohmann::json config_echo;
  double wall_time_s = 0.0;
};

RunReport run(const BenchmarkConfig &config, const BenchmarkData &data);

/// report.csv and report.json under config.output_dir. Wall time is not
/// written so repeated runs produce identical files.
void write_report(const RunReport &report, const std::filesystem::path &dir);

std::string report_csv(const RunReport &report);
nlohmann::json report_json(const RunReport &report);

struct SweepRow {
  std::size_t k = 0;
  double lo_pct = 0.0;
  double hi_pct = 0.0;
  std::string method;
  std::string score;
  double auroc = 0.0;
  double fpr95 = 0.0;
};

/// Refits theta for every "ours" method at each K with alpha/beta held
/// fixed; K = 0 evaluates identity shaping under the method's score.
std::vector<SweepRow> sweep_k(const BenchmarkConfig &config, const BenchmarkData &data,
                              const std::vector<std::size_t> &k_values);

/// Refits the partition limits (and theta) for each percentile pair.
std::vector<SweepRow> sweep_percentiles(const BenchmarkConfig &config, const BenchmarkData &data,
                                        const std::vector<std::pair<double, double>> &pairs);

std::string sweep_k_csv(const std::vector<SweepRow> &rows);
std::string sweep_pct_csv(const std::vector<SweepRow> &rows);

/// Per-bin theta for each configured method: analytic for element-wise
/// methods, empirical (pooled over id_test and every OOD set) for ASH.
std::string theta_curves_csv(const BenchmarkConfig &config, const BenchmarkData &data);

struct DiagnosticsReport {
  std::vector<std::pair<std::string, ExpectationDiagnostics>> expectations;
  std::vector<std::pair<std::string, double>> changed_weight_ratios;
  IntervalPartition partition;
  BinStats weight_profile;
};

DiagnosticsReport diagnostics(const BenchmarkConfig &config, const BenchmarkData &data);

/// diagnostics.csv, changed_weights.csv and weight_profile.csv under `dir`.
void write_diagnostics(const DiagnosticsReport &report, const std::filesystem::path &dir);

void write_text(const std::filesystem::path &path, const std::string &text);

} // namespace oodshape::bench
