#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairreg/experiment.hpp"

namespace fairreg {

/// Everything a run needs, validated before any computation.
struct RunConfig {
  std::string dataset;
  std::string schema;
  /// Empty means every penalty the task supports (hybrid needs binary labels).
  std::vector<PenaltyKind> penalties;
  std::vector<ModelMode> modes{ModelMode::SingleModel, ModelMode::SeparateModels};
  /// Unset picks gaussian for linear tasks and indicator for logistic tasks.
  std::optional<DistanceWeight::Kind> weight;
  double weight_constant = 1.0;
  std::vector<double> lambdas = default_lambda_grid();
  std::vector<double> gammas = GammaGrid::standard().values;
  std::vector<double> alphas{1.0, 0.8, 0.6, 0.4, 0.2, 0.1};
  double lambda = 0.0;          // cv-gamma
  std::optional<double> gamma;  // pof; cross-validated at lambda = 0 when unset
  std::size_t folds = 10;
  std::optional<std::size_t> pairs;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t jobs = 1;
  std::optional<double> subsample_fraction;
  std::size_t repeats = 1;
  HybridWeights hybrid;
  bool normalize = true;
  int max_iterations = 1000;
  double tolerance = 1e-8;

  void validate() const;
  ExperimentOptions experiment_options(Task task) const;
  DistanceWeight resolved_weight(Task task) const;
  std::vector<PenaltyKind> resolved_penalties(Task task) const;
};

/// Parses a config document. Unknown keys are rejected; relative dataset
/// and schema paths are taken relative to `base_dir`. Grids are either a
/// list or {"min", "max", "count", "include_zero"} (log-spaced).
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// The resolved config as embedded in result files. Worker count and output
/// directory are left out: neither changes any result.
nlohmann::json to_json(const RunConfig& cfg);

/// Model file for penalty-eval:
///   {"mode": "single", "weights": [[...]], "intercepts": [b]}
///   {"mode": "separate", "weights": [[...], [...]], "intercepts": [b1, b2]}
ModelParams parse_model(const nlohmann::json& doc);
ModelParams load_model(const std::filesystem::path& path);
nlohmann::json to_json(const ModelParams& params);

// Commands. Files go to cfg.out, progress lines to `log`.
void cmd_frontier(const RunConfig& cfg, std::ostream& log);
void cmd_pof(const RunConfig& cfg, std::ostream& log);
void cmd_cv_gamma(const RunConfig& cfg, std::ostream& log);
void cmd_penalty_eval(const RunConfig& cfg, const std::filesystem::path& model_path, std::ostream& out);

std::string frontier_csv(const std::vector<FrontierPoint>& points);
std::string pof_csv(const PoFCurve& curve);
std::string cv_csv(const CVReport& report);

/// Validates the curve, then writes it. Nothing is written for a curve
/// that breaks the price-of-fairness contract.
void emit_pof(const PoFCurve& curve, const std::filesystem::path& csv_path);

/// Runs `body` and maps failures to exit codes: 1 for invalid input, 2 for
/// numerical failure. The diagnostic is one line on `err`.
int run_guarded(const std::function<void()>& body, std::ostream& err);

/// Full command line: `fairreg <subcommand> [flags]`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fairreg
