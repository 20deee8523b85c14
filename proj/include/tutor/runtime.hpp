#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tutor/explain.hpp"
#include "tutor/offline_rl.hpp"
#include "tutor/online_ppo.hpp"
#include "tutor/reward.hpp"
#include "tutor/simulator.hpp"

namespace tutor {

/// Everything a run needs, loaded and validated up front. Every section is
/// optional in the JSON; omitted sections keep these defaults.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/run";
  SimulatorConfig simulator = default_simulator_config();
  RewardParams reward;
  PpoConfig ppo;
  OfflineGrid grid;
  int offline_splits = 10;
  int offline_threads = 1;
  ExplainConfig explain;
};

/// Parses and validates an experiment config. A "simulator" string value is
/// treated as a path relative to `base_dir` and loaded immediately, so
/// every referenced file is checked before any computation. Unknown keys are
/// rejected with their field path.
ExperimentConfig experiment_config_from_json(const std::string& json_text,
                                             const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

// ---------------------------------------------------------------------------
// Commands. These are the CLI entry points, exposed as plain functions so
// tests drive them directly.

struct SimulateSummary {
  int n_students = 0;
  double mean_pretest = 0.0;
  double mean_reward = 0.0;
  double quit_rate = 0.0;
  std::string out_path;
};

/// Rolls n_students episodes under `policy_source` ("uniform" or a
/// checkpoint path) and writes them as line-delimited records.
SimulateSummary cmd_simulate(const ExperimentConfig& cfg,
                             const std::string& policy_source, int n_students,
                             const std::string& out_path);

/// Online phase into cfg.out_dir. Resumable; see train_online.
TrainOnlineResult cmd_train_online(const ExperimentConfig& cfg);

/// Grid search over cfg.grid on the logged trajectories, then retrains the
/// winner on everything. Writes selection_report.json, selection_report.csv
/// and final_checkpoint.txt into cfg.out_dir.
SelectionReport cmd_train_offline(const ExperimentConfig& cfg,
                                  const std::string& data_path);

struct EvaluationRecord {
  std::string mode;       // "wis" or "rollout"
  double estimate = 0.0;  // WIS estimate or rollout mean
  double ess = 0.0;       // wis mode only
  double std_dev = 0.0;   // rollout mode only (sample std)
  int n = 0;              // trajectories evaluated / episodes rolled
};

/// mode "wis": off-policy estimate from a trajectory file. mode "rollout":
/// fresh simulated episodes under the checkpoint. `out_path` (optional)
/// receives the record as JSON.
EvaluationRecord cmd_evaluate(const ExperimentConfig& cfg,
                              const std::string& ckpt_path, const std::string& mode,
                              const std::string& data_path, int rollout_students,
                              const std::string& out_path = "");

struct ExplainOutputs {
  AttributionReport attribution;
  GroupProbabilityReport groups;
  std::string attribution_csv_path;
  std::string groups_csv_path;
  std::string groups_svg_path;
};

/// Feature attributions and banded group probabilities for a checkpoint on
/// logged data; writes CSV + SVG into cfg.out_dir.
ExplainOutputs cmd_explain(const ExperimentConfig& cfg, const std::string& ckpt_path,
                           const std::string& data_path);

/// Human-readable summary of a trajectory file, a checkpoint, or a run
/// directory.
std::string report_summary(const std::string& path);

}  // namespace tutor
