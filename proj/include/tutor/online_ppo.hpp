#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tutor/nnet.hpp"
#include "tutor/policy.hpp"
#include "tutor/reward.hpp"
#include "tutor/simulator.hpp"

namespace tutor {

struct PpoConfig {
  double clip_epsilon = 0.2;
  double learning_rate = 0.0025;
  int students_per_update = 10;
  int epochs_per_update = 4;
  double discount = 1.0;
  double gae_lambda = 1.0;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  int total_students = 280;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct TrainingDiagnostics {
  int update_index = 0;
  double mean_reward = 0.0;
  double clip_fraction = 0.0;  // in [0,1]
  double approx_kl = 0.0;      // KL(pre-update || post-update), batch mean
  double value_loss = 0.0;     // value MSE after the update
  double entropy = 0.0;        // policy entropy after the update
};

struct StepReturn {
  double advantage = 0.0;
  double ret = 0.0;  // discounted reward-to-go, the value target
};

/// Per-step returns and generalized advantage estimates for one trajectory,
/// using the checkpoint's value net as baseline. With discount = gae_lambda
/// = 1 the advantage reduces to return - value(state).
std::vector<StepReturn> compute_advantages(const Trajectory& traj,
                                           const PolicyCheckpoint& value_ckpt,
                                           const PpoConfig& cfg,
                                           const RewardParams& reward);

/// One flattened decision point ready for the update loop.
struct PpoStepSample {
  FeatureVector normalized{};
  int action = 0;
  double behavior_prob = 0.0;  // logged probability of the taken action
  double advantage = 0.0;      // batch-normalized
  double ret = 0.0;
};

/// Flattens a batch into step samples and normalizes advantages to zero
/// mean / unit variance (skipped when the batch variance is < 1e-12).
std::vector<PpoStepSample> prepare_batch(const std::vector<Trajectory>& batch,
                                         const PolicyCheckpoint& value_ckpt,
                                         const PpoConfig& cfg,
                                         const RewardParams& reward);

/// The maximized objective: mean clipped surrogate + entropy_coef * entropy
/// - value_coef * value MSE.
double ppo_objective(const std::vector<PpoStepSample>& samples,
                     const MlpSpec& policy_spec, const ParameterSet& policy_params,
                     const MlpSpec& value_spec, const ParameterSet& value_params,
                     const PpoConfig& cfg);

struct PpoGradients {
  ParameterSet policy;          // ascent direction d(objective)/d(policy)
  ParameterSet value;           // ascent direction d(objective)/d(value)
  double clip_fraction = 0.0;   // fraction of steps with |ratio - 1| > eps
};

PpoGradients ppo_gradients(const std::vector<PpoStepSample>& samples,
                           const MlpSpec& policy_spec,
                           const ParameterSet& policy_params,
                           const MlpSpec& value_spec,
                           const ParameterSet& value_params,
                           const PpoConfig& cfg);

/// Runs epochs_per_update full-batch Adam passes on the clipped-surrogate
/// objective, mutating the checkpoint's policy and value parameters and the
/// optimizer states in place.
TrainingDiagnostics ppo_update(PolicyCheckpoint& ckpt, AdamState& policy_adam,
                               AdamState& value_adam,
                               const std::vector<Trajectory>& batch,
                               const PpoConfig& cfg, const RewardParams& reward);

struct TrainOnlineResult {
  std::string run_dir;
  std::string final_checkpoint_path;
  std::string diagnostics_path;
  int updates_run = 0;    // updates executed by this invocation
  int total_updates = 0;  // completed updates recorded in the run directory
  std::vector<TrainingDiagnostics> diagnostics;
};

/// Full online phase: alternates collecting students_per_update episodes and
/// one PPO update until total_students is consumed. Writes a config
/// snapshot, an initial checkpoint, one checkpoint and diagnostics row per
/// update, a final checkpoint, and a resumable trainer state. A rerun over a
/// partially-written run directory resumes after the last completed update
/// and produces byte-identical artifacts.
TrainOnlineResult train_online(const PpoConfig& cfg, const SimulatorConfig& sim,
                               const RewardParams& reward,
                               const std::string& out_dir);

}  // namespace tutor
