#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tutor/nnet.hpp"
#include "tutor/policy.hpp"

namespace tutor {

enum class OfflineAlgorithm { kBc, kPois };

const std::string& offline_algorithm_name(OfflineAlgorithm a);
OfflineAlgorithm offline_algorithm_from_name(const std::string& name);

struct OfflineConfig {
  OfflineAlgorithm algorithm = OfflineAlgorithm::kBc;
  std::vector<int> hidden_dims{16, 16};
  int epochs = 10;
  double ess_penalty = 0.0;  // weight of the normalized-ESS bonus (POIS only)
  Activation activation = Activation::kGelu;
  double learning_rate = 0.0025;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// The hyperparameter grid searched by the selection harness. Defaults
/// enumerate 2 algorithms x 6 hidden shapes x 3 epoch budgets x 3 ESS
/// penalties = 108 configurations.
struct OfflineGrid {
  std::vector<OfflineAlgorithm> algorithms{OfflineAlgorithm::kBc,
                                           OfflineAlgorithm::kPois};
  std::vector<std::vector<int>> hidden_shapes{{4}, {8}, {16}, {4, 4}, {8, 8}, {16, 16}};
  std::vector<int> epoch_choices{1, 5, 10};
  std::vector<double> ess_penalties{0.0, 0.01, 0.05};
  Activation activation = Activation::kGelu;
  double learning_rate = 0.0025;

  /// Deterministic order: algorithm-major, then shape, epochs, penalty.
  std::vector<OfflineConfig> enumerate() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Off-policy evaluation

/// Product over logged steps of pi(a_t|s_t) / p(a_t|s_t), accumulated in log
/// space. An empty trajectory has weight 1. Throws DataError when a logged
/// action carries zero behavior probability.
double importance_weight(const PolicyCheckpoint& ckpt, const Trajectory& traj);

struct WisResult {
  double estimate = 0.0;  // sum(w_i R_i) / sum(w_i)
  double ess = 0.0;       // (sum w)^2 / sum w^2
};

/// Weighted importance sampling estimate of the policy's value on logged
/// data, with the effective sample size of the weights. Weights are computed
/// with a max-log shift, under which both outputs are exactly invariant.
/// Throws UsageError on an empty dataset.
WisResult wis_evaluate(const PolicyCheckpoint& ckpt,
                       const std::vector<Trajectory>& dataset);

// ---------------------------------------------------------------------------
// Training

struct OfflineTrainResult {
  PolicyCheckpoint ckpt;
  /// One entry per epoch: BC records the mean KL over the dataset after the
  /// epoch; POIS records the negated objective (lower is better for both).
  std::vector<double> epoch_losses;
  std::vector<std::string> warnings;
};

/// Mean over logged steps of KL(model(s) || behavior(.|s)).
double bc_loss(const std::vector<Trajectory>& dataset, const MlpSpec& spec,
               const ParameterSet& params);

/// Behavior cloning: minimizes the mean KL above with cfg.epochs passes of
/// per-step Adam updates, visiting steps in dataset order.
OfflineTrainResult bc_train(const std::vector<Trajectory>& dataset,
                            const OfflineConfig& cfg,
                            const NormalizationRanges& ranges =
                                NormalizationRanges::defaults());

/// The maximized POIS objective: WIS(pi) + ess_penalty * ESS(pi)/n, where
/// ESS/n uses self-normalized weights and lies in (0, 1].
double pois_objective(const std::vector<Trajectory>& dataset, const MlpSpec& spec,
                      const ParameterSet& params, double ess_penalty);

/// Analytic parameter gradient of pois_objective; gradients flow through the
/// estimate and the weights.
ParameterSet pois_gradient(const std::vector<Trajectory>& dataset,
                           const MlpSpec& spec, const ParameterSet& params,
                           double ess_penalty);

/// Importance-sampling policy optimization: cfg.epochs full-batch Adam
/// ascent steps on pois_objective. Records an ESS-collapse warning (ess
/// within 1e-9 of 1 with more than one trajectory) and keeps training.
OfflineTrainResult pois_train(const std::vector<Trajectory>& dataset,
                              const OfflineConfig& cfg,
                              const NormalizationRanges& ranges =
                                  NormalizationRanges::defaults());

/// Dispatch on cfg.algorithm.
OfflineTrainResult train_offline_config(const std::vector<Trajectory>& dataset,
                                        const OfflineConfig& cfg,
                                        const NormalizationRanges& ranges =
                                            NormalizationRanges::defaults());

// ---------------------------------------------------------------------------
// Selection harness

/// Deterministic split by student id: ids are shuffled with split_seed, the
/// first ceil(n/2) go to train. Sizes differ by at most one. Throws
/// UsageError with fewer than two students.
void split_dataset(const std::vector<Trajectory>& dataset, std::uint64_t split_seed,
                   std::vector<Trajectory>* train, std::vector<Trajectory>* validation);

struct SplitOutcome {
  double wis = 0.0;  // -inf when training or evaluation failed
  double ess = 0.0;
  bool failed = false;
  std::string error;
};

struct ConfigOutcome {
  int config_index = 0;
  OfflineConfig config;
  std::vector<SplitOutcome> splits;
  double mean_wis = 0.0;  // -inf when any split failed
  double std_wis = 0.0;   // sample std over splits; NaN when mean is -inf
  double mean_ess = 0.0;
};

struct SelectionReport {
  std::uint64_t base_seed = 0;
  int n_splits = 0;
  std::vector<std::uint64_t> split_seeds;
  std::vector<ConfigOutcome> configs;
  int chosen_index = -1;
  PolicyCheckpoint final_checkpoint;  // chosen config retrained on everything
  std::string final_checkpoint_path;  // filled by the caller when saved
};

/// The selection rule: argmax of mean_wis, ties resolved by higher
/// mean_ess, then fewer policy parameters, then the lower config index.
int select_best_config(const std::vector<ConfigOutcome>& outcomes);

/// Trains every grid configuration on each train half, scores it by WIS on
/// the matching validation half, averages over splits, picks the best via
/// select_best_config and retrains the winner on the full dataset. Splits
/// and per-task seeds derive from base_seed alone, so any thread count
/// yields an identical report.
SelectionReport grid_search(const std::vector<Trajectory>& dataset,
                            const OfflineGrid& grid, int n_splits,
                            std::uint64_t base_seed, int threads = 1);

std::string selection_report_to_json(const SelectionReport& report);
std::string selection_report_csv(const SelectionReport& report);

}  // namespace tutor
