#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "tutor/domain.hpp"
#include "tutor/nnet.hpp"
#include "tutor/rng.hpp"

namespace tutor {

inline constexpr int kCheckpointSchemaVersion = 1;

namespace provenance {
inline constexpr const char* kOnlinePpo = "online-ppo";
inline constexpr const char* kBc = "bc";
inline constexpr const char* kPois = "pois";
inline constexpr const char* kUniform = "uniform";
}  // namespace provenance

/// Self-contained policy snapshot: network topology and weights, optional
/// value network, the normalization ranges the nets were trained against,
/// and the action ordering. Immutable after construction.
struct PolicyCheckpoint {
  MlpSpec policy_spec;
  ParameterSet policy_params;
  std::optional<MlpSpec> value_spec;
  std::optional<ParameterSet> value_params;
  NormalizationRanges ranges = NormalizationRanges::defaults();
  std::array<std::string, kNumActions> actions = action_names();
  std::string provenance = provenance::kUniform;
  int schema_version = kCheckpointSchemaVersion;
  std::uint64_t seed_lineage = 0;

  bool has_value_net() const { return value_spec.has_value(); }
  void validate() const;  // throws ConfigError
};

/// Zero-weight single-layer softmax policy: uniform over the four actions.
PolicyCheckpoint make_uniform_checkpoint(
    const NormalizationRanges& ranges = NormalizationRanges::defaults());

/// Normalizes the observation with the embedded ranges and runs the policy
/// net. Returns a strictly positive distribution over the four actions.
ActionProbs action_distribution(const PolicyCheckpoint& ckpt,
                                const ObservationVector& obs);

/// Same, for an observation already normalized to [0,1]^8.
ActionProbs action_distribution_normalized(const PolicyCheckpoint& ckpt,
                                           const FeatureVector& normalized);

/// Inverse-CDF sample in action-index order. Returns the action and its log
/// probability. Throws NumericError when any component is <= 0.
std::pair<PedagogicalAction, double> sample_action(const ActionProbs& dist,
                                                   Rng& rng);

/// Scalar state-value estimate. Throws UsageError without a value net.
double state_value(const PolicyCheckpoint& ckpt, const ObservationVector& obs);
double state_value_normalized(const PolicyCheckpoint& ckpt,
                              const FeatureVector& normalized);

/// Checkpoint file I/O: one self-describing JSON record per file, bit-exact
/// round-trip of every weight.
void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path);
PolicyCheckpoint load_checkpoint(const std::string& path);  // throws DataError

std::string checkpoint_to_json(const PolicyCheckpoint& ckpt);
PolicyCheckpoint checkpoint_from_json(const std::string& text);

}  // namespace tutor
