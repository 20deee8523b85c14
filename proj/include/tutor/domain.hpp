#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tutor {

// ---------------------------------------------------------------------------
// Actions

/// The four pedagogical strategies the guide can choose from. The indices are
/// stable and are serialized with every checkpoint and trajectory.
enum class PedagogicalAction : int {
  kDirectHint = 0,
  kAcknowledgment = 1,
  kEncouragement = 2,
  kGuidedPrompt = 3,
};

inline constexpr int kNumActions = 4;

const std::array<std::string, kNumActions>& action_names();
const std::string& action_name(PedagogicalAction a);
PedagogicalAction action_from_name(const std::string& name);  // throws DataError
PedagogicalAction action_from_index(int index);               // throws DataError

// ---------------------------------------------------------------------------
// Observations

inline constexpr int kNumFeatures = 8;
inline constexpr int kNumTaskSteps = 6;

/// Raw student/context features, in the canonical listing order used for all
/// 8-vectors: grade, pre_score, step, failed_attempts, nlp_pos, nlp_neg,
/// nlp_help, anxiety.
struct ObservationVector {
  int grade = 3;            // school grade, 3..5
  int pre_score = 0;        // pretest score, 0..8
  int step = 1;             // task index, 1..6
  int failed_attempts = 0;  // failed attempts in the current step, >= 0
  double nlp_pos = 0.0;     // positive-sentiment score, [0,1]
  double nlp_neg = 0.0;     // negative-sentiment score, [0,1]
  double nlp_help = 0.0;    // help-request score, [0,1]
  int anxiety = 9;          // math-anxiety scale score, 9..45

  /// Empty when all invariants hold, otherwise one message per violation.
  std::vector<std::string> violations() const;
};

const std::array<std::string, kNumFeatures>& feature_names();

using FeatureVector = std::array<double, kNumFeatures>;
using ActionProbs = std::array<double, kNumActions>;

/// Raw feature values in canonical order.
FeatureVector raw_features(const ObservationVector& obs);

// ---------------------------------------------------------------------------
// Normalization

struct FeatureRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Per-feature (min, max) pairs for element-wise affine scaling to [0,1].
struct NormalizationRanges {
  std::array<FeatureRange, kNumFeatures> ranges;

  /// grade [3,5], pre_score [0,8], step [1,6], failed_attempts [0,10],
  /// nlp features [0,1], anxiety [9,45].
  static NormalizationRanges defaults();

  void validate() const;  // throws ConfigError when any max <= min
};

/// clamp((raw - min) / (max - min), 0, 1) per feature, canonical order.
FeatureVector normalize(const ObservationVector& obs,
                        const NormalizationRanges& ranges);

/// Inverse affine map (no clamping); exact for in-range normalized values.
FeatureVector denormalize(const FeatureVector& normalized,
                          const NormalizationRanges& ranges);

// ---------------------------------------------------------------------------
// Trajectories

/// Flags for one decision point.
struct StepEvent {
  bool hint_given = false;
  bool helpful_click = false;
  bool quit = false;
  bool step_completed = false;
};

inline constexpr double kProbFloor = 1e-8;

/// Floors every entry at kProbFloor and renormalizes. Leaves the input
/// bit-for-bit untouched when no entry is below the floor, so ratios against
/// recomputed probabilities stay exactly 1 for the same policy.
ActionProbs floor_probs(const ActionProbs& probs);

/// One decision point as logged: what the policy saw, what it did, with what
/// probabilities, and what happened.
struct LoggedStep {
  ObservationVector observation;
  FeatureVector normalized{};
  PedagogicalAction action = PedagogicalAction::kDirectHint;
  ActionProbs behavior_probs{};
  StepEvent events;
};

inline constexpr int kNumItems = 8;

/// One student's full episode.
struct Trajectory {
  std::string student_id;
  std::vector<LoggedStep> steps;
  std::array<bool, kNumItems> pre_items{};
  std::optional<std::array<bool, kNumItems>> post_items;  // absent after quit
  bool quit = false;
  double terminal_reward = 0.0;

  int pre_score() const;
  std::optional<int> post_score() const;
  int hint_count() const;
  int helpful_count() const;
};

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Checks simplex validity of logged probabilities, quit/posttest consistency
/// and observation range invariants. Violations are returned, not thrown.
ValidationResult validate_trajectory(const Trajectory& t);

// ---------------------------------------------------------------------------
// Line-delimited serialization

inline constexpr int kTrajectorySchemaVersion = 1;

std::string trajectory_to_json_line(const Trajectory& t);
Trajectory trajectory_from_json_line(const std::string& line);  // throws DataError

/// Writes a header record followed by one trajectory per line.
void write_trajectory_file(const std::string& path,
                           const std::vector<Trajectory>& trajectories);

/// Reads a trajectory file, checking the header and schema version.
std::vector<Trajectory> read_trajectory_file(const std::string& path);

}  // namespace tutor
