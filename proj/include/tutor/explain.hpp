#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "tutor/domain.hpp"
#include "tutor/nnet.hpp"
#include "tutor/policy.hpp"

namespace tutor {

enum class BaselineMode { kZeros, kDatasetMean };

const std::string& baseline_mode_name(BaselineMode m);
BaselineMode baseline_mode_from_name(const std::string& name);

struct ExplainConfig {
  BaselineMode baseline = BaselineMode::kZeros;
  int ig_steps = 64;
  // Action plotted in the banded-group chart.
  PedagogicalAction chart_action = PedagogicalAction::kDirectHint;

  void validate() const;  // throws ConfigError
};

/// Midpoint-rule integrated gradients for an arbitrary network: the entry
/// [k][a] attributes output a to input k along the straight path from
/// `baseline` to `x`, so that the per-output attribution sums approximate
/// F_a(x) - F_a(baseline).
std::vector<std::vector<double>> integrated_gradients(
    const MlpSpec& spec, const ParameterSet& params, std::span<const double> x,
    std::span<const double> baseline, int m);

/// feature x action attribution of the policy's action probabilities.
/// Inputs are normalized feature vectors and must lie in [0,1]^8.
std::array<std::array<double, kNumActions>, kNumFeatures> integrated_gradients(
    const PolicyCheckpoint& ckpt, const FeatureVector& x,
    const FeatureVector& baseline, int m);

struct AttributionReport {
  // Mean attribution of each action probability to each feature, over every
  // logged decision point.
  std::array<std::array<double, kNumActions>, kNumFeatures> mean_attribution{};
  // Grouped columns: the pretest-score row, the anxiety row, and the summed
  // remainder.
  std::array<double, kNumActions> pretest_contrib{};
  std::array<double, kNumActions> anxiety_contrib{};
  std::array<double, kNumActions> other_contrib{};
  // Largest per-input |sum_k IG_k - (F_a(x) - F_a(baseline))| seen.
  std::array<double, kNumActions> max_completeness_residual{};
  FeatureVector baseline_vector{};
  BaselineMode baseline_mode = BaselineMode::kZeros;
  int ig_steps = 0;
  std::size_t n_inputs = 0;
};

/// Mean per-(feature, action) attribution over all logged observations.
/// Throws UsageError on a dataset without decision points.
AttributionReport aggregate_attributions(const PolicyCheckpoint& ckpt,
                                         const std::vector<Trajectory>& dataset,
                                         const ExplainConfig& cfg);

/// Pretest/anxiety band edges (inclusive) for the four subgroup cells.
struct GroupBands {
  int pretest_bottom_lo = 0, pretest_bottom_hi = 2;
  int pretest_top_lo = 6, pretest_top_hi = 8;
  int anxiety_low_lo = 9, anxiety_low_hi = 13;
  int anxiety_high_lo = 22, anxiety_high_hi = 45;
};

struct GroupCell {
  std::string pretest_label;
  std::string anxiety_label;
  bool present = false;     // false when no student falls in the cell
  bool degenerate = false;  // single student: interval width is 0 by convention
  int n_students = 0;
  std::array<double, kNumActions> mean_probs{};
  std::array<double, kNumActions> ci_half_width{};  // 1.96 * std / sqrt(n)
};

struct GroupProbabilityReport {
  GroupBands bands;
  // Order: (bottom, low), (bottom, high), (top, low), (top, high).
  std::array<GroupCell, 4> cells;
};

/// Mean policy probabilities per (pretest band x anxiety band) cell with
/// normal-approximation 95% intervals. A student's probabilities are first
/// averaged over their own steps; the student is the unit of analysis.
/// Students outside every band are excluded.
GroupProbabilityReport group_action_probs(const PolicyCheckpoint& ckpt,
                                          const std::vector<Trajectory>& dataset,
                                          const GroupBands& bands = GroupBands());

/// Three grouped columns per action, in percentage points of probability.
std::string attribution_report_csv(const AttributionReport& report);

/// One row per cell and action with mean probability and interval.
std::string group_report_csv(const GroupProbabilityReport& report);

/// Bar chart of one action's probability across the four cells, with error
/// bars. Deterministic output.
std::string group_report_svg(const GroupProbabilityReport& report,
                             PedagogicalAction action);

}  // namespace tutor
