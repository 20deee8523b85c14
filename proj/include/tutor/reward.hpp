#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tutor/domain.hpp"

namespace tutor {

/// Terminal-reward coefficients: R = clipped learning gain - lambda * hints
/// + beta * helpful clicks + quit penalty (when the student quits).
struct RewardParams {
  double lambda_hint = 0.013;
  double beta_helpful = 0.1;
  double quit_penalty = -8.0;
  int n_items = 8;

  void validate() const;  // throws ConfigError
};

/// Sum over items of max(0, post - pre), minus the hint penalty, plus the
/// helpful-click bonus, plus the quit penalty. A quit before the posttest
/// contributes zero gain. Throws UsageError on an item-length mismatch.
double terminal_reward(std::span<const bool> pre_items,
                       std::optional<std::span<const bool>> post_items,
                       int n_hints, int n_helpful, bool quit,
                       const RewardParams& params);

double trajectory_terminal_reward(const Trajectory& t,
                                  const RewardParams& params);

struct RewardEvent {
  enum class Kind { kHint, kHelpful, kQuit, kPosttest };
  Kind kind;
  int step_index;  // -1 for the posttest event
  double value;
};

/// Per-event reward stream: -lambda at each hint, +beta at each helpful
/// click, the quit penalty at quit, and the clipped-gain sum at posttest
/// completion (omitted when zero). Sums to the terminal reward.
std::vector<RewardEvent> event_rewards(const Trajectory& t,
                                       const RewardParams& params);

/// Immediate reward per logged step, with the posttest gain folded into the
/// final step. Sums to the terminal reward when the trajectory has steps.
std::vector<double> step_rewards(const Trajectory& t,
                                 const RewardParams& params);

/// Normalized learning gain (post - pre) / (max - pre); empty at a perfect
/// pretest, where the ratio is undefined.
std::optional<double> nlg(int pre_score, int post_score, int max_score = 8);

}  // namespace tutor
