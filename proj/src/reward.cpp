#include "tutor/reward.hpp"

#include "tutor/errors.hpp"

namespace tutor {

void RewardParams::validate() const {
  if (lambda_hint < 0) throw ConfigError("reward.lambda_hint must be >= 0");
  if (beta_helpful < 0) throw ConfigError("reward.beta_helpful must be >= 0");
  if (quit_penalty > 0) throw ConfigError("reward.quit_penalty must be <= 0");
  if (n_items < 1) throw ConfigError("reward.n_items must be >= 1");
}

namespace {

double clipped_gain(std::span<const bool> pre, std::span<const bool> post) {
  double gain = 0.0;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (post[i] && !pre[i]) gain += 1.0;
  }
  return gain;
}

}  // namespace

double terminal_reward(std::span<const bool> pre_items,
                       std::optional<std::span<const bool>> post_items,
                       int n_hints, int n_helpful, bool quit,
                       const RewardParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(params.n_items);
  if (pre_items.size() != n || (post_items && post_items->size() != n)) {
    throw UsageError("item vector length does not match n_items");
  }
  if (n_hints < 0 || n_helpful < 0) {
    throw UsageError("event counts must be non-negative");
  }
  const double gain = post_items ? clipped_gain(pre_items, *post_items) : 0.0;
  return gain - params.lambda_hint * n_hints + params.beta_helpful * n_helpful +
         (quit ? params.quit_penalty : 0.0);
}

double trajectory_terminal_reward(const Trajectory& t,
                                  const RewardParams& params) {
  std::optional<std::span<const bool>> post;
  if (t.post_items) post = std::span<const bool>(*t.post_items);
  return terminal_reward(t.pre_items, post, t.hint_count(), t.helpful_count(),
                         t.quit, params);
}

std::vector<RewardEvent> event_rewards(const Trajectory& t,
                                       const RewardParams& params) {
  params.validate();
  std::vector<RewardEvent> events;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const StepEvent& ev = t.steps[i].events;
    const int idx = static_cast<int>(i);
    if (ev.hint_given) {
      events.push_back({RewardEvent::Kind::kHint, idx, -params.lambda_hint});
    }
    if (ev.helpful_click) {
      events.push_back({RewardEvent::Kind::kHelpful, idx, params.beta_helpful});
    }
    if (ev.quit) {
      events.push_back({RewardEvent::Kind::kQuit, idx, params.quit_penalty});
    }
  }
  if (t.post_items) {
    const double gain = clipped_gain(t.pre_items, *t.post_items);
    if (gain != 0.0) {
      events.push_back({RewardEvent::Kind::kPosttest, -1, gain});
    }
  }
  return events;
}

std::vector<double> step_rewards(const Trajectory& t,
                                 const RewardParams& params) {
  std::vector<double> rewards(t.steps.size(), 0.0);
  if (t.steps.empty()) return rewards;
  for (const RewardEvent& ev : event_rewards(t, params)) {
    const std::size_t idx = ev.step_index < 0
                                ? t.steps.size() - 1
                                : static_cast<std::size_t>(ev.step_index);
    rewards[idx] += ev.value;
  }
  return rewards;
}

std::optional<double> nlg(int pre_score, int post_score, int max_score) {
  if (pre_score < 0 || post_score < 0 || pre_score > max_score ||
      post_score > max_score) {
    throw UsageError("scores must lie in [0, max_score]");
  }
  if (pre_score == max_score) return std::nullopt;
  return static_cast<double>(post_score - pre_score) /
         static_cast<double>(max_score - pre_score);
}

}  // namespace tutor
