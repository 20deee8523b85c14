#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tutor/domain.hpp"
#include "tutor/policy.hpp"
#include "tutor/reward.hpp"
#include "tutor/rng.hpp"

namespace tutor {

// Hidden per-student state. The policy never sees these directly; they drive
// the interaction dynamics and the observable NLP/affect signals.
struct StudentLatent {
  double knowledge = 0.0;      // in [0, 1]
  double frustration = 0.0;    // in [0, 1]
  double help_seeking = 0.0;   // in [0, 1]
  int anxiety = 9;             // STAI-CH style score, 9..45
  int grade = 3;               // 3..5
  std::array<double, kNumTaskSteps> difficulty{};
  double quit_hazard_base = 0.0;  // per-student intercept of the quit logit
};

struct PopulationConfig {
  double knowledge_logit_mean = -0.2;
  double knowledge_logit_sd = 0.9;
  double frustration_init_mean = 0.1;
  double frustration_init_sd = 0.06;
  double help_seeking_logit_mean = 0.0;
  double help_seeking_logit_sd = 0.8;
  double anxiety_mean = 18.0;
  double anxiety_sd = 7.5;
  std::array<double, 3> grade_probs{0.3334, 0.3333, 0.3333};  // grades 3,4,5
  double difficulty_sd = 0.05;
  double quit_hazard_base_sd = 0.3;
};

struct TaskConfig {
  std::array<double, kNumTaskSteps> difficulty{0.15, 0.3, 0.45, 0.6, 0.75, 0.9};
  int max_messages_per_step = 5;
};

struct InteractionConfig {
  double success_knowledge_coef = 3.0;
  double success_difficulty_coef = 4.0;
  std::array<double, kNumActions> success_action_bonus{2.2, 0.0, 0.3, 1.1};
  std::array<double, kNumActions> knowledge_gain_on_success{0.02, 0.05, 0.05, 0.12};
  double encouragement_frustration_relief = 0.15;
  double failure_frustration_increase = 0.12;
  double anxiety_frustration_coef = 0.8;
  double helpful_click_scale = 3.0;
};

struct QuitConfig {
  double base = -4.6;
  double frustration_coef = 3.0;
  double failed_attempts_coef = 0.25;
  double help_seeking_coef = 1.0;
};

// Observable NLP proxies are squashed logistic functions of the latents plus
// Gaussian noise, so they stay in (0, 1) by construction.
struct NlpEmissionConfig {
  double pos_weight = 2.0;
  double pos_offset = -1.0;
  double neg_weight = 2.5;
  double neg_offset = -2.2;
  double help_weight = 2.0;
  double help_offset = -1.0;
  double noise_sd = 0.4;
};

struct SimulatorConfig {
  PopulationConfig population;
  TaskConfig task;
  InteractionConfig interaction;
  QuitConfig quit;
  NlpEmissionConfig nlp;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

SimulatorConfig default_simulator_config();
SimulatorConfig simulator_config_from_json(const std::string& json_text);
SimulatorConfig load_simulator_config(const std::string& path);
std::string simulator_config_to_json(const SimulatorConfig& cfg);

double logistic(double x);

// Mutable per-episode bookkeeping alongside the latent state.
struct EpisodeContext {
  int step = 1;                    // current task step, 1-based
  int failed_attempts = 0;         // failures on the current step
  int messages_in_step = 0;        // tutor messages spent on the current step
  int pre_score = 0;
  bool quit = false;

  bool finished() const { return quit || step > kNumTaskSteps; }
};

StudentLatent spawn_student(const SimulatorConfig& cfg, Rng& rng,
                            std::array<bool, kNumItems>* pre_items = nullptr);

// Observation snapshot for the current state; draws fresh NLP noise.
ObservationVector observe(const StudentLatent& latent, const EpisodeContext& ctx,
                          const SimulatorConfig& cfg, Rng& rng);

// Probability that the student quits given the current affective state, as
// used after a failed attempt. Pure; exposed for tests.
double quit_probability(const StudentLatent& latent, double frustration,
                        int failed_attempts, const SimulatorConfig& cfg);

double success_probability(const StudentLatent& latent, int step,
                           PedagogicalAction action, const SimulatorConfig& cfg);

struct InteractionResult {
  StepEvent events;
  // Absent when the interaction ended the episode (quit or last step closed).
  std::optional<ObservationVector> next_observation;
};

// Applies one tutor action. Mutates latent affect/knowledge and the episode
// bookkeeping. Throws UsageError if the episode already finished.
InteractionResult step_interaction(StudentLatent& latent, EpisodeContext& ctx,
                                   PedagogicalAction action, const SimulatorConfig& cfg,
                                   Rng& rng);

// Rolls a full episode under the given policy: spawn, pretest, message loop,
// posttest (skipped on quit), terminal reward.
Trajectory run_episode(const PolicyCheckpoint& policy, const SimulatorConfig& cfg,
                       const RewardParams& reward, Rng& rng, std::string student_id);

// Runs `count` episodes with per-episode substreams of `base_seed`, so any
// prefix of the batch is reproducible independent of the rest.
std::vector<Trajectory> collect_episodes(const PolicyCheckpoint& policy,
                                         const SimulatorConfig& cfg,
                                         const RewardParams& reward,
                                         std::uint64_t base_seed, int count,
                                         int first_student_index = 0);

}  // namespace tutor
