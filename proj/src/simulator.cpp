#include "tutor/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tutor/default_sim_config.hpp"
#include "tutor/errors.hpp"

namespace tutor {

namespace {

using nlohmann::json;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// --- config parsing helpers; every error names the offending field path ---

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key: " + path + "." + it.key());
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void read_num(const json& j, const std::string& path, const char* key, double* out) {
  const json* v = find(j, key);
  if (!v) return;
  if (!v->is_number()) throw ConfigError(path + "." + key + ": expected a number");
  *out = v->get<double>();
}

void read_int(const json& j, const std::string& path, const char* key, int* out) {
  const json* v = find(j, key);
  if (!v) return;
  if (!v->is_number_integer())
    throw ConfigError(path + "." + key + ": expected an integer");
  *out = v->get<int>();
}

template <std::size_t N>
void read_num_array(const json& j, const std::string& path, const char* key,
                    std::array<double, N>* out) {
  const json* v = find(j, key);
  if (!v) return;
  if (!v->is_array() || v->size() != N)
    throw ConfigError(path + "." + key + ": expected an array of " +
                      std::to_string(N) + " numbers");
  for (std::size_t i = 0; i < N; ++i) {
    if (!(*v)[i].is_number())
      throw ConfigError(path + "." + key + "[" + std::to_string(i) +
                        "]: expected a number");
    (*out)[i] = (*v)[i].get<double>();
  }
}

void require_nonneg(double v, const std::string& field) {
  if (!(v >= 0.0)) throw ConfigError(field + ": must be >= 0");
}

}  // namespace

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void SimulatorConfig::validate() const {
  require_nonneg(population.knowledge_logit_sd, "population.knowledge_logit_sd");
  require_nonneg(population.frustration_init_sd, "population.frustration_init_sd");
  require_nonneg(population.help_seeking_logit_sd, "population.help_seeking_logit_sd");
  require_nonneg(population.anxiety_sd, "population.anxiety_sd");
  require_nonneg(population.difficulty_sd, "population.difficulty_sd");
  require_nonneg(population.quit_hazard_base_sd, "population.quit_hazard_base_sd");
  double prob_sum = 0.0;
  for (std::size_t i = 0; i < population.grade_probs.size(); ++i) {
    if (!(population.grade_probs[i] > 0.0))
      throw ConfigError("population.grade_probs[" + std::to_string(i) +
                        "]: must be > 0");
    prob_sum += population.grade_probs[i];
  }
  if (std::abs(prob_sum - 1.0) > 1e-6)
    throw ConfigError("population.grade_probs: must sum to 1");

  if (task.max_messages_per_step < 1)
    throw ConfigError("task.max_messages_per_step: must be >= 1");

  for (int a = 0; a < kNumActions; ++a) {
    require_nonneg(interaction.knowledge_gain_on_success[a],
                   "interaction.knowledge_gain_on_success[" + std::to_string(a) + "]");
  }
  require_nonneg(interaction.encouragement_frustration_relief,
                 "interaction.encouragement_frustration_relief");
  require_nonneg(interaction.failure_frustration_increase,
                 "interaction.failure_frustration_increase");
  require_nonneg(interaction.anxiety_frustration_coef,
                 "interaction.anxiety_frustration_coef");
  require_nonneg(interaction.helpful_click_scale, "interaction.helpful_click_scale");

  require_nonneg(quit.frustration_coef, "quit.frustration_coef");
  require_nonneg(quit.failed_attempts_coef, "quit.failed_attempts_coef");
  require_nonneg(quit.help_seeking_coef, "quit.help_seeking_coef");

  require_nonneg(nlp.noise_sd, "nlp.noise_sd");
}

SimulatorConfig simulator_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("simulator config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("simulator config: expected a JSON object");
  check_keys(j, "simulator",
             {"schema_version", "population", "task", "interaction", "quit", "nlp"});

  if (const json* v = find(j, "schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != 1)
      throw ConfigError("simulator.schema_version: expected 1");
  }

  SimulatorConfig cfg;
  if (const json* sec = find(j, "population")) {
    const std::string p = "simulator.population";
    if (!sec->is_object()) throw ConfigError(p + ": expected an object");
    check_keys(*sec, p,
               {"knowledge_logit_mean", "knowledge_logit_sd", "frustration_init_mean",
                "frustration_init_sd", "help_seeking_logit_mean",
                "help_seeking_logit_sd", "anxiety_mean", "anxiety_sd", "grade_probs",
                "difficulty_sd", "quit_hazard_base_sd"});
    auto& c = cfg.population;
    read_num(*sec, p, "knowledge_logit_mean", &c.knowledge_logit_mean);
    read_num(*sec, p, "knowledge_logit_sd", &c.knowledge_logit_sd);
    read_num(*sec, p, "frustration_init_mean", &c.frustration_init_mean);
    read_num(*sec, p, "frustration_init_sd", &c.frustration_init_sd);
    read_num(*sec, p, "help_seeking_logit_mean", &c.help_seeking_logit_mean);
    read_num(*sec, p, "help_seeking_logit_sd", &c.help_seeking_logit_sd);
    read_num(*sec, p, "anxiety_mean", &c.anxiety_mean);
    read_num(*sec, p, "anxiety_sd", &c.anxiety_sd);
    read_num_array(*sec, p, "grade_probs", &c.grade_probs);
    read_num(*sec, p, "difficulty_sd", &c.difficulty_sd);
    read_num(*sec, p, "quit_hazard_base_sd", &c.quit_hazard_base_sd);
  }
  if (const json* sec = find(j, "task")) {
    const std::string p = "simulator.task";
    if (!sec->is_object()) throw ConfigError(p + ": expected an object");
    check_keys(*sec, p, {"difficulty", "max_messages_per_step"});
    read_num_array(*sec, p, "difficulty", &cfg.task.difficulty);
    read_int(*sec, p, "max_messages_per_step", &cfg.task.max_messages_per_step);
  }
  if (const json* sec = find(j, "interaction")) {
    const std::string p = "simulator.interaction";
    if (!sec->is_object()) throw ConfigError(p + ": expected an object");
    check_keys(*sec, p,
               {"success_knowledge_coef", "success_difficulty_coef",
                "success_action_bonus", "knowledge_gain_on_success",
                "encouragement_frustration_relief", "failure_frustration_increase",
                "anxiety_frustration_coef", "helpful_click_scale"});
    auto& c = cfg.interaction;
    read_num(*sec, p, "success_knowledge_coef", &c.success_knowledge_coef);
    read_num(*sec, p, "success_difficulty_coef", &c.success_difficulty_coef);
    read_num_array(*sec, p, "success_action_bonus", &c.success_action_bonus);
    read_num_array(*sec, p, "knowledge_gain_on_success", &c.knowledge_gain_on_success);
    read_num(*sec, p, "encouragement_frustration_relief",
             &c.encouragement_frustration_relief);
    read_num(*sec, p, "failure_frustration_increase", &c.failure_frustration_increase);
    read_num(*sec, p, "anxiety_frustration_coef", &c.anxiety_frustration_coef);
    read_num(*sec, p, "helpful_click_scale", &c.helpful_click_scale);
  }
  if (const json* sec = find(j, "quit")) {
    const std::string p = "simulator.quit";
    if (!sec->is_object()) throw ConfigError(p + ": expected an object");
    check_keys(*sec, p,
               {"base", "frustration_coef", "failed_attempts_coef", "help_seeking_coef"});
    auto& c = cfg.quit;
    read_num(*sec, p, "base", &c.base);
    read_num(*sec, p, "frustration_coef", &c.frustration_coef);
    read_num(*sec, p, "failed_attempts_coef", &c.failed_attempts_coef);
    read_num(*sec, p, "help_seeking_coef", &c.help_seeking_coef);
  }
  if (const json* sec = find(j, "nlp")) {
    const std::string p = "simulator.nlp";
    if (!sec->is_object()) throw ConfigError(p + ": expected an object");
    check_keys(*sec, p,
               {"pos_weight", "pos_offset", "neg_weight", "neg_offset", "help_weight",
                "help_offset", "noise_sd"});
    auto& c = cfg.nlp;
    read_num(*sec, p, "pos_weight", &c.pos_weight);
    read_num(*sec, p, "pos_offset", &c.pos_offset);
    read_num(*sec, p, "neg_weight", &c.neg_weight);
    read_num(*sec, p, "neg_offset", &c.neg_offset);
    read_num(*sec, p, "help_weight", &c.help_weight);
    read_num(*sec, p, "help_offset", &c.help_offset);
    read_num(*sec, p, "noise_sd", &c.noise_sd);
  }

  cfg.validate();
  return cfg;
}

SimulatorConfig default_simulator_config() {
  return simulator_config_from_json(detail::kDefaultSimulatorConfigJson);
}

std::string simulator_config_to_json(const SimulatorConfig& cfg) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  auto& pop = j["population"];
  pop["knowledge_logit_mean"] = cfg.population.knowledge_logit_mean;
  pop["knowledge_logit_sd"] = cfg.population.knowledge_logit_sd;
  pop["frustration_init_mean"] = cfg.population.frustration_init_mean;
  pop["frustration_init_sd"] = cfg.population.frustration_init_sd;
  pop["help_seeking_logit_mean"] = cfg.population.help_seeking_logit_mean;
  pop["help_seeking_logit_sd"] = cfg.population.help_seeking_logit_sd;
  pop["anxiety_mean"] = cfg.population.anxiety_mean;
  pop["anxiety_sd"] = cfg.population.anxiety_sd;
  pop["grade_probs"] = cfg.population.grade_probs;
  pop["difficulty_sd"] = cfg.population.difficulty_sd;
  pop["quit_hazard_base_sd"] = cfg.population.quit_hazard_base_sd;
  auto& task = j["task"];
  task["difficulty"] = cfg.task.difficulty;
  task["max_messages_per_step"] = cfg.task.max_messages_per_step;
  auto& ia = j["interaction"];
  ia["success_knowledge_coef"] = cfg.interaction.success_knowledge_coef;
  ia["success_difficulty_coef"] = cfg.interaction.success_difficulty_coef;
  ia["success_action_bonus"] = cfg.interaction.success_action_bonus;
  ia["knowledge_gain_on_success"] = cfg.interaction.knowledge_gain_on_success;
  ia["encouragement_frustration_relief"] =
      cfg.interaction.encouragement_frustration_relief;
  ia["failure_frustration_increase"] = cfg.interaction.failure_frustration_increase;
  ia["anxiety_frustration_coef"] = cfg.interaction.anxiety_frustration_coef;
  ia["helpful_click_scale"] = cfg.interaction.helpful_click_scale;
  auto& q = j["quit"];
  q["base"] = cfg.quit.base;
  q["frustration_coef"] = cfg.quit.frustration_coef;
  q["failed_attempts_coef"] = cfg.quit.failed_attempts_coef;
  q["help_seeking_coef"] = cfg.quit.help_seeking_coef;
  auto& n = j["nlp"];
  n["pos_weight"] = cfg.nlp.pos_weight;
  n["pos_offset"] = cfg.nlp.pos_offset;
  n["neg_weight"] = cfg.nlp.neg_weight;
  n["neg_offset"] = cfg.nlp.neg_offset;
  n["help_weight"] = cfg.nlp.help_weight;
  n["help_offset"] = cfg.nlp.help_offset;
  n["noise_sd"] = cfg.nlp.noise_sd;
  return j.dump(2) + "\n";
}

SimulatorConfig load_simulator_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open simulator config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return simulator_config_from_json(buf.str());
}

StudentLatent spawn_student(const SimulatorConfig& cfg, Rng& rng,
                            std::array<bool, kNumItems>* pre_items) {
  const auto& pop = cfg.population;
  StudentLatent s;
  s.knowledge = logistic(pop.knowledge_logit_mean +
                         pop.knowledge_logit_sd * rng.normal());
  s.frustration =
      clamp01(pop.frustration_init_mean + pop.frustration_init_sd * rng.normal());
  s.help_seeking = logistic(pop.help_seeking_logit_mean +
                            pop.help_seeking_logit_sd * rng.normal());
  double anx = pop.anxiety_mean + pop.anxiety_sd * rng.normal();
  s.anxiety = static_cast<int>(std::clamp(std::lround(anx), 9L, 45L));

  double u = rng.uniform();
  double cdf = 0.0;
  s.grade = 3 + static_cast<int>(pop.grade_probs.size()) - 1;
  for (std::size_t i = 0; i < pop.grade_probs.size(); ++i) {
    cdf += pop.grade_probs[i];
    if (u < cdf) {
      s.grade = 3 + static_cast<int>(i);
      break;
    }
  }

  for (int i = 0; i < kNumTaskSteps; ++i)
    s.difficulty[i] = cfg.task.difficulty[i] + pop.difficulty_sd * rng.normal();
  s.quit_hazard_base = cfg.quit.base + pop.quit_hazard_base_sd * rng.normal();

  if (pre_items) {
    for (int i = 0; i < kNumItems; ++i) (*pre_items)[i] = rng.bernoulli(s.knowledge);
  }
  return s;
}

ObservationVector observe(const StudentLatent& latent, const EpisodeContext& ctx,
                          const SimulatorConfig& cfg, Rng& rng) {
  const auto& n = cfg.nlp;
  ObservationVector obs;
  obs.grade = latent.grade;
  obs.pre_score = ctx.pre_score;
  obs.step = ctx.step;
  obs.failed_attempts = ctx.failed_attempts;
  obs.nlp_pos = logistic(n.pos_weight * (1.0 - latent.frustration) + n.pos_offset +
                         n.noise_sd * rng.normal());
  obs.nlp_neg = logistic(n.neg_weight * latent.frustration + n.neg_offset +
                         n.noise_sd * rng.normal());
  obs.nlp_help = logistic(n.help_weight * latent.help_seeking + n.help_offset +
                          n.noise_sd * rng.normal());
  obs.anxiety = latent.anxiety;
  return obs;
}

double quit_probability(const StudentLatent& latent, double frustration,
                        int failed_attempts, const SimulatorConfig& cfg) {
  return logistic(latent.quit_hazard_base + cfg.quit.frustration_coef * frustration +
                  cfg.quit.failed_attempts_coef * failed_attempts -
                  cfg.quit.help_seeking_coef * latent.help_seeking);
}

double success_probability(const StudentLatent& latent, int step,
                           PedagogicalAction action, const SimulatorConfig& cfg) {
  if (step < 1 || step > kNumTaskSteps)
    throw UsageError("success_probability: step out of range");
  return logistic(cfg.interaction.success_knowledge_coef * latent.knowledge -
                  cfg.interaction.success_difficulty_coef * latent.difficulty[step - 1] +
                  cfg.interaction.success_action_bonus[static_cast<int>(action)]);
}

InteractionResult step_interaction(StudentLatent& latent, EpisodeContext& ctx,
                                   PedagogicalAction action, const SimulatorConfig& cfg,
                                   Rng& rng) {
  if (ctx.finished())
    throw UsageError("step_interaction: episode already finished");

  const auto& ia = cfg.interaction;
  InteractionResult result;
  ctx.messages_in_step += 1;

  if (action == PedagogicalAction::kDirectHint) result.events.hint_given = true;
  if (action == PedagogicalAction::kEncouragement) {
    latent.frustration =
        std::max(0.0, latent.frustration - ia.encouragement_frustration_relief);
  }

  const bool success = rng.bernoulli(success_probability(latent, ctx.step, action, cfg));
  if (success) {
    // Knowledge can only grow, and saturates at 1.
    const double gain = std::min(1.0 - latent.knowledge,
                                 ia.knowledge_gain_on_success[static_cast<int>(action)]);
    latent.knowledge += gain;
    result.events.helpful_click = rng.bernoulli(clamp01(ia.helpful_click_scale * gain));
    result.events.step_completed = true;
    ctx.step += 1;
    ctx.failed_attempts = 0;
    ctx.messages_in_step = 0;
  } else {
    ctx.failed_attempts += 1;
    // Anxious students frustrate faster on failure.
    const double anxiety_norm = (latent.anxiety - 9) / 36.0;
    latent.frustration = std::min(
        1.0, latent.frustration + ia.failure_frustration_increase *
                                      (1.0 + ia.anxiety_frustration_coef * anxiety_norm));
    if (rng.bernoulli(
            quit_probability(latent, latent.frustration, ctx.failed_attempts, cfg))) {
      result.events.quit = true;
      ctx.quit = true;
    } else if (ctx.messages_in_step >= cfg.task.max_messages_per_step) {
      // Message budget exhausted: move on with the step unsolved.
      ctx.step += 1;
      ctx.failed_attempts = 0;
      ctx.messages_in_step = 0;
    }
  }

  if (!ctx.finished()) result.next_observation = observe(latent, ctx, cfg, rng);
  return result;
}

Trajectory run_episode(const PolicyCheckpoint& policy, const SimulatorConfig& cfg,
                       const RewardParams& reward, Rng& rng, std::string student_id) {
  Trajectory traj;
  traj.student_id = std::move(student_id);

  StudentLatent latent = spawn_student(cfg, rng, &traj.pre_items);
  EpisodeContext ctx;
  ctx.pre_score = traj.pre_score();

  ObservationVector obs = observe(latent, ctx, cfg, rng);
  while (!ctx.finished()) {
    // Sample from the floored distribution, which is also what gets logged:
    // the recorded behavior probabilities are exactly the sampling law.
    const ActionProbs dist = floor_probs(action_distribution(policy, obs));
    const auto [action, log_prob] = sample_action(dist, rng);
    (void)log_prob;
    InteractionResult res = step_interaction(latent, ctx, action, cfg, rng);

    LoggedStep step;
    step.observation = obs;
    step.normalized = normalize(obs, policy.ranges);
    step.action = action;
    step.behavior_probs = dist;
    step.events = res.events;
    traj.steps.push_back(step);

    if (!res.next_observation) break;
    obs = *res.next_observation;
  }

  traj.quit = ctx.quit;
  if (!ctx.quit) {
    std::array<bool, kNumItems> post{};
    for (int i = 0; i < kNumItems; ++i) post[i] = rng.bernoulli(latent.knowledge);
    traj.post_items = post;
  }
  traj.terminal_reward = trajectory_terminal_reward(traj, reward);
  return traj;
}

std::vector<Trajectory> collect_episodes(const PolicyCheckpoint& policy,
                                         const SimulatorConfig& cfg,
                                         const RewardParams& reward,
                                         std::uint64_t base_seed, int count,
                                         int first_student_index) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const int index = first_student_index + i;
    Rng rng(derive_seed(base_seed, "episode", static_cast<std::uint64_t>(index)));
    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", index);
    out.push_back(run_episode(policy, cfg, reward, rng, id));
  }
  return out;
}

}  // namespace tutor
