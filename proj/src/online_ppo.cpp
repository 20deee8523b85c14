#include "tutor/online_ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tutor/errors.hpp"
#include "tutor/text.hpp"

namespace fs = std::filesystem;

namespace tutor {

namespace {

constexpr const char* kStateFileName = "trainer_state.json";
constexpr const char* kDiagnosticsFileName = "diagnostics.csv";
constexpr const char* kDiagnosticsHeader =
    "update_index,mean_reward,clip_fraction,approx_kl,value_loss,entropy\n";

MlpSpec online_policy_spec() {
  MlpSpec spec;
  spec.input_dim = kNumFeatures;
  spec.hidden_dims = {16, 16};
  spec.output_dim = kNumActions;
  spec.activation = Activation::kTanh;
  spec.head = OutputHead::kSoftmax;
  return spec;
}

MlpSpec online_value_spec() {
  MlpSpec spec;
  spec.input_dim = kNumFeatures;
  spec.hidden_dims = {16, 16};
  spec.output_dim = 1;
  spec.activation = Activation::kTanh;
  spec.head = OutputHead::kLinear;
  return spec;
}

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) h -= v * std::log(v);
  return h;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string diagnostics_csv(const std::vector<TrainingDiagnostics>& rows) {
  std::string s = kDiagnosticsHeader;
  for (const auto& d : rows) {
    s += std::to_string(d.update_index);
    s += ',';
    s += fmt_double(d.mean_reward);
    s += ',';
    s += fmt_double(d.clip_fraction);
    s += ',';
    s += fmt_double(d.approx_kl);
    s += ',';
    s += fmt_double(d.value_loss);
    s += ',';
    s += fmt_double(d.entropy);
    s += '\n';
  }
  return s;
}

nlohmann::ordered_json adam_to_json(const AdamState& a) {
  nlohmann::ordered_json j;
  j["learning_rate"] = a.learning_rate;
  j["timestep"] = a.timestep;
  j["m"] = a.m;
  j["v"] = a.v;
  return j;
}

AdamState adam_from_json(const nlohmann::ordered_json& j) {
  AdamState a;
  a.learning_rate = j.at("learning_rate").get<double>();
  a.timestep = j.at("timestep").get<long>();
  a.m = j.at("m").get<std::vector<double>>();
  a.v = j.at("v").get<std::vector<double>>();
  return a;
}

struct TrainerState {
  int completed_updates = 0;
  PolicyCheckpoint ckpt;
  AdamState policy_adam;
  AdamState value_adam;
  std::vector<TrainingDiagnostics> diagnostics;
};

void save_trainer_state(const fs::path& dir, const TrainerState& st) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "tutor-trainer-state";
  j["completed_updates"] = st.completed_updates;
  j["checkpoint"] = nlohmann::ordered_json::parse(checkpoint_to_json(st.ckpt));
  j["adam_policy"] = adam_to_json(st.policy_adam);
  j["adam_value"] = adam_to_json(st.value_adam);
  auto rows = nlohmann::ordered_json::array();
  for (const auto& d : st.diagnostics) {
    nlohmann::ordered_json r;
    r["update_index"] = d.update_index;
    r["mean_reward"] = d.mean_reward;
    r["clip_fraction"] = d.clip_fraction;
    r["approx_kl"] = d.approx_kl;
    r["value_loss"] = d.value_loss;
    r["entropy"] = d.entropy;
    rows.push_back(std::move(r));
  }
  j["diagnostics"] = std::move(rows);

  // Write-then-rename so an interrupt cannot leave a torn state file.
  const fs::path tmp = dir / (std::string(kStateFileName) + ".tmp");
  write_text_file(tmp, j.dump(2) + "\n");
  fs::rename(tmp, dir / kStateFileName);
}

TrainerState load_trainer_state(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trainer state: " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed trainer state " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("kind").get<std::string>() != "tutor-trainer-state" ||
        j.at("schema_version").get<int>() != 1)
      throw DataError("unrecognized trainer state format: " + path.string());
    TrainerState st;
    st.completed_updates = j.at("completed_updates").get<int>();
    st.ckpt = checkpoint_from_json(j.at("checkpoint").dump());
    st.policy_adam = adam_from_json(j.at("adam_policy"));
    st.value_adam = adam_from_json(j.at("adam_value"));
    for (const auto& r : j.at("diagnostics")) {
      TrainingDiagnostics d;
      d.update_index = r.at("update_index").get<int>();
      d.mean_reward = r.at("mean_reward").get<double>();
      d.clip_fraction = r.at("clip_fraction").get<double>();
      d.approx_kl = r.at("approx_kl").get<double>();
      d.value_loss = r.at("value_loss").get<double>();
      d.entropy = r.at("entropy").get<double>();
      st.diagnostics.push_back(d);
    }
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed trainer state " + path.string() + ": " + e.what());
  }
}

std::string checkpoint_file_name(int update_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint_%04d.txt", update_index);
  return buf;
}

}  // namespace

void PpoConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
    throw ConfigError("ppo.clip_epsilon: must be in (0, 1)");
  if (!(discount > 0.0 && discount <= 1.0))
    throw ConfigError("ppo.discount: must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw ConfigError("ppo.gae_lambda: must be in [0, 1]");
  if (students_per_update < 1)
    throw ConfigError("ppo.students_per_update: must be >= 1");
  if (epochs_per_update < 1) throw ConfigError("ppo.epochs_per_update: must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate: must be > 0");
  if (total_students < 0) throw ConfigError("ppo.total_students: must be >= 0");
  if (value_coef < 0.0) throw ConfigError("ppo.value_coef: must be >= 0");
  if (entropy_coef < 0.0) throw ConfigError("ppo.entropy_coef: must be >= 0");
}

std::vector<StepReturn> compute_advantages(const Trajectory& traj,
                                           const PolicyCheckpoint& value_ckpt,
                                           const PpoConfig& cfg,
                                           const RewardParams& reward) {
  const auto rewards = step_rewards(traj, reward);
  const int n = static_cast<int>(rewards.size());
  std::vector<StepReturn> out(rewards.size());
  if (n == 0) return out;

  std::vector<double> values(rewards.size());
  for (int t = 0; t < n; ++t)
    values[t] = state_value_normalized(value_ckpt, traj.steps[t].normalized);

  // Backward pass: reward-to-go returns and GAE advantages. The state after
  // the last logged step is terminal ⇒ bootstrap value 0.
  double running_return = 0.0;
  double gae = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    running_return = rewards[t] + cfg.discount * running_return;
    const double next_value = (t + 1 < n) ? values[t + 1] : 0.0;
    const double delta = rewards[t] + cfg.discount * next_value - values[t];
    gae = delta + cfg.discount * cfg.gae_lambda * gae;
    out[t].ret = running_return;
    out[t].advantage = gae;
  }
  return out;
}

std::vector<PpoStepSample> prepare_batch(const std::vector<Trajectory>& batch,
                                         const PolicyCheckpoint& value_ckpt,
                                         const PpoConfig& cfg,
                                         const RewardParams& reward) {
  std::vector<PpoStepSample> samples;
  for (const Trajectory& traj : batch) {
    const auto adv = compute_advantages(traj, value_ckpt, cfg, reward);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const LoggedStep& step = traj.steps[t];
      PpoStepSample s;
      s.normalized = step.normalized;
      s.action = static_cast<int>(step.action);
      s.behavior_prob = step.behavior_probs[s.action];
      if (!(s.behavior_prob > 0.0))
        throw DataError("logged action has zero behavior probability");
      s.advantage = adv[t].advantage;
      s.ret = adv[t].ret;
      samples.push_back(s);
    }
  }

  const std::size_t n = samples.size();
  if (n == 0) return samples;
  double mean = 0.0;
  for (const auto& s : samples) mean += s.advantage;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& s : samples) {
    const double d = s.advantage - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  if (var >= 1e-12) {
    const double inv_sd = 1.0 / std::sqrt(var);
    for (auto& s : samples) s.advantage = (s.advantage - mean) * inv_sd;
  }
  return samples;
}

double ppo_objective(const std::vector<PpoStepSample>& samples,
                     const MlpSpec& policy_spec, const ParameterSet& policy_params,
                     const MlpSpec& value_spec, const ParameterSet& value_params,
                     const PpoConfig& cfg) {
  if (samples.empty()) return 0.0;
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;
  double surrogate = 0.0;
  double entropy = 0.0;
  double mse = 0.0;
  for (const auto& s : samples) {
    const auto p = forward(policy_spec, policy_params, s.normalized);
    const double ratio = p[s.action] / s.behavior_prob;
    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, lo, hi) * s.advantage;
    surrogate += std::min(unclipped, clipped);
    entropy += entropy_of(p);
    const double v = forward(value_spec, value_params, s.normalized)[0];
    mse += (v - s.ret) * (v - s.ret);
  }
  const double n = static_cast<double>(samples.size());
  return surrogate / n + cfg.entropy_coef * entropy / n - cfg.value_coef * mse / n;
}

PpoGradients ppo_gradients(const std::vector<PpoStepSample>& samples,
                           const MlpSpec& policy_spec,
                           const ParameterSet& policy_params,
                           const MlpSpec& value_spec,
                           const ParameterSet& value_params,
                           const PpoConfig& cfg) {
  PpoGradients g;
  g.policy = zero_params(policy_spec);
  g.value = zero_params(value_spec);
  if (samples.empty()) return g;

  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  int clipped_steps = 0;

  ForwardCache cache;
  std::vector<double> grad_out(static_cast<std::size_t>(kNumActions));
  for (const auto& s : samples) {
    const auto p = forward(policy_spec, policy_params, s.normalized, &cache);
    const double ratio = p[s.action] / s.behavior_prob;
    if (std::abs(ratio - 1.0) > cfg.clip_epsilon) ++clipped_steps;

    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, lo, hi) * s.advantage;
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    // min(r·A, clip(r)·A): the clipped branch has zero ratio-derivative, so
    // the surrogate only pulls on the taken action when unclipped is active.
    if (unclipped <= clipped)
      grad_out[s.action] += s.advantage / s.behavior_prob;
    if (cfg.entropy_coef != 0.0) {
      for (int c = 0; c < kNumActions; ++c)
        grad_out[c] += cfg.entropy_coef * (-(std::log(p[c]) + 1.0));
    }
    backward_accumulate(policy_spec, policy_params, cache, grad_out, inv_n, g.policy);

    const double v = forward(value_spec, value_params, s.normalized, &cache)[0];
    const double vgrad[1] = {-2.0 * cfg.value_coef * (v - s.ret)};
    backward_accumulate(value_spec, value_params, cache, vgrad, inv_n, g.value);
  }
  g.clip_fraction = static_cast<double>(clipped_steps) /
                    static_cast<double>(samples.size());
  return g;
}

TrainingDiagnostics ppo_update(PolicyCheckpoint& ckpt, AdamState& policy_adam,
                               AdamState& value_adam,
                               const std::vector<Trajectory>& batch,
                               const PpoConfig& cfg, const RewardParams& reward) {
  if (batch.empty()) throw UsageError("ppo_update: empty batch");
  if (!ckpt.has_value_net()) throw UsageError("ppo_update: checkpoint lacks a value net");

  TrainingDiagnostics diag;
  for (const Trajectory& t : batch) diag.mean_reward += t.terminal_reward;
  diag.mean_reward /= static_cast<double>(batch.size());

  const auto samples = prepare_batch(batch, ckpt, cfg, reward);
  if (samples.empty()) return diag;  // no decision points: nothing to update

  std::vector<std::vector<double>> old_probs;
  old_probs.reserve(samples.size());
  for (const auto& s : samples)
    old_probs.push_back(forward(ckpt.policy_spec, ckpt.policy_params, s.normalized));

  double clip_sum = 0.0;
  ParameterSet neg_policy = zero_params(ckpt.policy_spec);
  ParameterSet neg_value = zero_params(*ckpt.value_spec);
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    const PpoGradients g =
        ppo_gradients(samples, ckpt.policy_spec, ckpt.policy_params,
                      *ckpt.value_spec, *ckpt.value_params, cfg);
    clip_sum += g.clip_fraction;
    // Adam is a minimizer; feed it the descent direction of the negated
    // objective.
    for (std::size_t i = 0; i < neg_policy.values.size(); ++i)
      neg_policy.values[i] = -g.policy.values[i];
    for (std::size_t i = 0; i < neg_value.values.size(); ++i)
      neg_value.values[i] = -g.value.values[i];
    adam_step(policy_adam, ckpt.policy_params, neg_policy);
    adam_step(value_adam, *ckpt.value_params, neg_value);
  }
  diag.clip_fraction = clip_sum / static_cast<double>(cfg.epochs_per_update);

  double kl = 0.0;
  double entropy = 0.0;
  double mse = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto p_new =
        forward(ckpt.policy_spec, ckpt.policy_params, samples[i].normalized);
    for (int c = 0; c < kNumActions; ++c)
      kl += old_probs[i][c] * (std::log(old_probs[i][c]) - std::log(p_new[c]));
    entropy += entropy_of(p_new);
    const double v =
        forward(*ckpt.value_spec, *ckpt.value_params, samples[i].normalized)[0];
    mse += (v - samples[i].ret) * (v - samples[i].ret);
  }
  const double n = static_cast<double>(samples.size());
  diag.approx_kl = kl / n;
  diag.entropy = entropy / n;
  diag.value_loss = mse / n;
  return diag;
}

TrainOnlineResult train_online(const PpoConfig& cfg, const SimulatorConfig& sim,
                               const RewardParams& reward,
                               const std::string& out_dir) {
  cfg.validate();
  sim.validate();
  reward.validate();

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory " + out_dir + ": " + ec.message());

  const int n_updates = cfg.total_students / cfg.students_per_update;

  TrainerState st;
  const fs::path state_path = dir / kStateFileName;
  if (fs::exists(state_path)) {
    st = load_trainer_state(state_path);
    st.ckpt.validate();
    if (st.completed_updates > n_updates)
      throw DataError("trainer state has more completed updates than configured");
  } else {
    st.ckpt.policy_spec = online_policy_spec();
    {
      Rng rng(derive_seed(cfg.seed, "policy-init"));
      st.ckpt.policy_params = init_params(st.ckpt.policy_spec, rng);
    }
    st.ckpt.value_spec = online_value_spec();
    {
      Rng rng(derive_seed(cfg.seed, "value-init"));
      st.ckpt.value_params = init_params(*st.ckpt.value_spec, rng);
    }
    st.ckpt.provenance = provenance::kOnlinePpo;
    st.ckpt.seed_lineage = cfg.seed;
    st.policy_adam =
        AdamState(st.ckpt.policy_params.values.size(), cfg.learning_rate);
    st.value_adam = AdamState(st.ckpt.value_params->values.size(), cfg.learning_rate);

    nlohmann::ordered_json snapshot;
    auto& ppo = snapshot["ppo"];
    ppo["clip_epsilon"] = cfg.clip_epsilon;
    ppo["learning_rate"] = cfg.learning_rate;
    ppo["students_per_update"] = cfg.students_per_update;
    ppo["epochs_per_update"] = cfg.epochs_per_update;
    ppo["discount"] = cfg.discount;
    ppo["gae_lambda"] = cfg.gae_lambda;
    ppo["value_coef"] = cfg.value_coef;
    ppo["entropy_coef"] = cfg.entropy_coef;
    ppo["total_students"] = cfg.total_students;
    ppo["seed"] = cfg.seed;
    auto& rw = snapshot["reward"];
    rw["lambda_hint"] = reward.lambda_hint;
    rw["beta_helpful"] = reward.beta_helpful;
    rw["quit_penalty"] = reward.quit_penalty;
    rw["n_items"] = reward.n_items;
    snapshot["simulator"] =
        nlohmann::ordered_json::parse(simulator_config_to_json(sim));
    write_text_file(dir / "config_snapshot.json", snapshot.dump(2) + "\n");
    save_checkpoint(st.ckpt, (dir / "checkpoint_init.txt").string());
  }

  TrainOnlineResult result;
  result.run_dir = out_dir;
  for (int u = st.completed_updates; u < n_updates; ++u) {
    const auto batch =
        collect_episodes(st.ckpt, sim, reward, cfg.seed, cfg.students_per_update,
                         u * cfg.students_per_update);
    TrainingDiagnostics diag =
        ppo_update(st.ckpt, st.policy_adam, st.value_adam, batch, cfg, reward);
    diag.update_index = u;
    st.diagnostics.push_back(diag);
    st.completed_updates = u + 1;

    save_checkpoint(st.ckpt, (dir / checkpoint_file_name(u)).string());
    write_text_file(dir / kDiagnosticsFileName, diagnostics_csv(st.diagnostics));
    save_trainer_state(dir, st);
    ++result.updates_run;
  }

  if (!fs::exists(dir / kDiagnosticsFileName))
    write_text_file(dir / kDiagnosticsFileName, diagnostics_csv(st.diagnostics));
  if (!fs::exists(state_path)) save_trainer_state(dir, st);
  save_checkpoint(st.ckpt, (dir / "policy_final.txt").string());

  result.final_checkpoint_path = (dir / "policy_final.txt").string();
  result.diagnostics_path = (dir / kDiagnosticsFileName).string();
  result.total_updates = st.completed_updates;
  result.diagnostics = st.diagnostics;
  return result;
}

}  // namespace tutor
