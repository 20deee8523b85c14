#include "tutor/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "tutor/errors.hpp"
#include "tutor/text.hpp"

namespace fs = std::filesystem;

namespace tutor {

namespace {

using nlohmann::json;

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

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void parse_reward(const json& j, RewardParams* out) {
  check_keys(j, "reward", {"lambda_hint", "beta_helpful", "quit_penalty", "n_items"});
  if (const json* v = find(j, "lambda_hint"))
    out->lambda_hint = as_number(*v, "reward.lambda_hint");
  if (const json* v = find(j, "beta_helpful"))
    out->beta_helpful = as_number(*v, "reward.beta_helpful");
  if (const json* v = find(j, "quit_penalty"))
    out->quit_penalty = as_number(*v, "reward.quit_penalty");
  if (const json* v = find(j, "n_items")) out->n_items = as_int(*v, "reward.n_items");
}

void parse_ppo(const json& j, PpoConfig* out) {
  check_keys(j, "ppo",
             {"clip_epsilon", "learning_rate", "students_per_update",
              "epochs_per_update", "discount", "gae_lambda", "value_coef",
              "entropy_coef", "total_students"});
  if (const json* v = find(j, "clip_epsilon"))
    out->clip_epsilon = as_number(*v, "ppo.clip_epsilon");
  if (const json* v = find(j, "learning_rate"))
    out->learning_rate = as_number(*v, "ppo.learning_rate");
  if (const json* v = find(j, "students_per_update"))
    out->students_per_update = as_int(*v, "ppo.students_per_update");
  if (const json* v = find(j, "epochs_per_update"))
    out->epochs_per_update = as_int(*v, "ppo.epochs_per_update");
  if (const json* v = find(j, "discount")) out->discount = as_number(*v, "ppo.discount");
  if (const json* v = find(j, "gae_lambda"))
    out->gae_lambda = as_number(*v, "ppo.gae_lambda");
  if (const json* v = find(j, "value_coef"))
    out->value_coef = as_number(*v, "ppo.value_coef");
  if (const json* v = find(j, "entropy_coef"))
    out->entropy_coef = as_number(*v, "ppo.entropy_coef");
  if (const json* v = find(j, "total_students"))
    out->total_students = as_int(*v, "ppo.total_students");
}

void parse_offline(const json& j, OfflineGrid* grid, int* splits, int* threads) {
  check_keys(j, "offline", {"n_splits", "threads", "grid"});
  if (const json* v = find(j, "n_splits")) *splits = as_int(*v, "offline.n_splits");
  if (const json* v = find(j, "threads")) *threads = as_int(*v, "offline.threads");
  const json* g = find(j, "grid");
  if (!g) return;
  if (!g->is_object()) throw ConfigError("offline.grid: expected an object");
  check_keys(*g, "offline.grid",
             {"algorithms", "hidden_shapes", "epochs", "ess_penalties",
              "learning_rate"});
  if (const json* v = find(*g, "algorithms")) {
    if (!v->is_array()) throw ConfigError("offline.grid.algorithms: expected an array");
    grid->algorithms.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string name =
          as_string((*v)[i], "offline.grid.algorithms[" + std::to_string(i) + "]");
      try {
        grid->algorithms.push_back(offline_algorithm_from_name(name));
      } catch (const DataError& e) {
        throw ConfigError("offline.grid.algorithms[" + std::to_string(i) +
                          "]: " + e.what());
      }
    }
  }
  if (const json* v = find(*g, "hidden_shapes")) {
    if (!v->is_array())
      throw ConfigError("offline.grid.hidden_shapes: expected an array of arrays");
    grid->hidden_shapes.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string path = "offline.grid.hidden_shapes[" + std::to_string(i) + "]";
      if (!(*v)[i].is_array()) throw ConfigError(path + ": expected an array");
      std::vector<int> shape;
      for (std::size_t k = 0; k < (*v)[i].size(); ++k)
        shape.push_back(as_int((*v)[i][k], path + "[" + std::to_string(k) + "]"));
      grid->hidden_shapes.push_back(std::move(shape));
    }
  }
  if (const json* v = find(*g, "epochs")) {
    if (!v->is_array()) throw ConfigError("offline.grid.epochs: expected an array");
    grid->epoch_choices.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      grid->epoch_choices.push_back(
          as_int((*v)[i], "offline.grid.epochs[" + std::to_string(i) + "]"));
  }
  if (const json* v = find(*g, "ess_penalties")) {
    if (!v->is_array())
      throw ConfigError("offline.grid.ess_penalties: expected an array");
    grid->ess_penalties.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      grid->ess_penalties.push_back(
          as_number((*v)[i], "offline.grid.ess_penalties[" + std::to_string(i) + "]"));
  }
  if (const json* v = find(*g, "learning_rate"))
    grid->learning_rate = as_number(*v, "offline.grid.learning_rate");
}

void parse_explain(const json& j, ExplainConfig* out) {
  check_keys(j, "explain", {"baseline", "ig_steps", "chart_action"});
  if (const json* v = find(j, "baseline")) {
    try {
      out->baseline = baseline_mode_from_name(as_string(*v, "explain.baseline"));
    } catch (const DataError& e) {
      throw ConfigError(std::string("explain.baseline: ") + e.what());
    }
  }
  if (const json* v = find(j, "ig_steps"))
    out->ig_steps = as_int(*v, "explain.ig_steps");
  if (const json* v = find(j, "chart_action")) {
    try {
      out->chart_action = action_from_name(as_string(*v, "explain.chart_action"));
    } catch (const DataError& e) {
      throw ConfigError(std::string("explain.chart_action: ") + e.what());
    }
  }
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& json_text,
                                             const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  check_keys(j, "config",
             {"schema_version", "seed", "out_dir", "simulator", "reward", "ppo",
              "offline", "explain"});
  if (const json* v = find(j, "schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != 1)
      throw ConfigError("config.schema_version: expected 1");
  }

  ExperimentConfig cfg;
  if (const json* v = find(j, "seed")) {
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<long long>() < 0))
      throw ConfigError("config.seed: expected a non-negative integer");
    cfg.seed = v->get<std::uint64_t>();
  }
  if (const json* v = find(j, "out_dir")) cfg.out_dir = as_string(*v, "config.out_dir");
  if (const json* v = find(j, "simulator")) {
    if (v->is_string()) {
      const fs::path ref = fs::path(base_dir) / v->get<std::string>();
      cfg.simulator = load_simulator_config(ref.string());
    } else if (v->is_object()) {
      cfg.simulator = simulator_config_from_json(v->dump());
    } else {
      throw ConfigError("config.simulator: expected an object or a file path");
    }
  }
  if (const json* v = find(j, "reward")) {
    if (!v->is_object()) throw ConfigError("config.reward: expected an object");
    parse_reward(*v, &cfg.reward);
  }
  if (const json* v = find(j, "ppo")) {
    if (!v->is_object()) throw ConfigError("config.ppo: expected an object");
    parse_ppo(*v, &cfg.ppo);
  }
  if (const json* v = find(j, "offline")) {
    if (!v->is_object()) throw ConfigError("config.offline: expected an object");
    parse_offline(*v, &cfg.grid, &cfg.offline_splits, &cfg.offline_threads);
  }
  if (const json* v = find(j, "explain")) {
    if (!v->is_object()) throw ConfigError("config.explain: expected an object");
    parse_explain(*v, &cfg.explain);
  }

  cfg.ppo.seed = cfg.seed;
  cfg.reward.validate();
  cfg.ppo.validate();
  cfg.grid.validate();
  cfg.explain.validate();
  if (cfg.offline_splits < 1) throw ConfigError("offline.n_splits: must be >= 1");
  if (cfg.offline_threads < 1) throw ConfigError("offline.threads: must be >= 1");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open experiment config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return experiment_config_from_json(buf.str(),
                                     fs::path(path).parent_path().string());
}

SimulateSummary cmd_simulate(const ExperimentConfig& cfg,
                             const std::string& policy_source, int n_students,
                             const std::string& out_path) {
  if (n_students < 0) throw UsageError("simulate: students must be >= 0");
  PolicyCheckpoint policy = policy_source == "uniform"
                                ? make_uniform_checkpoint()
                                : load_checkpoint(policy_source);
  const auto trajectories =
      collect_episodes(policy, cfg.simulator, cfg.reward, cfg.seed, n_students);
  if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  write_trajectory_file(out_path, trajectories);

  SimulateSummary summary;
  summary.n_students = n_students;
  summary.out_path = out_path;
  for (const Trajectory& t : trajectories) {
    summary.mean_pretest += t.pre_score();
    summary.mean_reward += t.terminal_reward;
    summary.quit_rate += t.quit ? 1.0 : 0.0;
  }
  if (!trajectories.empty()) {
    const double n = static_cast<double>(trajectories.size());
    summary.mean_pretest /= n;
    summary.mean_reward /= n;
    summary.quit_rate /= n;
  }
  return summary;
}

TrainOnlineResult cmd_train_online(const ExperimentConfig& cfg) {
  return train_online(cfg.ppo, cfg.simulator, cfg.reward, cfg.out_dir);
}

SelectionReport cmd_train_offline(const ExperimentConfig& cfg,
                                  const std::string& data_path) {
  const auto dataset = read_trajectory_file(data_path);
  if (dataset.empty()) throw DataError("no trajectories in " + data_path);
  SelectionReport report = grid_search(dataset, cfg.grid, cfg.offline_splits,
                                       cfg.seed, cfg.offline_threads);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const fs::path ckpt_path = dir / "final_checkpoint.txt";
  save_checkpoint(report.final_checkpoint, ckpt_path.string());
  report.final_checkpoint_path = ckpt_path.string();
  write_text_file(dir / "selection_report.json", selection_report_to_json(report));
  write_text_file(dir / "selection_report.csv", selection_report_csv(report));
  return report;
}

EvaluationRecord cmd_evaluate(const ExperimentConfig& cfg,
                              const std::string& ckpt_path, const std::string& mode,
                              const std::string& data_path, int rollout_students,
                              const std::string& out_path) {
  const PolicyCheckpoint ckpt = load_checkpoint(ckpt_path);
  EvaluationRecord rec;
  rec.mode = mode;
  nlohmann::ordered_json j;
  j["kind"] = "tutor-evaluation";
  j["mode"] = mode;
  j["checkpoint"] = ckpt_path;

  if (mode == "wis") {
    if (data_path.empty()) throw UsageError("evaluate: wis mode needs --data");
    const auto dataset = read_trajectory_file(data_path);
    if (dataset.empty()) throw DataError("no trajectories in " + data_path);
    const WisResult wr = wis_evaluate(ckpt, dataset);
    rec.estimate = wr.estimate;
    rec.ess = wr.ess;
    rec.n = static_cast<int>(dataset.size());
    j["estimate"] = rec.estimate;
    j["ess"] = rec.ess;
    j["n"] = rec.n;
  } else if (mode == "rollout") {
    if (rollout_students < 1)
      throw UsageError("evaluate: rollout mode needs --rollout >= 1");
    const auto episodes = collect_episodes(ckpt, cfg.simulator, cfg.reward,
                                           cfg.seed, rollout_students);
    double mean = 0.0;
    for (const Trajectory& t : episodes) mean += t.terminal_reward;
    mean /= static_cast<double>(episodes.size());
    double ss = 0.0;
    for (const Trajectory& t : episodes)
      ss += (t.terminal_reward - mean) * (t.terminal_reward - mean);
    rec.estimate = mean;
    rec.std_dev = episodes.size() > 1
                      ? std::sqrt(ss / static_cast<double>(episodes.size() - 1))
                      : 0.0;
    rec.n = rollout_students;
    j["mean"] = rec.estimate;
    j["std"] = rec.std_dev;
    j["n"] = rec.n;
  } else {
    throw UsageError("evaluate: mode must be wis or rollout, got " + mode);
  }

  if (!out_path.empty()) {
    if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty())
      fs::create_directories(parent);
    write_text_file(out_path, j.dump(2) + "\n");
  }
  return rec;
}

ExplainOutputs cmd_explain(const ExperimentConfig& cfg, const std::string& ckpt_path,
                           const std::string& data_path) {
  const PolicyCheckpoint ckpt = load_checkpoint(ckpt_path);
  const auto dataset = read_trajectory_file(data_path);
  if (dataset.empty()) throw DataError("no trajectories in " + data_path);

  ExplainOutputs out;
  out.attribution = aggregate_attributions(ckpt, dataset, cfg.explain);
  out.groups = group_action_probs(ckpt, dataset);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  out.attribution_csv_path = (dir / "attribution.csv").string();
  out.groups_csv_path = (dir / "group_probs.csv").string();
  out.groups_svg_path = (dir / "group_probs.svg").string();
  write_text_file(out.attribution_csv_path, attribution_report_csv(out.attribution));
  write_text_file(out.groups_csv_path, group_report_csv(out.groups));
  write_text_file(out.groups_svg_path,
                  group_report_svg(out.groups, cfg.explain.chart_action));
  return out;
}

std::string report_summary(const std::string& path) {
  std::string s;
  if (fs::is_directory(path)) {
    s += "run directory: " + path + "\n";
    const fs::path diag = fs::path(path) / "diagnostics.csv";
    if (fs::exists(diag)) {
      const std::string text = read_text_file(diag.string());
      const long rows = std::count(text.begin(), text.end(), '\n') - 1;
      s += "  diagnostics.csv: " + std::to_string(std::max(rows, 0L)) + " updates\n";
      // Show the last row as the current training state.
      if (rows > 0) {
        std::size_t pos = text.rfind('\n', text.size() - 2);
        s += "  last update: " + text.substr(pos + 1);
      }
    }
    const fs::path sel = fs::path(path) / "selection_report.json";
    if (fs::exists(sel)) {
      const auto j = nlohmann::ordered_json::parse(read_text_file(sel.string()));
      s += "  selection: config #" + j.at("chosen_index").dump() + " " +
           j.at("chosen_config").dump() + "\n";
    }
    if (!fs::exists(diag) && !fs::exists(sel)) s += "  (no recognized artifacts)\n";
    return s;
  }

  const std::string text = read_text_file(path);
  // Checkpoints and reports are one JSON document; trajectory files are
  // line-delimited and identified by their header record.
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    const std::size_t eol = text.find('\n');
    try {
      j = nlohmann::ordered_json::parse(
          eol == std::string::npos ? text : text.substr(0, eol));
    } catch (const nlohmann::json::parse_error&) {
      throw DataError("unrecognized file format: " + path);
    }
  }
  const std::string kind = j.value("kind", "");
  if (kind == "tutor-policy-checkpoint") {
    const PolicyCheckpoint ckpt = checkpoint_from_json(text);
    s += "checkpoint: " + path + "\n";
    s += "  provenance: " + ckpt.provenance + "\n";
    std::string shape = "8";
    for (int d : ckpt.policy_spec.hidden_dims) shape += "-" + std::to_string(d);
    shape += "-4";
    s += "  policy net: " + shape + " (" +
         std::to_string(ckpt.policy_spec.param_count()) + " parameters)\n";
    s += std::string("  value net: ") + (ckpt.has_value_net() ? "yes" : "no") + "\n";
    return s;
  }
  if (kind == "header") {
    const auto trajectories = read_trajectory_file(path);
    s += "trajectory file: " + path + "\n";
    s += "  students: " + std::to_string(trajectories.size()) + "\n";
    double mean_pre = 0.0, mean_reward = 0.0, quit = 0.0;
    std::size_t steps = 0;
    for (const Trajectory& t : trajectories) {
      mean_pre += t.pre_score();
      mean_reward += t.terminal_reward;
      quit += t.quit ? 1.0 : 0.0;
      steps += t.steps.size();
    }
    if (!trajectories.empty()) {
      const double n = static_cast<double>(trajectories.size());
      s += "  mean pretest: " + fmt_double(mean_pre / n) + "\n";
      s += "  mean reward: " + fmt_double(mean_reward / n) + "\n";
      s += "  quit rate: " + fmt_double(quit / n) + "\n";
      s += "  decision points: " + std::to_string(steps) + "\n";
    }
    return s;
  }
  if (kind == "tutor-evaluation") {
    s += "evaluation record: " + path + "\n  " + text;
    return s;
  }
  if (kind == "tutor-selection-report") {
    const auto report = nlohmann::ordered_json::parse(text);
    s += "selection report: " + path + "\n";
    s += "  chosen: config #" + report.at("chosen_index").dump() + " " +
         report.at("chosen_config").dump() + "\n";
    return s;
  }
  throw DataError("unrecognized file format: " + path);
}

}  // namespace tutor
