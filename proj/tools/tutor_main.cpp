// Command-line front end for the tutoring-policy pipeline.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "tutor/errors.hpp"
#include "tutor/runtime.hpp"
#include "tutor/text.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  bool has_seed = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonOpts* opts) {
  sub->add_option("--config", opts->config_path, "Experiment config (JSON)");
  sub->add_option("--seed", opts->seed, "Master seed (overrides the config)")
      ->each([opts](const std::string&) { opts->has_seed = true; });
  sub->add_option("--out", opts->out, "Output path");
}

tutor::ExperimentConfig resolve_config(const CommonOpts& opts) {
  tutor::ExperimentConfig cfg = opts.config_path.empty()
                                    ? tutor::ExperimentConfig{}
                                    : tutor::load_experiment_config(opts.config_path);
  if (opts.has_seed) {
    cfg.seed = opts.seed;
    cfg.ppo.seed = opts.seed;
  }
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated tutoring pipeline: data generation, online PPO, "
               "offline distillation, evaluation and attribution reports"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  std::string sim_policy = "uniform";
  int sim_students = 100;
  CLI::App* sim = app.add_subcommand("simulate", "Roll episodes and log trajectories");
  add_common(sim, &sim_opts);
  sim->add_option("--policy", sim_policy, "'uniform' or a checkpoint path");
  sim->add_option("--students", sim_students, "Number of episodes");

  CommonOpts online_opts;
  int online_students = -1;
  CLI::App* online = app.add_subcommand("train-online", "Run the PPO phase");
  add_common(online, &online_opts);
  online->add_option("--students", online_students,
                     "Total students (overrides the config)");

  CommonOpts offline_opts;
  std::string offline_data;
  int offline_splits = -1;
  int offline_threads = -1;
  CLI::App* offline =
      app.add_subcommand("train-offline", "Grid-search distillation from logs");
  add_common(offline, &offline_opts);
  offline->add_option("--data", offline_data, "Trajectory file")->required();
  offline->add_option("--splits", offline_splits, "Validation splits");
  offline->add_option("--threads", offline_threads, "Worker threads");

  CommonOpts eval_opts;
  std::string eval_ckpt, eval_data, eval_mode;
  int eval_rollout = 0;
  CLI::App* eval =
      app.add_subcommand("evaluate", "Score a checkpoint off-policy or by rollout");
  add_common(eval, &eval_opts);
  eval->add_option("--ckpt", eval_ckpt, "Policy checkpoint")->required();
  eval->add_option("--data", eval_data, "Trajectory file (wis mode)");
  eval->add_option("--rollout", eval_rollout, "Fresh episodes (rollout mode)");
  eval->add_option("--mode", eval_mode, "wis | rollout (inferred when omitted)");

  CommonOpts explain_opts;
  std::string explain_ckpt, explain_data;
  CLI::App* explain =
      app.add_subcommand("explain", "Attribution and subgroup reports");
  add_common(explain, &explain_opts);
  explain->add_option("--ckpt", explain_ckpt, "Policy checkpoint")->required();
  explain->add_option("--data", explain_data, "Trajectory file")->required();

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "Summarize an artifact");
  report->add_option("--path", report_path, "Trajectory file, checkpoint or run dir")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      tutor::ExperimentConfig cfg = resolve_config(sim_opts);
      const std::string out =
          sim_opts.out.empty() ? "trajectories.jsonl" : sim_opts.out;
      const auto summary = tutor::cmd_simulate(cfg, sim_policy, sim_students, out);
      std::printf("wrote %d trajectories to %s\n", summary.n_students,
                  summary.out_path.c_str());
      std::printf("mean pretest %s, mean reward %s, quit rate %s\n",
                  tutor::fmt_double(summary.mean_pretest).c_str(),
                  tutor::fmt_double(summary.mean_reward).c_str(),
                  tutor::fmt_double(summary.quit_rate).c_str());
    } else if (online->parsed()) {
      tutor::ExperimentConfig cfg = resolve_config(online_opts);
      if (online_students >= 0) cfg.ppo.total_students = online_students;
      const auto result = tutor::cmd_train_online(cfg);
      std::printf("run dir %s: %d updates (%d new)\n", result.run_dir.c_str(),
                  result.total_updates, result.updates_run);
      if (!result.diagnostics.empty()) {
        const auto& d = result.diagnostics.back();
        std::printf("last update: mean reward %s, clip %s, kl %s\n",
                    tutor::fmt_double(d.mean_reward).c_str(),
                    tutor::fmt_double(d.clip_fraction).c_str(),
                    tutor::fmt_double(d.approx_kl).c_str());
      }
    } else if (offline->parsed()) {
      tutor::ExperimentConfig cfg = resolve_config(offline_opts);
      if (offline_splits > 0) cfg.offline_splits = offline_splits;
      if (offline_threads > 0) cfg.offline_threads = offline_threads;
      const auto report_out = tutor::cmd_train_offline(cfg, offline_data);
      const auto& chosen = report_out.configs[report_out.chosen_index];
      std::printf("chose config #%d (%s), mean WIS %s\n", report_out.chosen_index,
                  tutor::offline_algorithm_name(chosen.config.algorithm).c_str(),
                  tutor::fmt_double(chosen.mean_wis).c_str());
      std::printf("final checkpoint: %s\n", report_out.final_checkpoint_path.c_str());
    } else if (eval->parsed()) {
      tutor::ExperimentConfig cfg = resolve_config(eval_opts);
      if (eval_mode.empty()) eval_mode = eval_data.empty() ? "rollout" : "wis";
      const auto rec = tutor::cmd_evaluate(cfg, eval_ckpt, eval_mode, eval_data,
                                           eval_rollout, eval_opts.out);
      if (rec.mode == "wis") {
        std::printf("wis estimate %s (ess %s, n=%d)\n",
                    tutor::fmt_double(rec.estimate).c_str(),
                    tutor::fmt_double(rec.ess).c_str(), rec.n);
      } else {
        std::printf("rollout mean %s (std %s, n=%d)\n",
                    tutor::fmt_double(rec.estimate).c_str(),
                    tutor::fmt_double(rec.std_dev).c_str(), rec.n);
      }
    } else if (explain->parsed()) {
      tutor::ExperimentConfig cfg = resolve_config(explain_opts);
      const auto outputs = tutor::cmd_explain(cfg, explain_ckpt, explain_data);
      std::printf("wrote %s, %s, %s\n", outputs.attribution_csv_path.c_str(),
                  outputs.groups_csv_path.c_str(), outputs.groups_svg_path.c_str());
    } else if (report->parsed()) {
      std::fputs(tutor::report_summary(report_path).c_str(), stdout);
    }
  } catch (const tutor::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const tutor::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const tutor::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
