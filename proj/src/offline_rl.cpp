#include "tutor/offline_rl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_set>
#include <utility>

#include "json.hpp"
#include "tutor/errors.hpp"
#include "tutor/rng.hpp"
#include "tutor/text.hpp"

namespace tutor {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MlpSpec policy_spec_for(const OfflineConfig& cfg) {
  MlpSpec spec;
  spec.input_dim = kNumFeatures;
  spec.hidden_dims = cfg.hidden_dims;
  spec.output_dim = kNumActions;
  spec.activation = cfg.activation;
  spec.head = OutputHead::kSoftmax;
  return spec;
}

double log_importance_weight(const MlpSpec& spec, const ParameterSet& params,
                             const Trajectory& traj) {
  double lw = 0.0;
  for (const LoggedStep& step : traj.steps) {
    const int a = static_cast<int>(step.action);
    const double behavior = step.behavior_probs[a];
    if (!(behavior > 0.0))
      throw DataError("trajectory " + traj.student_id +
                      ": logged action has zero behavior probability");
    const auto p = forward(spec, params, step.normalized);
    lw += std::log(p[a]) - std::log(behavior);
  }
  return lw;
}

struct PoisEval {
  double wis = 0.0;
  double ess = 0.0;        // un-normalized, in [1, n]
  double objective = 0.0;  // wis + eta * ess / n
  // Shifted weights and sums, reused by the gradient pass.
  std::vector<double> weights;
  double sum_w = 0.0;
  double sum_w2 = 0.0;
};

PoisEval pois_eval(const std::vector<Trajectory>& dataset, const MlpSpec& spec,
                   const ParameterSet& params, double ess_penalty) {
  if (dataset.empty()) throw UsageError("pois objective: empty dataset");
  const std::size_t n = dataset.size();
  std::vector<double> lw(n);
  for (std::size_t i = 0; i < n; ++i)
    lw[i] = log_importance_weight(spec, params, dataset[i]);
  // The objective is invariant under a common weight scale, so shift by the
  // max log-weight before exponentiating to avoid overflow/underflow.
  const double shift = *std::max_element(lw.begin(), lw.end());

  PoisEval ev;
  ev.weights.resize(n);
  double sum_wr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ev.weights[i] = std::exp(lw[i] - shift);
    ev.sum_w += ev.weights[i];
    ev.sum_w2 += ev.weights[i] * ev.weights[i];
    sum_wr += ev.weights[i] * dataset[i].terminal_reward;
  }
  ev.wis = sum_wr / ev.sum_w;
  ev.ess = ev.sum_w * ev.sum_w / ev.sum_w2;
  ev.objective = ev.wis + ess_penalty * ev.ess / static_cast<double>(n);
  return ev;
}

double config_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

const std::string& offline_algorithm_name(OfflineAlgorithm a) {
  static const std::string bc = "bc";
  static const std::string pois = "pois";
  return a == OfflineAlgorithm::kBc ? bc : pois;
}

OfflineAlgorithm offline_algorithm_from_name(const std::string& name) {
  if (name == "bc") return OfflineAlgorithm::kBc;
  if (name == "pois") return OfflineAlgorithm::kPois;
  throw DataError("unknown offline algorithm: " + name);
}

void OfflineConfig::validate() const {
  for (int d : hidden_dims)
    if (d < 1) throw ConfigError("offline.hidden_dims: entries must be >= 1");
  if (epochs < 1) throw ConfigError("offline.epochs: must be >= 1");
  if (ess_penalty < 0.0) throw ConfigError("offline.ess_penalty: must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("offline.learning_rate: must be > 0");
}

void OfflineGrid::validate() const {
  if (algorithms.empty()) throw ConfigError("grid.algorithms: must be non-empty");
  if (hidden_shapes.empty()) throw ConfigError("grid.hidden_shapes: must be non-empty");
  if (epoch_choices.empty()) throw ConfigError("grid.epochs: must be non-empty");
  if (ess_penalties.empty()) throw ConfigError("grid.ess_penalties: must be non-empty");
  for (const auto& shape : hidden_shapes)
    for (int d : shape)
      if (d < 1) throw ConfigError("grid.hidden_shapes: entries must be >= 1");
  for (int e : epoch_choices)
    if (e < 1) throw ConfigError("grid.epochs: entries must be >= 1");
  for (double eta : ess_penalties)
    if (eta < 0.0) throw ConfigError("grid.ess_penalties: entries must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("grid.learning_rate: must be > 0");
}

std::vector<OfflineConfig> OfflineGrid::enumerate() const {
  validate();
  std::vector<OfflineConfig> out;
  out.reserve(algorithms.size() * hidden_shapes.size() * epoch_choices.size() *
              ess_penalties.size());
  for (OfflineAlgorithm alg : algorithms) {
    for (const auto& shape : hidden_shapes) {
      for (int epochs : epoch_choices) {
        for (double eta : ess_penalties) {
          OfflineConfig cfg;
          cfg.algorithm = alg;
          cfg.hidden_dims = shape;
          cfg.epochs = epochs;
          cfg.ess_penalty = eta;
          cfg.activation = activation;
          cfg.learning_rate = learning_rate;
          out.push_back(std::move(cfg));
        }
      }
    }
  }
  return out;
}

double importance_weight(const PolicyCheckpoint& ckpt, const Trajectory& traj) {
  return std::exp(log_importance_weight(ckpt.policy_spec, ckpt.policy_params, traj));
}

WisResult wis_evaluate(const PolicyCheckpoint& ckpt,
                       const std::vector<Trajectory>& dataset) {
  if (dataset.empty()) throw UsageError("wis_evaluate: empty dataset");
  const std::size_t n = dataset.size();
  std::vector<double> lw(n);
  for (std::size_t i = 0; i < n; ++i)
    lw[i] = log_importance_weight(ckpt.policy_spec, ckpt.policy_params, dataset[i]);
  const double shift = *std::max_element(lw.begin(), lw.end());

  double sum_w = 0.0, sum_w2 = 0.0, sum_wr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(lw[i] - shift);
    sum_w += w;
    sum_w2 += w * w;
    sum_wr += w * dataset[i].terminal_reward;
  }
  // After the shift the largest weight is exactly 1, so sum_w >= 1.
  WisResult r;
  r.estimate = sum_wr / sum_w;
  r.ess = sum_w * sum_w / sum_w2;
  return r;
}

double bc_loss(const std::vector<Trajectory>& dataset, const MlpSpec& spec,
               const ParameterSet& params) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Trajectory& traj : dataset) {
    for (const LoggedStep& step : traj.steps) {
      const auto p = forward(spec, params, step.normalized);
      for (int c = 0; c < kNumActions; ++c) {
        const double target = step.behavior_probs[c];
        if (!(target > 0.0))
          throw DataError("trajectory " + traj.student_id +
                          ": behavior probability is not positive");
        total += p[c] * (std::log(p[c]) - std::log(target));
      }
      ++count;
    }
  }
  if (count == 0) throw UsageError("bc_loss: dataset has no decision points");
  return total / static_cast<double>(count);
}

OfflineTrainResult bc_train(const std::vector<Trajectory>& dataset,
                            const OfflineConfig& cfg,
                            const NormalizationRanges& ranges) {
  cfg.validate();
  ranges.validate();
  const MlpSpec spec = policy_spec_for(cfg);

  std::vector<const LoggedStep*> steps;
  for (const Trajectory& traj : dataset)
    for (const LoggedStep& step : traj.steps) steps.push_back(&step);
  if (steps.empty()) throw UsageError("bc_train: dataset has no decision points");

  Rng rng(cfg.seed);
  ParameterSet params = init_params(spec, rng);
  AdamState adam(params.values.size(), cfg.learning_rate);

  OfflineTrainResult result;
  ForwardCache cache;
  ParameterSet grads = zero_params(spec);
  std::vector<double> grad_out(static_cast<std::size_t>(kNumActions));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const LoggedStep* step : steps) {
      const auto p = forward(spec, params, step->normalized, &cache);
      for (int c = 0; c < kNumActions; ++c)
        grad_out[c] = std::log(p[c]) + 1.0 - std::log(step->behavior_probs[c]);
      std::fill(grads.values.begin(), grads.values.end(), 0.0);
      backward_accumulate(spec, params, cache, grad_out, 1.0, grads);
      adam_step(adam, params, grads);
    }
    result.epoch_losses.push_back(bc_loss(dataset, spec, params));
  }

  result.ckpt.policy_spec = spec;
  result.ckpt.policy_params = std::move(params);
  result.ckpt.ranges = ranges;
  result.ckpt.provenance = provenance::kBc;
  result.ckpt.seed_lineage = cfg.seed;
  return result;
}

double pois_objective(const std::vector<Trajectory>& dataset, const MlpSpec& spec,
                      const ParameterSet& params, double ess_penalty) {
  return pois_eval(dataset, spec, params, ess_penalty).objective;
}

ParameterSet pois_gradient(const std::vector<Trajectory>& dataset,
                           const MlpSpec& spec, const ParameterSet& params,
                           double ess_penalty) {
  const PoisEval ev = pois_eval(dataset, spec, params, ess_penalty);
  const double n = static_cast<double>(dataset.size());

  ParameterSet grads = zero_params(spec);
  ForwardCache cache;
  std::vector<double> grad_out(static_cast<std::size_t>(kNumActions));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double w = ev.weights[i];
    // d(objective)/d(w_i) through both the WIS ratio and the ESS bonus,
    // multiplied by w_i from d(w_i)/d(theta) = w_i * sum_t dlog pi_t.
    const double dwis = (dataset[i].terminal_reward - ev.wis) / ev.sum_w;
    const double dess = 2.0 * ess_penalty * ev.sum_w * (ev.sum_w2 - ev.sum_w * w) /
                        (n * ev.sum_w2 * ev.sum_w2);
    const double coef = w * (dwis + dess);
    if (coef == 0.0) continue;
    for (const LoggedStep& step : dataset[i].steps) {
      const auto p = forward(spec, params, step.normalized, &cache);
      const int a = static_cast<int>(step.action);
      std::fill(grad_out.begin(), grad_out.end(), 0.0);
      grad_out[a] = coef / p[a];
      backward_accumulate(spec, params, cache, grad_out, 1.0, grads);
    }
  }
  return grads;
}

OfflineTrainResult pois_train(const std::vector<Trajectory>& dataset,
                              const OfflineConfig& cfg,
                              const NormalizationRanges& ranges) {
  cfg.validate();
  ranges.validate();
  if (dataset.empty()) throw UsageError("pois_train: empty dataset");
  const MlpSpec spec = policy_spec_for(cfg);

  Rng rng(cfg.seed);
  ParameterSet params = init_params(spec, rng);
  AdamState adam(params.values.size(), cfg.learning_rate);

  OfflineTrainResult result;
  ParameterSet neg = zero_params(spec);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ParameterSet g = pois_gradient(dataset, spec, params, cfg.ess_penalty);
    for (std::size_t i = 0; i < neg.values.size(); ++i) neg.values[i] = -g.values[i];
    adam_step(adam, params, neg);

    const PoisEval ev = pois_eval(dataset, spec, params, cfg.ess_penalty);
    result.epoch_losses.push_back(-ev.objective);
    if (dataset.size() > 1 && ev.ess < 1.0 + 1e-9) {
      result.warnings.push_back("epoch " + std::to_string(epoch) +
                                ": effective sample size collapsed to 1");
    }
  }

  result.ckpt.policy_spec = spec;
  result.ckpt.policy_params = std::move(params);
  result.ckpt.ranges = ranges;
  result.ckpt.provenance = provenance::kPois;
  result.ckpt.seed_lineage = cfg.seed;
  return result;
}

OfflineTrainResult train_offline_config(const std::vector<Trajectory>& dataset,
                                        const OfflineConfig& cfg,
                                        const NormalizationRanges& ranges) {
  return cfg.algorithm == OfflineAlgorithm::kBc ? bc_train(dataset, cfg, ranges)
                                                : pois_train(dataset, cfg, ranges);
}

void split_dataset(const std::vector<Trajectory>& dataset, std::uint64_t split_seed,
                   std::vector<Trajectory>* train,
                   std::vector<Trajectory>* validation) {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const Trajectory& t : dataset) {
    if (seen.insert(t.student_id).second) ids.push_back(t.student_id);
  }
  if (ids.size() < 2) throw UsageError("split_dataset: need at least two students");

  Rng rng(split_seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_int(i + 1);
    std::swap(ids[i], ids[j]);
  }
  const std::size_t train_count = (ids.size() + 1) / 2;
  std::unordered_set<std::string> train_ids(ids.begin(),
                                            ids.begin() + static_cast<long>(train_count));

  train->clear();
  validation->clear();
  for (const Trajectory& t : dataset) {
    if (train_ids.count(t.student_id))
      train->push_back(t);
    else
      validation->push_back(t);
  }
}

int select_best_config(const std::vector<ConfigOutcome>& outcomes) {
  if (outcomes.empty()) throw UsageError("select_best_config: no outcomes");
  // Argmax mean WIS; ties fall to higher mean ESS, then fewer parameters,
  // then the lower config index.
  int best = 0;
  for (int c = 1; c < static_cast<int>(outcomes.size()); ++c) {
    const ConfigOutcome& cand = outcomes[c];
    const ConfigOutcome& inc = outcomes[best];
    bool better = false;
    if (cand.mean_wis > inc.mean_wis) {
      better = true;
    } else if (cand.mean_wis == inc.mean_wis) {
      if (cand.mean_ess > inc.mean_ess) {
        better = true;
      } else if (cand.mean_ess == inc.mean_ess) {
        const int cand_params = policy_spec_for(cand.config).param_count();
        const int inc_params = policy_spec_for(inc.config).param_count();
        if (cand_params < inc_params) better = true;
      }
    }
    if (better) best = c;
  }
  return best;
}

SelectionReport grid_search(const std::vector<Trajectory>& dataset,
                            const OfflineGrid& grid, int n_splits,
                            std::uint64_t base_seed, int threads) {
  if (dataset.empty()) throw UsageError("grid_search: empty dataset");
  if (n_splits < 1) throw UsageError("grid_search: n_splits must be >= 1");
  const std::vector<OfflineConfig> configs = grid.enumerate();

  SelectionReport report;
  report.base_seed = base_seed;
  report.n_splits = n_splits;

  // Splits are shared across configurations: one partition per split index.
  std::vector<std::pair<std::vector<Trajectory>, std::vector<Trajectory>>> splits(
      static_cast<std::size_t>(n_splits));
  for (int s = 0; s < n_splits; ++s) {
    const std::uint64_t seed =
        derive_seed(base_seed, "split", static_cast<std::uint64_t>(s));
    report.split_seeds.push_back(seed);
    split_dataset(dataset, seed, &splits[s].first, &splits[s].second);
  }

  report.configs.resize(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    report.configs[c].config_index = static_cast<int>(c);
    report.configs[c].config = configs[c];
    report.configs[c].splits.resize(static_cast<std::size_t>(n_splits));
  }

  // Every (config, split) task has a pre-assigned seed and result slot, so
  // the report is identical no matter how tasks are scheduled.
  const std::size_t total_tasks = configs.size() * static_cast<std::size_t>(n_splits);
  std::atomic<std::size_t> next_task{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t task = next_task.fetch_add(1);
      if (task >= total_tasks) return;
      const std::size_t c = task / static_cast<std::size_t>(n_splits);
      const int s = static_cast<int>(task % static_cast<std::size_t>(n_splits));
      OfflineConfig cfg = configs[c];
      cfg.seed = derive_seed(base_seed, "train", static_cast<std::uint64_t>(c),
                             static_cast<std::uint64_t>(s));
      SplitOutcome& slot = report.configs[c].splits[s];
      try {
        const OfflineTrainResult trained = train_offline_config(splits[s].first, cfg);
        const WisResult wr = wis_evaluate(trained.ckpt, splits[s].second);
        slot.wis = wr.estimate;
        slot.ess = wr.ess;
      } catch (const std::exception& e) {
        slot.failed = true;
        slot.error = e.what();
        slot.wis = kNegInf;
        slot.ess = 0.0;
      }
    }
  };

  const int n_workers = std::max(1, threads);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (ConfigOutcome& co : report.configs) {
    std::vector<double> wis, ess;
    bool any_failed = false;
    for (const SplitOutcome& so : co.splits) {
      any_failed = any_failed || so.failed;
      wis.push_back(so.wis);
      ess.push_back(so.ess);
    }
    co.mean_ess = config_mean(ess);
    if (any_failed) {
      co.mean_wis = kNegInf;
      co.std_wis = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    co.mean_wis = config_mean(wis);
    double ss = 0.0;
    for (double x : wis) ss += (x - co.mean_wis) * (x - co.mean_wis);
    co.std_wis = wis.size() > 1
                     ? std::sqrt(ss / static_cast<double>(wis.size() - 1))
                     : 0.0;
  }

  const int best = select_best_config(report.configs);
  report.chosen_index = best;

  OfflineConfig final_cfg = configs[best];
  final_cfg.seed =
      derive_seed(base_seed, "final-train", static_cast<std::uint64_t>(best));
  report.final_checkpoint = train_offline_config(dataset, final_cfg).ckpt;
  return report;
}

namespace {

nlohmann::ordered_json config_to_json(const OfflineConfig& cfg) {
  nlohmann::ordered_json j;
  j["algorithm"] = offline_algorithm_name(cfg.algorithm);
  j["hidden_dims"] = cfg.hidden_dims;
  j["epochs"] = cfg.epochs;
  j["ess_penalty"] = cfg.ess_penalty;
  j["activation"] = activation_name(cfg.activation);
  j["learning_rate"] = cfg.learning_rate;
  return j;
}

nlohmann::ordered_json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

std::string hidden_label(const std::vector<int>& dims) {
  if (dims.empty()) return "linear";
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(dims[i]);
  }
  return s;
}

}  // namespace

std::string selection_report_to_json(const SelectionReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "tutor-selection-report";
  j["base_seed"] = report.base_seed;
  j["n_splits"] = report.n_splits;
  j["split_seeds"] = report.split_seeds;
  j["chosen_index"] = report.chosen_index;
  j["chosen_config"] = config_to_json(report.configs[report.chosen_index].config);
  j["final_checkpoint_path"] = report.final_checkpoint_path;
  auto rows = nlohmann::ordered_json::array();
  for (const ConfigOutcome& co : report.configs) {
    nlohmann::ordered_json r;
    r["config_index"] = co.config_index;
    r["config"] = config_to_json(co.config);
    r["mean_wis"] = finite_or_null(co.mean_wis);
    r["std_wis"] = finite_or_null(co.std_wis);
    r["mean_ess"] = finite_or_null(co.mean_ess);
    auto ss = nlohmann::ordered_json::array();
    for (const SplitOutcome& so : co.splits) {
      nlohmann::ordered_json sj;
      sj["wis"] = finite_or_null(so.wis);
      sj["ess"] = finite_or_null(so.ess);
      sj["failed"] = so.failed;
      if (so.failed) sj["error"] = so.error;
      ss.push_back(std::move(sj));
    }
    r["splits"] = std::move(ss);
    rows.push_back(std::move(r));
  }
  j["configs"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string selection_report_csv(const SelectionReport& report) {
  std::string s =
      "config_index,algorithm,hidden,epochs,ess_penalty,mean_wis,std_wis,mean_ess,"
      "failed_splits,chosen\n";
  for (const ConfigOutcome& co : report.configs) {
    int failed = 0;
    for (const SplitOutcome& so : co.splits) failed += so.failed ? 1 : 0;
    s += std::to_string(co.config_index);
    s += ',';
    s += offline_algorithm_name(co.config.algorithm);
    s += ',';
    s += hidden_label(co.config.hidden_dims);
    s += ',';
    s += std::to_string(co.config.epochs);
    s += ',';
    s += fmt_double(co.config.ess_penalty);
    s += ',';
    s += fmt_double(co.mean_wis);
    s += ',';
    s += fmt_double(co.std_wis);
    s += ',';
    s += fmt_double(co.mean_ess);
    s += ',';
    s += std::to_string(failed);
    s += ',';
    s += (co.config_index == report.chosen_index ? "1" : "0");
    s += '\n';
  }
  return s;
}

}  // namespace tutor
