#include "tutor/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tutor/errors.hpp"

namespace tutor {

using ordered_json = nlohmann::ordered_json;

void PolicyCheckpoint::validate() const {
  policy_spec.validate();
  if (policy_spec.input_dim != kNumFeatures) {
    throw ConfigError("policy net must take the 8 features");
  }
  if (policy_spec.output_dim != kNumActions ||
      policy_spec.head != OutputHead::kSoftmax) {
    throw ConfigError("policy net must be a 4-way softmax head");
  }
  if (static_cast<int>(policy_params.size()) != policy_spec.param_count()) {
    throw ConfigError("policy parameter count does not match spec");
  }
  if (value_spec.has_value() != value_params.has_value()) {
    throw ConfigError("value spec and parameters must come together");
  }
  if (value_spec) {
    value_spec->validate();
    if (value_spec->output_dim != 1 || value_spec->head != OutputHead::kLinear) {
      throw ConfigError("value net must be a scalar linear head");
    }
    if (static_cast<int>(value_params->size()) != value_spec->param_count()) {
      throw ConfigError("value parameter count does not match spec");
    }
  }
  ranges.validate();
}

PolicyCheckpoint make_uniform_checkpoint(const NormalizationRanges& ranges) {
  PolicyCheckpoint ckpt;
  ckpt.policy_spec = MlpSpec{kNumFeatures, {}, kNumActions, Activation::kTanh,
                             OutputHead::kSoftmax};
  ckpt.policy_params = zero_params(ckpt.policy_spec);
  ckpt.ranges = ranges;
  ckpt.provenance = provenance::kUniform;
  ckpt.validate();
  return ckpt;
}

ActionProbs action_distribution_normalized(const PolicyCheckpoint& ckpt,
                                           const FeatureVector& normalized) {
  const std::vector<double> out =
      forward(ckpt.policy_spec, ckpt.policy_params, normalized);
  ActionProbs probs{};
  for (int i = 0; i < kNumActions; ++i) probs[i] = out[i];
  return probs;
}

ActionProbs action_distribution(const PolicyCheckpoint& ckpt,
                                const ObservationVector& obs) {
  return action_distribution_normalized(ckpt, normalize(obs, ckpt.ranges));
}

std::pair<PedagogicalAction, double> sample_action(const ActionProbs& dist,
                                                   Rng& rng) {
  for (double p : dist) {
    if (!(p > 0.0)) throw NumericError("degenerate action distribution");
  }
  const double u = rng.uniform();
  double cdf = 0.0;
  int chosen = kNumActions - 1;  // guard against cdf rounding below 1
  for (int i = 0; i < kNumActions; ++i) {
    cdf += dist[i];
    if (u < cdf) {
      chosen = i;
      break;
    }
  }
  return {static_cast<PedagogicalAction>(chosen), std::log(dist[chosen])};
}

double state_value_normalized(const PolicyCheckpoint& ckpt,
                              const FeatureVector& normalized) {
  if (!ckpt.has_value_net()) {
    throw UsageError("checkpoint has no value network");
  }
  return forward(*ckpt.value_spec, *ckpt.value_params, normalized)[0];
}

double state_value(const PolicyCheckpoint& ckpt, const ObservationVector& obs) {
  return state_value_normalized(ckpt, normalize(obs, ckpt.ranges));
}

namespace {

ordered_json spec_to_json(const MlpSpec& spec) {
  ordered_json j;
  j["input_dim"] = spec.input_dim;
  j["hidden_dims"] = spec.hidden_dims;
  j["output_dim"] = spec.output_dim;
  j["activation"] = activation_name(spec.activation);
  j["head"] = head_name(spec.head);
  return j;
}

MlpSpec spec_from_json(const ordered_json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  spec.output_dim = j.at("output_dim").get<int>();
  spec.activation = activation_from_name(j.at("activation").get<std::string>());
  spec.head = head_from_name(j.at("head").get<std::string>());
  return spec;
}

}  // namespace

std::string checkpoint_to_json(const PolicyCheckpoint& ckpt) {
  ckpt.validate();
  ordered_json j;
  j["schema_version"] = ckpt.schema_version;
  j["kind"] = "tutor-policy-checkpoint";
  j["provenance"] = ckpt.provenance;
  j["seed_lineage"] = ckpt.seed_lineage;
  ordered_json acts = ordered_json::array();
  for (const auto& a : ckpt.actions) acts.push_back(a);
  j["actions"] = std::move(acts);
  ordered_json ranges = ordered_json::array();
  for (int i = 0; i < kNumFeatures; ++i) {
    ranges.push_back({{"feature", feature_names()[i]},
                      {"min", ckpt.ranges.ranges[i].lo},
                      {"max", ckpt.ranges.ranges[i].hi}});
  }
  j["normalization"] = std::move(ranges);
  j["policy"] = spec_to_json(ckpt.policy_spec);
  j["policy"]["params"] = ckpt.policy_params.values;
  if (ckpt.value_spec) {
    j["value"] = spec_to_json(*ckpt.value_spec);
    j["value"]["params"] = ckpt.value_params->values;
  } else {
    j["value"] = nullptr;
  }
  return j.dump(2);
}

PolicyCheckpoint checkpoint_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.value("kind", "") != "tutor-policy-checkpoint") {
      throw DataError("not a policy checkpoint file");
    }
    PolicyCheckpoint ckpt;
    ckpt.schema_version = j.at("schema_version").get<int>();
    if (ckpt.schema_version != kCheckpointSchemaVersion) {
      throw DataError("unsupported checkpoint schema_version");
    }
    ckpt.provenance = j.at("provenance").get<std::string>();
    ckpt.seed_lineage = j.at("seed_lineage").get<std::uint64_t>();
    const auto& acts = j.at("actions");
    if (acts.size() != kNumActions) {
      throw DataError("checkpoint must list 4 actions");
    }
    for (int i = 0; i < kNumActions; ++i) {
      ckpt.actions[i] = acts[i].get<std::string>();
    }
    const auto& ranges = j.at("normalization");
    if (ranges.size() != kNumFeatures) {
      throw DataError("checkpoint must carry 8 normalization ranges");
    }
    for (int i = 0; i < kNumFeatures; ++i) {
      ckpt.ranges.ranges[i].lo = ranges[i].at("min").get<double>();
      ckpt.ranges.ranges[i].hi = ranges[i].at("max").get<double>();
    }
    ckpt.policy_spec = spec_from_json(j.at("policy"));
    ckpt.policy_params.values =
        j.at("policy").at("params").get<std::vector<double>>();
    if (!j.at("value").is_null()) {
      ckpt.value_spec = spec_from_json(j.at("value"));
      ParameterSet vp;
      vp.values = j.at("value").at("params").get<std::vector<double>>();
      ckpt.value_params = std::move(vp);
    }
    ckpt.validate();
    return ckpt;
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << checkpoint_to_json(ckpt) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace tutor
