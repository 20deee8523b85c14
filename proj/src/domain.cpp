#include "tutor/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tutor/errors.hpp"

namespace tutor {

using ordered_json = nlohmann::ordered_json;

const std::array<std::string, kNumActions>& action_names() {
  static const std::array<std::string, kNumActions> names = {
      "direct_hint", "acknowledgment", "encouragement", "guided_prompt"};
  return names;
}

const std::string& action_name(PedagogicalAction a) {
  return action_names()[static_cast<int>(a)];
}

PedagogicalAction action_from_name(const std::string& name) {
  const auto& names = action_names();
  for (int i = 0; i < kNumActions; ++i) {
    if (names[i] == name) return static_cast<PedagogicalAction>(i);
  }
  throw DataError("unknown action name: " + name);
}

PedagogicalAction action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw DataError("action index out of range: " + std::to_string(index));
  }
  return static_cast<PedagogicalAction>(index);
}

const std::array<std::string, kNumFeatures>& feature_names() {
  static const std::array<std::string, kNumFeatures> names = {
      "grade",   "pre_score", "step",     "failed_attempts",
      "nlp_pos", "nlp_neg",   "nlp_help", "anxiety"};
  return names;
}

std::vector<std::string> ObservationVector::violations() const {
  std::vector<std::string> out;
  auto check = [&out](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };
  check(grade >= 3 && grade <= 5, "grade out of [3,5]");
  check(pre_score >= 0 && pre_score <= 8, "pre_score out of [0,8]");
  check(step >= 1 && step <= 6, "step out of [1,6]");
  check(failed_attempts >= 0, "failed_attempts negative");
  check(nlp_pos >= 0.0 && nlp_pos <= 1.0, "nlp_pos out of [0,1]");
  check(nlp_neg >= 0.0 && nlp_neg <= 1.0, "nlp_neg out of [0,1]");
  check(nlp_help >= 0.0 && nlp_help <= 1.0, "nlp_help out of [0,1]");
  check(anxiety >= 9 && anxiety <= 45, "anxiety out of [9,45]");
  return out;
}

FeatureVector raw_features(const ObservationVector& obs) {
  return {static_cast<double>(obs.grade),
          static_cast<double>(obs.pre_score),
          static_cast<double>(obs.step),
          static_cast<double>(obs.failed_attempts),
          obs.nlp_pos,
          obs.nlp_neg,
          obs.nlp_help,
          static_cast<double>(obs.anxiety)};
}

NormalizationRanges NormalizationRanges::defaults() {
  NormalizationRanges r;
  r.ranges = {{{3.0, 5.0},
               {0.0, 8.0},
               {1.0, 6.0},
               {0.0, 10.0},
               {0.0, 1.0},
               {0.0, 1.0},
               {0.0, 1.0},
               {9.0, 45.0}}};
  return r;
}

void NormalizationRanges::validate() const {
  for (int i = 0; i < kNumFeatures; ++i) {
    if (!(ranges[i].hi > ranges[i].lo)) {
      throw ConfigError("normalization range for " + feature_names()[i] +
                        " has max <= min");
    }
  }
}

FeatureVector normalize(const ObservationVector& obs,
                        const NormalizationRanges& ranges) {
  ranges.validate();
  const FeatureVector raw = raw_features(obs);
  FeatureVector out{};
  for (int i = 0; i < kNumFeatures; ++i) {
    const auto& r = ranges.ranges[i];
    out[i] = std::clamp((raw[i] - r.lo) / (r.hi - r.lo), 0.0, 1.0);
  }
  return out;
}

FeatureVector denormalize(const FeatureVector& normalized,
                          const NormalizationRanges& ranges) {
  ranges.validate();
  FeatureVector out{};
  for (int i = 0; i < kNumFeatures; ++i) {
    const auto& r = ranges.ranges[i];
    out[i] = r.lo + normalized[i] * (r.hi - r.lo);
  }
  return out;
}

ActionProbs floor_probs(const ActionProbs& probs) {
  bool needs_floor = false;
  for (double p : probs) {
    if (p < kProbFloor) needs_floor = true;
  }
  if (!needs_floor) return probs;
  ActionProbs out;
  double sum = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    out[i] = std::max(probs[i], kProbFloor);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

int Trajectory::pre_score() const {
  return static_cast<int>(std::count(pre_items.begin(), pre_items.end(), true));
}

std::optional<int> Trajectory::post_score() const {
  if (!post_items) return std::nullopt;
  return static_cast<int>(
      std::count(post_items->begin(), post_items->end(), true));
}

int Trajectory::hint_count() const {
  int n = 0;
  for (const auto& s : steps) n += s.events.hint_given ? 1 : 0;
  return n;
}

int Trajectory::helpful_count() const {
  int n = 0;
  for (const auto& s : steps) n += s.events.helpful_click ? 1 : 0;
  return n;
}

ValidationResult validate_trajectory(const Trajectory& t) {
  ValidationResult res;
  auto fail = [&res](const std::string& msg) {
    res.ok = false;
    res.violations.push_back(msg);
  };

  int quit_events = 0;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const LoggedStep& s = t.steps[i];
    const std::string at = "step " + std::to_string(i) + ": ";

    for (const auto& v : s.observation.violations()) fail(at + v);

    double sum = 0.0;
    bool below_floor = false;
    for (double p : s.behavior_probs) {
      sum += p;
      // Flooring renormalizes by a sum as large as 1 + 3 * kProbFloor, which
      // shaves up to ~3e-8 (relative) off a floored entry; allow that much.
      if (p < kProbFloor * (1.0 - 4.0 * kProbFloor)) below_floor = true;
    }
    if (below_floor) fail(at + "simplex violation: probability below floor");
    if (std::abs(sum - 1.0) > 1e-9) {
      fail(at + "simplex violation: probabilities sum to " +
           std::to_string(sum));
    }

    if (s.events.quit) {
      ++quit_events;
      if (i + 1 != t.steps.size()) fail(at + "quit event before final step");
    }
  }

  if (quit_events > 1) fail("multiple quit events in one trajectory");
  if (t.quit && quit_events == 0 && !t.steps.empty()) {
    fail("trajectory marked quit but no step carries a quit event");
  }
  if (!t.quit && quit_events > 0) {
    fail("quit event logged but trajectory not marked quit");
  }
  if (t.quit && t.post_items.has_value()) {
    fail("quit/posttest inconsistency: quit trajectory has post_items");
  }
  if (!t.quit && !t.post_items.has_value()) {
    fail("quit/posttest inconsistency: completed trajectory lacks post_items");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json items_to_json(const std::array<bool, kNumItems>& items) {
  ordered_json arr = ordered_json::array();
  for (bool b : items) arr.push_back(b);
  return arr;
}

std::array<bool, kNumItems> items_from_json(const ordered_json& j,
                                            const char* field) {
  if (!j.is_array() || j.size() != kNumItems) {
    throw DataError(std::string(field) + " must be an array of 8 booleans");
  }
  std::array<bool, kNumItems> out{};
  for (int i = 0; i < kNumItems; ++i) out[i] = j[i].get<bool>();
  return out;
}

ordered_json step_to_json(const LoggedStep& s) {
  ordered_json obs;
  obs["grade"] = s.observation.grade;
  obs["pre_score"] = s.observation.pre_score;
  obs["step"] = s.observation.step;
  obs["failed_attempts"] = s.observation.failed_attempts;
  obs["nlp_pos"] = s.observation.nlp_pos;
  obs["nlp_neg"] = s.observation.nlp_neg;
  obs["nlp_help"] = s.observation.nlp_help;
  obs["anxiety"] = s.observation.anxiety;

  ordered_json j;
  j["obs"] = obs;
  j["normalized"] = s.normalized;
  j["action"] = static_cast<int>(s.action);
  j["behavior_probs"] = s.behavior_probs;
  j["events"] = {{"hint_given", s.events.hint_given},
                 {"helpful_click", s.events.helpful_click},
                 {"quit", s.events.quit},
                 {"step_completed", s.events.step_completed}};
  return j;
}

LoggedStep step_from_json(const ordered_json& j) {
  LoggedStep s;
  const auto& obs = j.at("obs");
  s.observation.grade = obs.at("grade").get<int>();
  s.observation.pre_score = obs.at("pre_score").get<int>();
  s.observation.step = obs.at("step").get<int>();
  s.observation.failed_attempts = obs.at("failed_attempts").get<int>();
  s.observation.nlp_pos = obs.at("nlp_pos").get<double>();
  s.observation.nlp_neg = obs.at("nlp_neg").get<double>();
  s.observation.nlp_help = obs.at("nlp_help").get<double>();
  s.observation.anxiety = obs.at("anxiety").get<int>();

  const auto& norm = j.at("normalized");
  if (!norm.is_array() || norm.size() != kNumFeatures) {
    throw DataError("normalized must be an 8-vector");
  }
  for (int i = 0; i < kNumFeatures; ++i) s.normalized[i] = norm[i].get<double>();

  s.action = action_from_index(j.at("action").get<int>());

  const auto& probs = j.at("behavior_probs");
  if (!probs.is_array() || probs.size() != kNumActions) {
    throw DataError("behavior_probs must be a 4-vector");
  }
  for (int i = 0; i < kNumActions; ++i) {
    s.behavior_probs[i] = probs[i].get<double>();
  }

  const auto& ev = j.at("events");
  s.events.hint_given = ev.at("hint_given").get<bool>();
  s.events.helpful_click = ev.at("helpful_click").get<bool>();
  s.events.quit = ev.at("quit").get<bool>();
  s.events.step_completed = ev.at("step_completed").get<bool>();
  return s;
}

}  // namespace

std::string trajectory_to_json_line(const Trajectory& t) {
  ordered_json j;
  j["schema_version"] = kTrajectorySchemaVersion;
  j["student_id"] = t.student_id;
  ordered_json steps = ordered_json::array();
  for (const auto& s : t.steps) steps.push_back(step_to_json(s));
  j["steps"] = std::move(steps);
  j["pre_items"] = items_to_json(t.pre_items);
  j["post_items"] = t.post_items ? items_to_json(*t.post_items)
                                 : ordered_json(nullptr);
  j["quit"] = t.quit;
  j["terminal_reward"] = t.terminal_reward;
  return j.dump();
}

Trajectory trajectory_from_json_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw DataError(std::string("malformed trajectory record: ") + e.what());
  }
  try {
    Trajectory t;
    const int version = j.at("schema_version").get<int>();
    if (version != kTrajectorySchemaVersion) {
      throw DataError("unsupported trajectory schema_version " +
                      std::to_string(version));
    }
    t.student_id = j.at("student_id").get<std::string>();
    for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
    t.pre_items = items_from_json(j.at("pre_items"), "pre_items");
    if (!j.at("post_items").is_null()) {
      t.post_items = items_from_json(j.at("post_items"), "post_items");
    }
    t.quit = j.at("quit").get<bool>();
    t.terminal_reward = j.at("terminal_reward").get<double>();
    return t;
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("malformed trajectory record: ") + e.what());
  }
}

void write_trajectory_file(const std::string& path,
                           const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  ordered_json header;
  header["kind"] = "header";
  header["format"] = "tutor-trajectories";
  header["schema_version"] = kTrajectorySchemaVersion;
  header["count"] = trajectories.size();
  out << header.dump() << "\n";
  for (const auto& t : trajectories) out << trajectory_to_json_line(t) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

std::vector<Trajectory> read_trajectory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("empty trajectory file: " + path);
  }
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw DataError(std::string("malformed header: ") + e.what());
  }
  if (header.value("kind", "") != "header" ||
      header.value("format", "") != "tutor-trajectories") {
    throw DataError("missing trajectory header record in " + path);
  }
  if (header.value("schema_version", -1) != kTrajectorySchemaVersion) {
    throw DataError("unsupported trajectory schema_version in " + path);
  }
  std::vector<Trajectory> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trajectory_from_json_line(line));
  }
  if (header.contains("count") &&
      header["count"].get<std::size_t>() != out.size()) {
    throw DataError("trajectory count mismatch in " + path + ": header says " +
                    header["count"].dump() + ", found " +
                    std::to_string(out.size()));
  }
  return out;
}

}  // namespace tutor
