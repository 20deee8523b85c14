#include "tutor/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tutor/errors.hpp"
#include "tutor/text.hpp"

namespace tutor {

const std::string& baseline_mode_name(BaselineMode m) {
  static const std::string zeros = "zeros";
  static const std::string mean = "dataset-mean";
  return m == BaselineMode::kZeros ? zeros : mean;
}

BaselineMode baseline_mode_from_name(const std::string& name) {
  if (name == "zeros") return BaselineMode::kZeros;
  if (name == "dataset-mean") return BaselineMode::kDatasetMean;
  throw DataError("unknown baseline mode: " + name);
}

void ExplainConfig::validate() const {
  if (ig_steps < 1) throw ConfigError("explain.ig_steps: must be >= 1");
}

std::vector<std::vector<double>> integrated_gradients(
    const MlpSpec& spec, const ParameterSet& params, std::span<const double> x,
    std::span<const double> baseline, int m) {
  if (m < 1) throw UsageError("integrated_gradients: m must be >= 1");
  const std::size_t dim = static_cast<std::size_t>(spec.input_dim);
  if (x.size() != dim || baseline.size() != dim)
    throw UsageError("integrated_gradients: input size mismatch");

  // attr[k][a], accumulated as the average input gradient along the path.
  std::vector<std::vector<double>> attr(
      dim, std::vector<double>(static_cast<std::size_t>(spec.output_dim), 0.0));

  std::vector<double> point(dim);
  std::vector<double> grad_out(static_cast<std::size_t>(spec.output_dim), 0.0);
  ForwardCache cache;
  for (int j = 1; j <= m; ++j) {
    const double alpha = (j - 0.5) / m;  // midpoint of the j-th subinterval
    for (std::size_t k = 0; k < dim; ++k)
      point[k] = baseline[k] + alpha * (x[k] - baseline[k]);
    forward(spec, params, point, &cache);
    for (int a = 0; a < spec.output_dim; ++a) {
      grad_out[a] = 1.0;
      const Gradients g = backward(spec, params, cache, grad_out);
      grad_out[a] = 0.0;
      for (std::size_t k = 0; k < dim; ++k) attr[k][a] += g.input[k];
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double scale = (x[k] - baseline[k]) / m;
    for (int a = 0; a < spec.output_dim; ++a) attr[k][a] *= scale;
  }
  return attr;
}

std::array<std::array<double, kNumActions>, kNumFeatures> integrated_gradients(
    const PolicyCheckpoint& ckpt, const FeatureVector& x,
    const FeatureVector& baseline, int m) {
  for (int k = 0; k < kNumFeatures; ++k) {
    if (!(x[k] >= 0.0 && x[k] <= 1.0) || !(baseline[k] >= 0.0 && baseline[k] <= 1.0))
      throw UsageError("integrated_gradients: normalized inputs must lie in [0,1]");
  }
  const auto attr =
      integrated_gradients(ckpt.policy_spec, ckpt.policy_params, x, baseline, m);
  std::array<std::array<double, kNumActions>, kNumFeatures> out{};
  for (int k = 0; k < kNumFeatures; ++k)
    for (int a = 0; a < kNumActions; ++a) out[k][a] = attr[k][a];
  return out;
}

AttributionReport aggregate_attributions(const PolicyCheckpoint& ckpt,
                                         const std::vector<Trajectory>& dataset,
                                         const ExplainConfig& cfg) {
  cfg.validate();
  std::vector<const FeatureVector*> inputs;
  for (const Trajectory& t : dataset)
    for (const LoggedStep& s : t.steps) inputs.push_back(&s.normalized);
  if (inputs.empty())
    throw UsageError("aggregate_attributions: dataset has no decision points");

  AttributionReport report;
  report.baseline_mode = cfg.baseline;
  report.ig_steps = cfg.ig_steps;
  report.n_inputs = inputs.size();

  FeatureVector baseline{};
  if (cfg.baseline == BaselineMode::kDatasetMean) {
    for (const FeatureVector* x : inputs)
      for (int k = 0; k < kNumFeatures; ++k) baseline[k] += (*x)[k];
    for (int k = 0; k < kNumFeatures; ++k)
      baseline[k] /= static_cast<double>(inputs.size());
  }
  report.baseline_vector = baseline;

  const auto base_probs = action_distribution_normalized(ckpt, baseline);
  for (const FeatureVector* x : inputs) {
    const auto attr = integrated_gradients(ckpt, *x, baseline, cfg.ig_steps);
    const auto probs = action_distribution_normalized(ckpt, *x);
    for (int a = 0; a < kNumActions; ++a) {
      double total = 0.0;
      for (int k = 0; k < kNumFeatures; ++k) {
        report.mean_attribution[k][a] += attr[k][a];
        total += attr[k][a];
      }
      const double residual = std::abs(total - (probs[a] - base_probs[a]));
      report.max_completeness_residual[a] =
          std::max(report.max_completeness_residual[a], residual);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  for (int k = 0; k < kNumFeatures; ++k)
    for (int a = 0; a < kNumActions; ++a) report.mean_attribution[k][a] *= inv_n;

  // Table layout: pretest score and math anxiety stand alone, everything
  // else is pooled. Feature order: grade, pre_score, step, failed_attempts,
  // nlp_pos, nlp_neg, nlp_help, anxiety.
  for (int a = 0; a < kNumActions; ++a) {
    report.pretest_contrib[a] = report.mean_attribution[1][a];
    report.anxiety_contrib[a] = report.mean_attribution[7][a];
    double other = 0.0;
    for (int k = 0; k < kNumFeatures; ++k) {
      if (k == 1 || k == 7) continue;
      other += report.mean_attribution[k][a];
    }
    report.other_contrib[a] = other;
  }
  return report;
}

GroupProbabilityReport group_action_probs(const PolicyCheckpoint& ckpt,
                                          const std::vector<Trajectory>& dataset,
                                          const GroupBands& bands) {
  GroupProbabilityReport report;
  report.bands = bands;

  const std::string pre_labels[2] = {
      std::to_string(bands.pretest_bottom_lo) + "-" +
          std::to_string(bands.pretest_bottom_hi),
      std::to_string(bands.pretest_top_lo) + "-" + std::to_string(bands.pretest_top_hi)};
  const std::string anx_labels[2] = {
      std::to_string(bands.anxiety_low_lo) + "-" + std::to_string(bands.anxiety_low_hi),
      std::to_string(bands.anxiety_high_lo) + "-" +
          std::to_string(bands.anxiety_high_hi)};

  // Per-cell list of per-student mean probability vectors.
  std::array<std::vector<std::array<double, kNumActions>>, 4> cell_students;
  for (const Trajectory& t : dataset) {
    if (t.steps.empty()) continue;
    const int pre = t.pre_score();
    const int anx = t.steps.front().observation.anxiety;

    int pre_band = -1;
    if (pre >= bands.pretest_bottom_lo && pre <= bands.pretest_bottom_hi)
      pre_band = 0;
    else if (pre >= bands.pretest_top_lo && pre <= bands.pretest_top_hi)
      pre_band = 1;
    int anx_band = -1;
    if (anx >= bands.anxiety_low_lo && anx <= bands.anxiety_low_hi)
      anx_band = 0;
    else if (anx >= bands.anxiety_high_lo && anx <= bands.anxiety_high_hi)
      anx_band = 1;
    if (pre_band < 0 || anx_band < 0) continue;

    std::array<double, kNumActions> mean{};
    for (const LoggedStep& s : t.steps) {
      const auto p = action_distribution_normalized(ckpt, s.normalized);
      for (int a = 0; a < kNumActions; ++a) mean[a] += p[a];
    }
    for (int a = 0; a < kNumActions; ++a)
      mean[a] /= static_cast<double>(t.steps.size());
    cell_students[pre_band * 2 + anx_band].push_back(mean);
  }

  for (int pre_band = 0; pre_band < 2; ++pre_band) {
    for (int anx_band = 0; anx_band < 2; ++anx_band) {
      const int idx = pre_band * 2 + anx_band;
      GroupCell& cell = report.cells[idx];
      cell.pretest_label = pre_labels[pre_band];
      cell.anxiety_label = anx_labels[anx_band];
      const auto& students = cell_students[idx];
      cell.n_students = static_cast<int>(students.size());
      if (students.empty()) continue;
      cell.present = true;
      cell.degenerate = students.size() == 1;

      for (const auto& s : students)
        for (int a = 0; a < kNumActions; ++a) cell.mean_probs[a] += s[a];
      for (int a = 0; a < kNumActions; ++a)
        cell.mean_probs[a] /= static_cast<double>(students.size());

      if (students.size() > 1) {
        for (int a = 0; a < kNumActions; ++a) {
          double ss = 0.0;
          for (const auto& s : students) {
            const double d = s[a] - cell.mean_probs[a];
            ss += d * d;
          }
          const double sd = std::sqrt(ss / static_cast<double>(students.size() - 1));
          cell.ci_half_width[a] =
              1.96 * sd / std::sqrt(static_cast<double>(students.size()));
        }
      }
    }
  }
  return report;
}

std::string attribution_report_csv(const AttributionReport& report) {
  std::string s = "action,pretest_score_pct,math_anxiety_pct,other_features_pct,"
                  "max_completeness_residual\n";
  for (int a = 0; a < kNumActions; ++a) {
    s += action_names()[a];
    s += ',';
    s += fmt_double(100.0 * report.pretest_contrib[a]);
    s += ',';
    s += fmt_double(100.0 * report.anxiety_contrib[a]);
    s += ',';
    s += fmt_double(100.0 * report.other_contrib[a]);
    s += ',';
    s += fmt_double(report.max_completeness_residual[a]);
    s += '\n';
  }
  return s;
}

std::string group_report_csv(const GroupProbabilityReport& report) {
  std::string s = "pretest_band,anxiety_band,n_students,action,mean_prob,ci_half_width\n";
  for (const GroupCell& cell : report.cells) {
    for (int a = 0; a < kNumActions; ++a) {
      s += cell.pretest_label;
      s += ',';
      s += cell.anxiety_label;
      s += ',';
      s += std::to_string(cell.n_students);
      s += ',';
      s += action_names()[a];
      s += ',';
      s += cell.present ? fmt_double(cell.mean_probs[a]) : std::string("absent");
      s += ',';
      s += cell.present ? fmt_double(cell.ci_half_width[a]) : std::string("absent");
      s += '\n';
    }
  }
  return s;
}

namespace {

std::string svg_num(double v) {
  // Two decimals are plenty for pixel coordinates and keep the file stable.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string group_report_svg(const GroupProbabilityReport& report,
                             PedagogicalAction action) {
  const int a = static_cast<int>(action);
  const double width = 480.0, height = 320.0;
  const double left = 60.0, bottom = 280.0, top = 30.0;
  const double plot_h = bottom - top;
  const double bar_w = 70.0, gap = 30.0;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(width) +
       "\" height=\"" + svg_num(height) + "\">\n";
  s += "<text x=\"" + svg_num(width / 2) +
       "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">Pr(" +
       action_names()[a] + ") by pretest and anxiety band</text>\n";
  // Axes.
  s += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top) + "\" x2=\"" +
       svg_num(left) + "\" y2=\"" + svg_num(bottom) +
       "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  s += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(bottom) + "\" x2=\"" +
       svg_num(width - 20.0) + "\" y2=\"" + svg_num(bottom) +
       "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  // y ticks at 0, 0.25, 0.5, 0.75, 1.
  for (int i = 0; i <= 4; ++i) {
    const double frac = i / 4.0;
    const double y = bottom - frac * plot_h;
    s += "<line x1=\"" + svg_num(left - 4.0) + "\" y1=\"" + svg_num(y) + "\" x2=\"" +
         svg_num(left) + "\" y2=\"" + svg_num(y) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + svg_num(left - 8.0) + "\" y=\"" + svg_num(y + 4.0) +
         "\" text-anchor=\"end\" font-size=\"11\">" + svg_num(frac) + "</text>\n";
  }

  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const GroupCell& cell = report.cells[i];
    const double x0 = left + gap + static_cast<double>(i) * (bar_w + gap);
    const std::string label = cell.pretest_label + " / " + cell.anxiety_label;
    s += "<text x=\"" + svg_num(x0 + bar_w / 2) + "\" y=\"" + svg_num(bottom + 16.0) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + label + "</text>\n";
    if (!cell.present) {
      s += "<text x=\"" + svg_num(x0 + bar_w / 2) + "\" y=\"" +
           svg_num(bottom - 8.0) +
           "\" text-anchor=\"middle\" font-size=\"10\">n=0</text>\n";
      continue;
    }
    const double p = cell.mean_probs[a];
    const double bar_top = bottom - p * plot_h;
    s += "<rect x=\"" + svg_num(x0) + "\" y=\"" + svg_num(bar_top) + "\" width=\"" +
         svg_num(bar_w) + "\" height=\"" + svg_num(p * plot_h) +
         "\" fill=\"#6699cc\" stroke=\"black\"/>\n";
    const double ci = cell.ci_half_width[a];
    if (ci > 0.0) {
      const double cx = x0 + bar_w / 2;
      const double y_lo = bottom - std::max(0.0, p - ci) * plot_h;
      const double y_hi = bottom - std::min(1.0, p + ci) * plot_h;
      s += "<line x1=\"" + svg_num(cx) + "\" y1=\"" + svg_num(y_lo) + "\" x2=\"" +
           svg_num(cx) + "\" y2=\"" + svg_num(y_hi) + "\" stroke=\"black\"/>\n";
      s += "<line x1=\"" + svg_num(cx - 6.0) + "\" y1=\"" + svg_num(y_lo) +
           "\" x2=\"" + svg_num(cx + 6.0) + "\" y2=\"" + svg_num(y_lo) +
           "\" stroke=\"black\"/>\n";
      s += "<line x1=\"" + svg_num(cx - 6.0) + "\" y1=\"" + svg_num(y_hi) +
           "\" x2=\"" + svg_num(cx + 6.0) + "\" y2=\"" + svg_num(y_hi) +
           "\" stroke=\"black\"/>\n";
    }
    s += "<text x=\"" + svg_num(x0 + bar_w / 2) + "\" y=\"" + svg_num(bottom + 28.0) +
         "\" text-anchor=\"middle\" font-size=\"9\">n=" +
         std::to_string(cell.n_students) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace tutor
