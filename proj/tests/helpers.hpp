#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tutor/domain.hpp"
#include "tutor/nnet.hpp"
#include "tutor/rng.hpp"

namespace tutor::test {

/// Relative error with an absolute guard so near-zero gradients compare
/// sanely.
inline double rel_err(double a, double b) {
  const double diff = std::abs(a - b);
  if (diff <= 1e-8) return 0.0;
  return diff / std::max(std::abs(a), std::abs(b));
}

struct FdOutcome {
  double max_param_rel = 0.0;
  double max_input_rel = 0.0;
};

/// Checks analytic gradients of the scalar projection u . f(theta, x)
/// against central finite differences, over every parameter and every input
/// coordinate.
inline FdOutcome check_gradients_fd(const MlpSpec& spec, const ParameterSet& params,
                                    std::span<const double> x,
                                    std::span<const double> u, double h = 1e-5) {
  ForwardCache cache;
  forward(spec, params, x, &cache);
  const Gradients analytic = backward(spec, params, cache, u);

  auto project = [&](const ParameterSet& p, std::span<const double> in) {
    const auto out = forward(spec, p, in);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += u[i] * out[i];
    return s;
  };

  FdOutcome outcome;
  ParameterSet probe = params;
  for (std::size_t i = 0; i < probe.values.size(); ++i) {
    const double saved = probe.values[i];
    probe.values[i] = saved + h;
    const double up = project(probe, x);
    probe.values[i] = saved - h;
    const double down = project(probe, x);
    probe.values[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    outcome.max_param_rel =
        std::max(outcome.max_param_rel, rel_err(analytic.params.values[i], fd));
  }

  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t i = 0; i < xp.size(); ++i) {
    const double saved = xp[i];
    xp[i] = saved + h;
    const double up = project(params, xp);
    xp[i] = saved - h;
    const double down = project(params, xp);
    xp[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    outcome.max_input_rel =
        std::max(outcome.max_input_rel, rel_err(analytic.input[i], fd));
  }
  return outcome;
}

/// All 28 network layouts exercised by the gradient checks: every supported
/// hidden shape with each activation and head. Softmax heads get 4 outputs
/// (a policy), linear heads 1 (a value function).
inline std::vector<MlpSpec> all_gradient_check_specs() {
  std::vector<MlpSpec> specs;
  for (const auto& hidden : supported_hidden_shapes()) {
    for (Activation act : {Activation::kTanh, Activation::kGelu}) {
      for (OutputHead head : {OutputHead::kSoftmax, OutputHead::kLinear}) {
        MlpSpec spec;
        spec.input_dim = kNumFeatures;
        spec.hidden_dims = hidden;
        spec.output_dim = head == OutputHead::kSoftmax ? kNumActions : 1;
        spec.activation = act;
        spec.head = head;
        specs.push_back(spec);
      }
    }
  }
  return specs;
}

/// Fresh scratch directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "-" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directories(candidate, ec) && !ec) {
        path_ = candidate;
        return;
      }
    }
    std::abort();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path_.string() : (path_ / leaf).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return "<missing:" + path + ">";
  std::string content;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) content.append(buf, n);
  std::fclose(f);
  return content;
}

}  // namespace tutor::test
