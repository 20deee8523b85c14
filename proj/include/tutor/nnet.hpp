#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tutor/rng.hpp"

namespace tutor {

enum class Activation { kTanh, kGelu };
enum class OutputHead { kSoftmax, kLinear };

const std::string& activation_name(Activation a);
Activation activation_from_name(const std::string& name);
const std::string& head_name(OutputHead h);
OutputHead head_from_name(const std::string& name);

/// Topology of a small dense feed-forward network.
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation activation = Activation::kTanh;
  OutputHead head = OutputHead::kLinear;

  int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
  int weight_offset(int layer) const;  // row-major (out x in) block
  int bias_offset(int layer) const;
  int param_count() const;

  void validate() const;  // throws ConfigError
  bool operator==(const MlpSpec&) const = default;
};

/// The hidden shapes exercised by the experiments: none, one layer of
/// 4/8/16, or two equal layers of 4/8/16.
const std::vector<std::vector<int>>& supported_hidden_shapes();

/// All layer weights and biases, flattened in layer order (weights before
/// biases within a layer, weights row-major out x in).
struct ParameterSet {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
ParameterSet init_params(const MlpSpec& spec, Rng& rng);

ParameterSet zero_params(const MlpSpec& spec);

/// Per-layer activations recorded by forward, sufficient for backward.
struct ForwardCache {
  std::vector<std::vector<double>> layer_inputs;  // a_0 .. a_{L-1}
  std::vector<std::vector<double>> preacts;       // z_1 .. z_L
  std::vector<double> output;                     // post-head
};

/// Runs the network. Softmax heads return a probability simplex computed
/// with max subtraction; entries are positive unless a logit trails the
/// maximum by enough (~745) for exp to underflow, which the logging path
/// covers with floor_probs. Linear heads return raw values. Throws
/// NumericError on non-finite input, UsageError on a size mismatch.
std::vector<double> forward(const MlpSpec& spec, const ParameterSet& params,
                            std::span<const double> x, ForwardCache* cache);

inline std::vector<double> forward(const MlpSpec& spec,
                                   const ParameterSet& params,
                                   std::span<const double> x) {
  return forward(spec, params, x, nullptr);
}

struct Gradients {
  ParameterSet params;            // same layout as the parameters
  std::vector<double> input;      // d(objective)/d(input)
};

/// Exact analytic gradients of grad_output . output with respect to the
/// parameters and the input. The cache must come from a matching forward
/// call. GELU uses the exact Gaussian-CDF form.
Gradients backward(const MlpSpec& spec, const ParameterSet& params,
                   const ForwardCache& cache,
                   std::span<const double> grad_output);

/// Accumulating variant: adds parameter gradients into `param_accum`
/// (pre-sized) and returns input gradients. Used by the training loops.
std::vector<double> backward_accumulate(const MlpSpec& spec,
                                        const ParameterSet& params,
                                        const ForwardCache& cache,
                                        std::span<const double> grad_output,
                                        double scale, ParameterSet& param_accum);

/// Bias-corrected Adam (beta1=0.9, beta2=0.999, eps=1e-8).
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long timestep = 0;
  double learning_rate = 0.0025;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr)
      : m(n, 0.0), v(n, 0.0), learning_rate(lr) {}
};

/// One Adam update in place. Throws UsageError on a shape mismatch.
void adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads);

double gelu(double x);
double gelu_grad(double x);

}  // namespace tutor
