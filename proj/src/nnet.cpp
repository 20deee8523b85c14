#include "tutor/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tutor/errors.hpp"

namespace tutor {

const std::string& activation_name(Activation a) {
  static const std::string tanh_name = "tanh";
  static const std::string gelu_name = "gelu";
  return a == Activation::kTanh ? tanh_name : gelu_name;
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "gelu") return Activation::kGelu;
  throw ConfigError("unknown activation: " + name);
}

const std::string& head_name(OutputHead h) {
  static const std::string softmax_name = "softmax";
  static const std::string linear_name = "linear";
  return h == OutputHead::kSoftmax ? softmax_name : linear_name;
}

OutputHead head_from_name(const std::string& name) {
  if (name == "softmax") return OutputHead::kSoftmax;
  if (name == "linear") return OutputHead::kLinear;
  throw ConfigError("unknown output head: " + name);
}

int MlpSpec::layer_in(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int MlpSpec::layer_out(int layer) const {
  return layer == layer_count() - 1 ? output_dim
                                    : hidden_dims[layer];
}

int MlpSpec::weight_offset(int layer) const {
  int offset = 0;
  for (int l = 0; l < layer; ++l) {
    offset += layer_out(l) * (layer_in(l) + 1);
  }
  return offset;
}

int MlpSpec::bias_offset(int layer) const {
  return weight_offset(layer) + layer_out(layer) * layer_in(layer);
}

int MlpSpec::param_count() const {
  int n = 0;
  for (int l = 0; l < layer_count(); ++l) n += layer_out(l) * (layer_in(l) + 1);
  return n;
}

void MlpSpec::validate() const {
  if (input_dim < 1) throw ConfigError("MlpSpec: input_dim must be >= 1");
  if (output_dim < 1) throw ConfigError("MlpSpec: output_dim must be >= 1");
  for (int d : hidden_dims) {
    if (d < 1) throw ConfigError("MlpSpec: hidden dims must be >= 1");
  }
}

const std::vector<std::vector<int>>& supported_hidden_shapes() {
  static const std::vector<std::vector<int>> shapes = {
      {}, {4}, {8}, {16}, {4, 4}, {8, 8}, {16, 16}};
  return shapes;
}

ParameterSet init_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParameterSet p;
  p.values.assign(spec.param_count(), 0.0);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.layer_in(l);
    const int fan_out = spec.layer_out(l);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = p.values.data() + spec.weight_offset(l);
    for (int i = 0; i < fan_out * fan_in; ++i) {
      w[i] = rng.uniform(-bound, bound);
    }
    // biases stay zero
  }
  return p;
}

ParameterSet zero_params(const MlpSpec& spec) {
  spec.validate();
  ParameterSet p;
  p.values.assign(spec.param_count(), 0.0);
  return p;
}

double gelu(double x) {
  // Exact form: x * Phi(x) with the Gaussian CDF, not the tanh approximation.
  return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
}

double gelu_grad(double x) {
  const double phi_cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
  const double phi_pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return phi_cdf + x * phi_pdf;
}

namespace {

double activate(Activation a, double z) {
  return a == Activation::kTanh ? std::tanh(z) : gelu(z);
}

void check_params(const MlpSpec& spec, const ParameterSet& params) {
  if (static_cast<int>(params.size()) != spec.param_count()) {
    throw UsageError("parameter vector size does not match spec");
  }
}

}  // namespace

std::vector<double> forward(const MlpSpec& spec, const ParameterSet& params,
                            std::span<const double> x, ForwardCache* cache) {
  spec.validate();
  check_params(spec, params);
  if (static_cast<int>(x.size()) != spec.input_dim) {
    throw UsageError("input size does not match spec.input_dim");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("non-finite network input");
  }

  if (cache) {
    cache->layer_inputs.clear();
    cache->preacts.clear();
  }

  std::vector<double> a(x.begin(), x.end());
  const int layers = spec.layer_count();
  for (int l = 0; l < layers; ++l) {
    if (cache) cache->layer_inputs.push_back(a);
    const int n_in = spec.layer_in(l);
    const int n_out = spec.layer_out(l);
    const double* w = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);

    std::vector<double> z(n_out);
    for (int i = 0; i < n_out; ++i) {
      double acc = b[i];
      const double* row = w + i * n_in;
      for (int j = 0; j < n_in; ++j) acc += row[j] * a[j];
      z[i] = acc;
    }
    if (cache) cache->preacts.push_back(z);

    if (l < layers - 1) {
      a.resize(n_out);
      for (int i = 0; i < n_out; ++i) a[i] = activate(spec.activation, z[i]);
    } else {
      a = std::move(z);
    }
  }

  if (spec.head == OutputHead::kSoftmax) {
    const double zmax = *std::max_element(a.begin(), a.end());
    double sum = 0.0;
    for (double& v : a) {
      v = std::exp(v - zmax);
      sum += v;
    }
    for (double& v : a) v /= sum;
  }

  if (cache) cache->output = a;
  return a;
}

std::vector<double> backward_accumulate(const MlpSpec& spec,
                                        const ParameterSet& params,
                                        const ForwardCache& cache,
                                        std::span<const double> grad_output,
                                        double scale,
                                        ParameterSet& param_accum) {
  check_params(spec, params);
  check_params(spec, param_accum);
  const int layers = spec.layer_count();
  if (static_cast<int>(cache.layer_inputs.size()) != layers ||
      static_cast<int>(cache.preacts.size()) != layers ||
      static_cast<int>(cache.output.size()) != spec.output_dim) {
    throw UsageError("forward cache does not match spec");
  }
  if (static_cast<int>(grad_output.size()) != spec.output_dim) {
    throw UsageError("grad_output size does not match spec.output_dim");
  }

  // Head Jacobian. For softmax p over logits z: dz = p .* (g - g.p).
  std::vector<double> dz(grad_output.begin(), grad_output.end());
  if (spec.head == OutputHead::kSoftmax) {
    const std::vector<double>& p = cache.output;
    double dot = 0.0;
    for (int i = 0; i < spec.output_dim; ++i) dot += dz[i] * p[i];
    for (int i = 0; i < spec.output_dim; ++i) dz[i] = p[i] * (dz[i] - dot);
  }

  for (int l = layers - 1; l >= 0; --l) {
    const int n_in = spec.layer_in(l);
    const int n_out = spec.layer_out(l);
    const std::vector<double>& a_in = cache.layer_inputs[l];
    const double* w = params.data() + spec.weight_offset(l);
    double* gw = param_accum.data() + spec.weight_offset(l);
    double* gb = param_accum.data() + spec.bias_offset(l);

    for (int i = 0; i < n_out; ++i) {
      const double d = dz[i] * scale;
      double* grow = gw + i * n_in;
      for (int j = 0; j < n_in; ++j) grow[j] += d * a_in[j];
      gb[i] += d;
    }

    std::vector<double> da(n_in, 0.0);
    for (int i = 0; i < n_out; ++i) {
      const double* row = w + i * n_in;
      for (int j = 0; j < n_in; ++j) da[j] += row[j] * dz[i];
    }

    if (l > 0) {
      const std::vector<double>& z_prev = cache.preacts[l - 1];
      dz.resize(n_in);
      for (int j = 0; j < n_in; ++j) {
        double g;
        if (spec.activation == Activation::kTanh) {
          const double t = std::tanh(z_prev[j]);
          g = 1.0 - t * t;
        } else {
          g = gelu_grad(z_prev[j]);
        }
        dz[j] = da[j] * g;
      }
    } else {
      for (double& v : da) v *= scale;
      return da;
    }
  }
  return {};  // unreachable: layer_count() >= 1
}

Gradients backward(const MlpSpec& spec, const ParameterSet& params,
                   const ForwardCache& cache,
                   std::span<const double> grad_output) {
  Gradients g;
  g.params = zero_params(spec);
  g.input = backward_accumulate(spec, params, cache, grad_output, 1.0, g.params);
  return g;
}

void adam_step(AdamState& state, ParameterSet& params,
               const ParameterSet& grads) {
  const std::size_t n = params.size();
  if (grads.size() != n) throw UsageError("adam_step: gradient shape mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n || state.v.size() != n) {
    throw UsageError("adam_step: state shape mismatch");
  }

  state.timestep += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.timestep));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.timestep));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads.values[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / corr1;
    const double vhat = state.v[i] / corr2;
    params.values[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

}  // namespace tutor
