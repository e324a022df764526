#include "gradorth/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gradorth/error.hpp"
#include "gradorth/rng.hpp"

namespace gradorth {

namespace {

constexpr std::uint64_t kInitStreamBase = 100;

struct Trace {
  std::vector<Vector> inputs;       // raw (unaugmented) input to each layer
  std::vector<Vector> reps;         // ForwardResult::reps
  std::vector<Matrix> patches;      // conv layers only; empty otherwise
  std::vector<Vector> pre_activations;
  Vector logits;
};

Vector augment(std::span<const double> x, bool bias) {
  Vector out(x.begin(), x.end());
  if (bias) out.push_back(1.0);
  return out;
}

double activate(Activation act, double z) {
  return act == Activation::relu ? (z > 0.0 ? z : 0.0) : z;
}

double activation_slope(Activation act, double z) {
  return act == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

Trace trace_forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_size()) {
    throw DimensionError("forward: input length " + std::to_string(x.size()) +
                         " but network expects " + std::to_string(net.input_size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("forward: non-finite input");
  }
  Trace t;
  Vector current(x.begin(), x.end());
  for (const Layer& layer : net.layers()) {
    const LayerSpec& spec = layer.spec;
    Vector z;
    if (spec.kind == LayerKind::dense) {
      Vector rep = augment(current, spec.has_bias);
      z = matvec(layer.weights, rep);
      t.reps.push_back(std::move(rep));
      t.patches.emplace_back();
    } else {
      Matrix cols = conv_patches(spec, current);
      const Matrix out = matmul(cols, layer.weights);  // positions x C_o
      const std::size_t positions = out.rows();
      z.assign(spec.output_size(), 0.0);
      for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t c = 0; c < out.cols(); ++c) z[c * positions + p] = out(p, c);
      }
      t.reps.push_back(current);
      t.patches.push_back(std::move(cols));
    }
    t.inputs.push_back(current);
    Vector a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = activate(spec.activation, z[i]);
    t.pre_activations.push_back(std::move(z));
    current = std::move(a);
  }
  t.logits = std::move(current);
  return t;
}

void check_target(Loss loss, std::span<const double> logits, std::span<const double> target) {
  if (target.size() != logits.size()) {
    throw DimensionError("target length " + std::to_string(target.size()) + " but network has " +
                         std::to_string(logits.size()) + " outputs");
  }
  if (loss == Loss::cross_entropy) {
    double sum = 0.0;
    for (double v : target) {
      if (!(v >= 0.0)) throw NumericError("cross-entropy target has a negative or NaN entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw NumericError("cross-entropy target is not normalized (sum = " + std::to_string(sum) + ")");
    }
  }
}

GradientRecord backprop(const Network& net, const Trace& t, Vector delta) {
  const std::size_t n = net.num_layers();
  GradientRecord rec;
  rec.gradients.resize(n);
  rec.inputs = t.reps;
  for (std::size_t l = n; l-- > 0;) {
    const Layer& layer = net.layer(l);
    const LayerSpec& spec = layer.spec;
    Vector upstream;
    if (spec.kind == LayerKind::dense) {
      rec.gradients[l] = outer(delta, t.reps[l]);
      if (l > 0) {
        // Drop the bias column by only reading the first in_dim entries.
        upstream.assign(spec.in_dim, 0.0);
        for (std::size_t i = 0; i < layer.weights.rows(); ++i) {
          const auto w = layer.weights.row(i);
          for (std::size_t j = 0; j < spec.in_dim; ++j) upstream[j] += w[j] * delta[i];
        }
      }
    } else {
      const Matrix& cols = t.patches[l];
      const std::size_t positions = cols.rows();
      Matrix omega(positions, spec.out_channels);
      for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t c = 0; c < spec.out_channels; ++c) omega(p, c) = delta[c * positions + p];
      }
      rec.gradients[l] = conv_layer_gradient(cols, omega);
      if (l > 0) {
        // d/d(x_col) = omega * W^T, scattered back through the im2col map.
        const Matrix dcols = matmul_transposed_rhs(omega, layer.weights);
        upstream.assign(spec.input_size(), 0.0);
        const std::size_t k = spec.kernel;
        const std::size_t ow = spec.out_w();
        for (std::size_t p = 0; p < positions; ++p) {
          const std::size_t oy = p / ow;
          const std::size_t ox = p % ow;
          for (std::size_t c = 0; c < spec.in_channels; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::size_t col = c * k * k + ky * k + kx;
                upstream[c * spec.in_h * spec.in_w + (oy + ky) * spec.in_w + (ox + kx)] +=
                    dcols(p, col);
              }
            }
          }
        }
      }
    }
    if (l > 0) {
      const Activation prev_act = net.layer(l - 1).spec.activation;
      const Vector& z = t.pre_activations[l - 1];
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= activation_slope(prev_act, z[i]);
      delta = std::move(upstream);
    }
  }
  return rec;
}

}  // namespace

std::string to_string(LayerKind kind) { return kind == LayerKind::dense ? "dense" : "conv"; }
std::string to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "identity";
}
std::string to_string(Loss loss) { return loss == Loss::mse ? "mse" : "cross_entropy"; }

LayerKind parse_layer_kind(const std::string& text) {
  if (text == "dense") return LayerKind::dense;
  if (text == "conv") return LayerKind::conv;
  throw ConfigError("unknown layer kind '" + text + "' (expected dense or conv)");
}

Activation parse_activation(const std::string& text) {
  if (text == "identity") return Activation::identity;
  if (text == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + text + "' (expected identity or relu)");
}

Loss parse_loss(const std::string& text) {
  if (text == "mse") return Loss::mse;
  if (text == "cross_entropy") return Loss::cross_entropy;
  throw ConfigError("unknown loss '" + text + "' (expected mse or cross_entropy)");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in;
  s.out_dim = out;
  s.activation = act;
  s.has_bias = bias;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t in_h, std::size_t in_w, Activation act, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.in_h = in_h;
  s.in_w = in_w;
  s.activation = act;
  s.has_bias = bias;
  return s;
}

std::size_t LayerSpec::input_size() const noexcept {
  return kind == LayerKind::dense ? in_dim : in_channels * in_h * in_w;
}

std::size_t LayerSpec::output_size() const noexcept {
  return kind == LayerKind::dense ? out_dim : out_channels * out_h() * out_w();
}

std::size_t LayerSpec::weight_rows() const noexcept {
  return kind == LayerKind::dense ? out_dim : patch_size() + (has_bias ? 1 : 0);
}

std::size_t LayerSpec::weight_cols() const noexcept {
  return kind == LayerKind::dense ? in_dim + (has_bias ? 1 : 0) : out_channels;
}

void LayerSpec::validate() const {
  if (kind == LayerKind::dense) {
    if (in_dim == 0 || out_dim == 0) throw ConfigError("dense layer dims must be >= 1");
    return;
  }
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || in_h == 0 || in_w == 0) {
    throw ConfigError("conv layer dims must be >= 1");
  }
  if (kernel > in_h || kernel > in_w) {
    throw ConfigError("conv kernel " + std::to_string(kernel) + " larger than input " +
                      std::to_string(in_h) + "x" + std::to_string(in_w));
  }
}

Network::Network(std::vector<LayerSpec> specs, Loss loss, std::uint64_t seed)
    : loss_(loss), seed_(seed) {
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const LayerSpec& spec = specs[l];
    spec.validate();
    Matrix w(spec.weight_rows(), spec.weight_cols());
    const std::size_t fan_in = spec.kind == LayerKind::dense ? spec.in_dim : spec.patch_size();
    const double gain = spec.activation == Activation::relu ? 2.0 : 1.0;
    const double scale = std::sqrt(gain / static_cast<double>(fan_in));
    CounterRng rng(seed, kInitStreamBase + l);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const bool is_bias = spec.has_bias && (spec.kind == LayerKind::dense ? j == spec.in_dim
                                                                              : i == spec.patch_size());
        const double draw = rng.normal();
        w(i, j) = is_bias ? 0.0 : scale * draw;
      }
    }
    layers_.push_back(Layer{spec, std::move(w)});
  }
  validate();
}

Network::Network(std::vector<Layer> layers, Loss loss, std::uint64_t seed, bool frozen)
    : layers_(std::move(layers)), loss_(loss), seed_(seed), frozen_(frozen) {
  validate();
}

void Network::validate() const {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& spec = layers_[l].spec;
    spec.validate();
    const Matrix& w = layers_[l].weights;
    if (w.rows() != spec.weight_rows() || w.cols() != spec.weight_cols()) {
      throw DimensionError("layer " + std::to_string(l) + ": weights " + w.shape_string() +
                           " but spec needs " + std::to_string(spec.weight_rows()) + "x" +
                           std::to_string(spec.weight_cols()));
    }
    if (!w.all_finite()) throw NumericError("layer " + std::to_string(l) + ": non-finite weights");
    if (l > 0 && layers_[l - 1].spec.output_size() != spec.input_size()) {
      throw DimensionError("layer " + std::to_string(l) + " expects input " +
                           std::to_string(spec.input_size()) + " but layer " + std::to_string(l - 1) +
                           " produces " + std::to_string(layers_[l - 1].spec.output_size()));
    }
  }
  const LayerSpec& last = layers_.back().spec;
  if (last.kind != LayerKind::dense || last.activation != Activation::identity) {
    throw ConfigError("final layer must be dense with identity activation (logits)");
  }
}

void Network::set_weights(std::size_t layer, Matrix weights) {
  if (frozen_) throw StateError("network is frozen; weights cannot change");
  const LayerSpec& spec = layers_.at(layer).spec;
  if (weights.rows() != spec.weight_rows() || weights.cols() != spec.weight_cols()) {
    throw DimensionError("set_weights: layer " + std::to_string(layer) + " needs " +
                         std::to_string(spec.weight_rows()) + "x" +
                         std::to_string(spec.weight_cols()) + ", got " + weights.shape_string());
  }
  layers_[layer].weights = std::move(weights);
}

Matrix im2col(std::span<const double> x, TensorShape shape, std::size_t kernel) {
  if (kernel == 0 || kernel > shape.height || kernel > shape.width) {
    throw DimensionError("im2col: kernel " + std::to_string(kernel) + " larger than input " +
                         std::to_string(shape.height) + "x" + std::to_string(shape.width));
  }
  if (x.size() != shape.size()) {
    throw DimensionError("im2col: tensor length " + std::to_string(x.size()) + " for shape " +
                         std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
                         std::to_string(shape.width));
  }
  const std::size_t oh = shape.height - kernel + 1;
  const std::size_t ow = shape.width - kernel + 1;
  Matrix out(oh * ow, shape.channels * kernel * kernel);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      auto row = out.row(oy * ow + ox);
      std::size_t col = 0;
      for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            row[col++] = x[c * shape.height * shape.width + (oy + ky) * shape.width + (ox + kx)];
          }
        }
      }
    }
  }
  return out;
}

Matrix conv_patches(const LayerSpec& spec, std::span<const double> input) {
  const Matrix cols = im2col(input, {spec.in_channels, spec.in_h, spec.in_w}, spec.kernel);
  if (!spec.has_bias) return cols;
  Matrix out(cols.rows(), cols.cols() + 1);
  for (std::size_t p = 0; p < cols.rows(); ++p) {
    std::copy(cols.row(p).begin(), cols.row(p).end(), out.row(p).begin());
    out(p, cols.cols()) = 1.0;
  }
  return out;
}

Matrix conv_layer_gradient(const Matrix& x_col, const Matrix& omega) {
  if (x_col.rows() != omega.rows()) {
    throw DimensionError("conv_layer_gradient: patches " + x_col.shape_string() + " vs error " +
                         omega.shape_string());
  }
  return matmul_transposed_lhs(x_col, omega);
}

ForwardResult forward(const Network& net, std::span<const double> x) {
  Trace t = trace_forward(net, x);
  return ForwardResult{std::move(t.logits), std::move(t.reps)};
}

Vector softmax_probs(std::span<const double> logits) {
  Vector out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double log_sum_exp(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

double loss_value(Loss loss, std::span<const double> logits, std::span<const double> target) {
  check_target(loss, logits, target);
  if (loss == Loss::mse) {
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double e = logits[i] - target[i];
      s += e * e;
    }
    return 0.5 * s;
  }
  const double lse = log_sum_exp(logits);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (target[i] != 0.0) s -= target[i] * (logits[i] - lse);
  }
  return s;
}

double loss_value(const Network& net, std::span<const double> x, std::span<const double> target) {
  return loss_value(net.loss(), forward(net, x).logits, target);
}

Vector output_error(Loss loss, std::span<const double> logits, std::span<const double> target) {
  check_target(loss, logits, target);
  Vector err = loss == Loss::mse ? Vector(logits.begin(), logits.end()) : softmax_probs(logits);
  for (std::size_t i = 0; i < err.size(); ++i) err[i] -= target[i];
  return err;
}

Matrix last_layer_gradient(const Network& net, std::span<const double> x,
                           std::span<const double> target) {
  return last_layer_gradient(net, x, target, net.loss());
}

Matrix last_layer_gradient(const Network& net, std::span<const double> x,
                           std::span<const double> target, Loss loss) {
  const ForwardResult fwd = forward(net, x);
  return outer(output_error(loss, fwd.logits, target), fwd.reps.back());
}

GradientRecord all_layer_gradients(const Network& net, std::span<const double> x,
                                   std::span<const double> target) {
  return all_layer_gradients(net, x, target, net.loss());
}

GradientRecord all_layer_gradients(const Network& net, std::span<const double> x,
                                   std::span<const double> target, Loss loss) {
  const Trace t = trace_forward(net, x);
  return backprop(net, t, output_error(loss, t.logits, target));
}

Matrix batch_last_layer_gradient(const Network& net, const Matrix& inputs, const Matrix& targets) {
  if (inputs.rows() != targets.rows()) {
    throw DimensionError("batch_last_layer_gradient: " + inputs.shape_string() + " inputs vs " +
                         targets.shape_string() + " targets");
  }
  const LayerSpec& last = net.layers().back().spec;
  Matrix errors(inputs.rows(), last.out_dim);       // n x m
  Matrix reps(inputs.rows(), last.weight_cols());   // n x d
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const ForwardResult fwd = forward(net, inputs.row(i));
    const Vector err = output_error(net.loss(), fwd.logits, targets.row(i));
    std::copy(err.begin(), err.end(), errors.row(i).begin());
    std::copy(fwd.reps.back().begin(), fwd.reps.back().end(), reps.row(i).begin());
  }
  return matmul_transposed_lhs(errors, reps);
}

Vector one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) {
    throw DimensionError("one_hot: label " + std::to_string(label) + " >= " + std::to_string(classes));
  }
  Vector v(classes, 0.0);
  v[label] = 1.0;
  return v;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace gradorth
