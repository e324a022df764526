#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradorth/matrix.hpp"

namespace gradorth {

enum class LayerKind { dense, conv };
enum class Activation { identity, relu };
enum class Loss { mse, cross_entropy };

std::string to_string(LayerKind kind);
std::string to_string(Activation activation);
std::string to_string(Loss loss);
LayerKind parse_layer_kind(const std::string& text);
Activation parse_activation(const std::string& text);
Loss parse_loss(const std::string& text);

// Dense layers hold an out x (in [+1]) weight matrix applied as W * [x; 1].
// Conv layers (valid mode, stride 1) hold a (C_i k k [+1]) x C_o filter matrix
// applied as im2col(x) * W; their output is flattened channel-major.
// In both cases a bias is the last weight column/row against a constant-1 input.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  Activation activation = Activation::identity;
  bool has_bias = true;

  static LayerSpec dense(std::size_t in, std::size_t out, Activation act = Activation::identity,
                         bool bias = true);
  static LayerSpec conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                        std::size_t in_h, std::size_t in_w, Activation act = Activation::identity,
                        bool bias = true);

  std::size_t out_h() const noexcept { return in_h - kernel + 1; }
  std::size_t out_w() const noexcept { return in_w - kernel + 1; }
  std::size_t patch_size() const noexcept { return in_channels * kernel * kernel; }
  // Flattened input / output lengths.
  std::size_t input_size() const noexcept;
  std::size_t output_size() const noexcept;
  std::size_t weight_rows() const noexcept;
  std::size_t weight_cols() const noexcept;

  void validate() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerSpec spec;
  Matrix weights;
};

// Trainable feed-forward network. The last layer is dense with identity
// activation and produces the logits; losses are applied to the logits.
class Network {
 public:
  // Weights drawn from the pinned generator: N(0, 1) * sqrt(g / fan_in) with
  // g = 2 for ReLU layers and 1 otherwise; bias weights start at zero.
  Network(std::vector<LayerSpec> specs, Loss loss, std::uint64_t seed);
  Network(std::vector<Layer> layers, Loss loss, std::uint64_t seed, bool frozen);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t last_layer_index() const noexcept { return layers_.size() - 1; }
  Loss loss() const noexcept { return loss_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool frozen() const noexcept { return frozen_; }
  std::size_t input_size() const noexcept { return layers_.front().spec.input_size(); }
  std::size_t num_classes() const noexcept { return layers_.back().spec.output_size(); }

  // Throws StateError on a frozen network, DimensionError on a shape mismatch.
  void set_weights(std::size_t layer, Matrix weights);
  void freeze() noexcept { frozen_ = true; }

 private:
  void validate() const;

  std::vector<Layer> layers_;
  Loss loss_;
  std::uint64_t seed_;
  bool frozen_ = false;
};

struct TensorShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
};

// Rows are output positions in raster order; columns run channel-major, then
// kernel row, then kernel column. x is laid out channel-major (c, h, w).
Matrix im2col(std::span<const double> x, TensorShape shape, std::size_t kernel);

// Gradient of the loss w.r.t. conv filter weights: x_col^T * omega, (C_i k k) x C_o.
Matrix conv_layer_gradient(const Matrix& x_col, const Matrix& omega);

struct ForwardResult {
  Vector logits;
  // reps[l] is the input to layer l. Dense layers with a bias carry the
  // trailing constant-1 coordinate; conv layers carry the raw flattened tensor.
  std::vector<Vector> reps;
};

ForwardResult forward(const Network& net, std::span<const double> x);

// Patch matrix a conv layer multiplies with its weights, including the
// constant-1 column when the layer has a bias.
Matrix conv_patches(const LayerSpec& spec, std::span<const double> input);

Vector softmax_probs(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

// Loss on logits; under cross_entropy `target` must be a probability vector.
double loss_value(Loss loss, std::span<const double> logits, std::span<const double> target);
double loss_value(const Network& net, std::span<const double> x, std::span<const double> target);

// dLoss/dlogits: logits - target (MSE) or softmax(logits) - target (cross-entropy).
Vector output_error(Loss loss, std::span<const double> logits, std::span<const double> target);

// error * reps.back()^T from one forward pass, optionally under a loss other than the network's.
Matrix last_layer_gradient(const Network& net, std::span<const double> x,
                           std::span<const double> target);
Matrix last_layer_gradient(const Network& net, std::span<const double> x,
                           std::span<const double> target, Loss loss);

struct GradientRecord {
  // gradients[l] has the shape of layer l's weights.
  std::vector<Matrix> gradients;
  std::vector<Vector> inputs;
};

// Full backpropagation through every layer.
GradientRecord all_layer_gradients(const Network& net, std::span<const double> x,
                                   std::span<const double> target);
GradientRecord all_layer_gradients(const Network& net, std::span<const double> x,
                                   std::span<const double> target, Loss loss);

// Gradient of the summed per-sample losses of a batch at the last layer.
// inputs: one sample per row; targets: one target per row.
Matrix batch_last_layer_gradient(const Network& net, const Matrix& inputs, const Matrix& targets);

Vector one_hot(std::size_t label, std::size_t classes);
std::size_t argmax(std::span<const double> v);

}  // namespace gradorth
