#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradorth/error.hpp"
#include "gradorth/network.hpp"
#include "oracles.hpp"

using namespace gradorth;

namespace {

Network single_layer(const Matrix& w, Loss loss = Loss::mse) {
  return Network({Layer{LayerSpec::dense(w.cols(), w.rows(), Activation::identity, false), w}}, loss, 0, false);
}

}  // namespace

TEST(LayerSpec, ValidationAndShapes) {
  EXPECT_THROW(LayerSpec::dense(0, 3).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::conv(1, 1, 4, 3, 3).validate(), ConfigError);
  const LayerSpec c = LayerSpec::conv(2, 3, 3, 5, 5);
  EXPECT_EQ(c.out_h(), 3u);
  EXPECT_EQ(c.out_w(), 3u);
  EXPECT_EQ(c.input_size(), 50u);
  EXPECT_EQ(c.output_size(), 27u);
  EXPECT_EQ(c.weight_rows(), 19u);
  EXPECT_EQ(c.weight_cols(), 3u);
  const LayerSpec d = LayerSpec::dense(4, 2);
  EXPECT_EQ(d.weight_rows(), 2u);
  EXPECT_EQ(d.weight_cols(), 5u);
}

TEST(Network, RejectsIncompatibleLayersAndNonLogitHead) {
  EXPECT_THROW(Network({LayerSpec::dense(3, 4), LayerSpec::dense(5, 2)}, Loss::mse, 0), DimensionError);
  EXPECT_THROW(Network({LayerSpec::dense(3, 2, Activation::relu)}, Loss::mse, 0), ConfigError);
  EXPECT_THROW(Network({LayerSpec::conv(1, 2, 2, 3, 3)}, Loss::mse, 0), ConfigError);
}

TEST(Network, FrozenNetworkRejectsWeightChanges) {
  Network net({LayerSpec::dense(3, 2)}, Loss::mse, 1);
  net.set_weights(0, Matrix(2, 4));
  EXPECT_THROW(net.set_weights(0, Matrix(3, 4)), DimensionError);
  net.freeze();
  EXPECT_THROW(net.set_weights(0, Matrix(2, 4)), StateError);
}

TEST(Network, InitialisationIsSeedDeterministicWithZeroBias) {
  const Network a({LayerSpec::dense(4, 3, Activation::relu), LayerSpec::dense(3, 2)}, Loss::mse, 5);
  const Network b({LayerSpec::dense(4, 3, Activation::relu), LayerSpec::dense(3, 2)}, Loss::mse, 5);
  const Network c({LayerSpec::dense(4, 3, Activation::relu), LayerSpec::dense(3, 2)}, Loss::mse, 6);
  EXPECT_EQ(a.layer(0).weights, b.layer(0).weights);
  EXPECT_NE(a.layer(0).weights, c.layer(0).weights);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(a.layer(0).weights(r, 4), 0.0);
}

TEST(Forward, IdentityLayer) {
  const Network net = single_layer(Matrix::identity(3));
  const Vector x = {0.5, -1.0, 2.0};
  const ForwardResult f = forward(net, x);
  EXPECT_EQ(f.logits, x);
  ASSERT_EQ(f.reps.size(), 1u);
  EXPECT_EQ(f.reps[0], x);
}

TEST(Forward, HandArithmetic) {
  const Network net = single_layer(Matrix::from_rows({{1, 1}, {0, 1}}));
  EXPECT_EQ(forward(net, Vector{1, 2}).logits, (Vector{3, 2}));
}

TEST(Forward, BiasCoordinateIsAppendedToRepresentations) {
  Network net({LayerSpec::dense(2, 2)}, Loss::mse, 0);
  const ForwardResult f = forward(net, Vector{3, 4});
  EXPECT_EQ(f.reps[0], (Vector{3, 4, 1}));
}

TEST(Forward, TwoLayerReluMatchesStraightLineOracle) {
  std::mt19937_64 gen(31);
  const Network net = oracle::random_network(gen, {LayerSpec::dense(5, 7, Activation::relu), LayerSpec::dense(7, 3)},
                                             Loss::cross_entropy);
  for (int t = 0; t < 10; ++t) {
    const Vector x = oracle::random_vector(gen, 5);
    const Vector got = forward(net, x).logits;
    const Vector ref = oracle::straight_forward(net, x);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], ref[i], 1e-12);
  }
}

TEST(Forward, RejectsWrongLengthAndNonFinite) {
  const Network net = single_layer(Matrix::identity(2));
  EXPECT_THROW(forward(net, Vector{1, 2, 3}), DimensionError);
  EXPECT_THROW(forward(net, Vector{1, NAN}), NumericError);
}

TEST(Softmax, SymmetryStabilityAndPrecision) {
  const Vector half = softmax_probs(Vector{0, 0});
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  const Vector big = softmax_probs(Vector{1000, 0});
  EXPECT_TRUE(std::isfinite(big[0]));
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_GE(big[1], 0.0);
  EXPECT_LT(big[1], 1e-300);
  std::mt19937_64 gen(32);
  for (int t = 0; t < 20; ++t) {
    const Vector z = oracle::random_vector(gen, 5, 3.0);
    const Vector p = softmax_probs(z);
    const auto ref = oracle::softmax_long(z);
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(p[i], static_cast<double>(ref[i]), 1e-12);
      EXPECT_GT(p[i], 0.0);
      sum += p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(LastLayerGradient, ZeroErrorGivesExactZero) {
  const Network net = single_layer(Matrix::from_rows({{1, 2}, {0, 1}}));
  const Vector x = {1, 1};
  const Matrix g = last_layer_gradient(net, x, Vector{3, 1});
  for (double v : g.data()) EXPECT_EQ(v, 0.0);

  const Network ce = single_layer(Matrix::from_rows({{0.3, -0.2}, {0.1, 0.4}}), Loss::cross_entropy);
  const Vector self = softmax_probs(forward(ce, x).logits);
  const Matrix gc = last_layer_gradient(ce, x, self);
  for (double v : gc.data()) EXPECT_EQ(v, 0.0);
}

TEST(LastLayerGradient, IsErrorOuterRepresentation) {
  const Network net = single_layer(Matrix::from_rows({{1, 0}, {0, 2}}));
  const Matrix g = last_layer_gradient(net, Vector{1, 3}, Vector{0, 0});
  // error = (1, 6); rep = (1, 3)
  EXPECT_EQ(g, Matrix::from_rows({{1, 3}, {6, 18}}));
}

TEST(LastLayerGradient, MatchesFiniteDifferences) {
  std::mt19937_64 gen(33);
  for (Loss loss : {Loss::mse, Loss::cross_entropy}) {
    for (int t = 0; t < 10; ++t) {
      const Network net = oracle::random_network(
          gen, {LayerSpec::dense(4, 6, Activation::relu), LayerSpec::dense(6, 3)}, loss);
      const Vector x = oracle::random_vector(gen, 4);
      if (oracle::min_relu_margin(net, x) < 1e-3) continue;
      const Vector y = loss == Loss::mse ? oracle::random_vector(gen, 3) : oracle::random_probability(gen, 3);
      const Matrix g = last_layer_gradient(net, x, y);
      const Matrix fd = oracle::finite_difference_gradient(net, 1, x, y, loss);
      EXPECT_LT(oracle::max_relative_error(g, fd), 1e-6);
    }
  }
}

TEST(LastLayerGradient, RejectsBadTargets) {
  const Network ce = single_layer(Matrix::identity(2), Loss::cross_entropy);
  EXPECT_THROW(last_layer_gradient(ce, Vector{1, 2}, Vector{0.5, 0.6}), NumericError);
  EXPECT_THROW(last_layer_gradient(ce, Vector{1, 2}, Vector{1.5, -0.5}), NumericError);
  EXPECT_THROW(last_layer_gradient(ce, Vector{1, 2}, Vector{1.0}), DimensionError);
  EXPECT_NO_THROW(last_layer_gradient(ce, Vector{1, 2}, Vector{0.5, 0.5 + 1e-10}));
}

TEST(AllLayerGradients, SingleLayerEqualsLastLayerGradient) {
  std::mt19937_64 gen(34);
  const Network net = oracle::random_network(gen, {LayerSpec::dense(4, 3)}, Loss::cross_entropy);
  const Vector x = oracle::random_vector(gen, 4);
  const Vector y = oracle::random_probability(gen, 3);
  const GradientRecord rec = all_layer_gradients(net, x, y);
  ASSERT_EQ(rec.gradients.size(), 1u);
  EXPECT_LE(oracle::max_abs_diff(rec.gradients[0], last_layer_gradient(net, x, y)), 1e-12);
  EXPECT_EQ(rec.inputs[0], forward(net, x).reps[0]);
}

TEST(AllLayerGradients, TwoLayerIdentityMatchesChainRule) {
  std::mt19937_64 gen(35);
  const Matrix w1 = oracle::random_matrix(gen, 3, 4);
  const Matrix w2 = oracle::random_matrix(gen, 2, 3);
  const Network net({Layer{LayerSpec::dense(4, 3, Activation::identity, false), w1},
                     Layer{LayerSpec::dense(3, 2, Activation::identity, false), w2}},
                    Loss::mse, 0, false);
  const Vector x = oracle::random_vector(gen, 4);
  const Vector y = oracle::random_vector(gen, 2);
  // z = W2 W1 x, Omega = z - y: dW2 = Omega (W1 x)^T, dW1 = W2^T Omega x^T.
  const Matrix h = oracle::naive_matmul(w1, Matrix::column_vector(x));
  const Matrix z = oracle::naive_matmul(w2, h);
  Matrix omega(2, 1);
  for (std::size_t i = 0; i < 2; ++i) omega(i, 0) = z(i, 0) - y[i];
  const Matrix d2 = oracle::naive_matmul(omega, oracle::naive_transpose(h));
  const Matrix back = oracle::naive_matmul(oracle::naive_transpose(w2), omega);
  const Matrix d1 = oracle::naive_matmul(back, oracle::naive_transpose(Matrix::column_vector(x)));
  const GradientRecord rec = all_layer_gradients(net, x, y);
  EXPECT_LE(oracle::max_abs_diff(rec.gradients[1], d2), 1e-12);
  EXPECT_LE(oracle::max_abs_diff(rec.gradients[0], d1), 1e-12);
}

TEST(AllLayerGradients, ThreeLayerReluMatchesFiniteDifferences) {
  std::mt19937_64 gen(36);
  int checked = 0;
  while (checked < 10) {
    const Network net = oracle::random_network(gen,
                                               {LayerSpec::dense(5, 6, Activation::relu),
                                                LayerSpec::dense(6, 4, Activation::relu), LayerSpec::dense(4, 3)},
                                               Loss::cross_entropy);
    const Vector x = oracle::random_vector(gen, 5);
    if (oracle::min_relu_margin(net, x) < 1e-3) continue;
    const Vector y = oracle::random_probability(gen, 3);
    const GradientRecord rec = all_layer_gradients(net, x, y);
    for (std::size_t l = 0; l < 3; ++l) {
      EXPECT_LT(oracle::max_relative_error(rec.gradients[l], oracle::finite_difference_gradient(net, l, x, y, net.loss())),
                1e-6);
    }
    EXPECT_LE(oracle::max_abs_diff(rec.gradients[2], last_layer_gradient(net, x, y)), 1e-12);
    ++checked;
  }
}

TEST(Im2col, SinglePatch) {
  const Vector x = {1, 2, 3, 4};
  EXPECT_EQ(im2col(x, {1, 2, 2}, 2), Matrix::from_rows({{1, 2, 3, 4}}));
}

TEST(Im2col, FourOverlappingPatches) {
  const Vector x = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  const Matrix expected = Matrix::from_rows({{0, 1, 3, 4}, {1, 2, 4, 5}, {3, 4, 6, 7}, {4, 5, 7, 8}});
  EXPECT_EQ(im2col(x, {1, 3, 3}, 2), expected);
}

TEST(Im2col, ColumnOrderIsChannelThenKernelRowThenColumn) {
  // 2 channels of 2x2, one patch: channel 0 entries first.
  const Vector x = {1, 2, 3, 4, 10, 20, 30, 40};
  EXPECT_EQ(im2col(x, {2, 2, 2}, 2), Matrix::from_rows({{1, 2, 3, 4, 10, 20, 30, 40}}));
}

TEST(Im2col, TimesFiltersMatchesNestedLoopConvolution) {
  std::mt19937_64 gen(37);
  const Vector x = oracle::random_vector(gen, 3 * 6 * 5);
  const Matrix w = oracle::random_matrix(gen, 3 * 3 * 3, 4);
  const Matrix got = matmul(im2col(x, {3, 6, 5}, 3), w);
  EXPECT_LE(oracle::max_abs_diff(got, oracle::direct_conv(x, 3, 6, 5, 3, w, false)), 1e-12);
}

TEST(Im2col, RejectsKernelLargerThanInput) {
  EXPECT_THROW(im2col(Vector(4, 0.0), {1, 2, 2}, 3), DimensionError);
}

TEST(ConvGradient, ZeroErrorAndSinglePosition) {
  std::mt19937_64 gen(38);
  const Matrix xcol = oracle::random_matrix(gen, 9, 8);
  const Matrix g = conv_layer_gradient(xcol, Matrix(9, 3));
  EXPECT_EQ(g.rows(), 8u);
  EXPECT_EQ(g.cols(), 3u);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);

  const Matrix patch = oracle::random_matrix(gen, 1, 5);
  const Vector omega = {0.5, -2.0};
  const Matrix single = conv_layer_gradient(patch, Matrix(1, 2, Vector(omega)));
  EXPECT_EQ(single, outer(patch.row(0), omega));
  EXPECT_THROW(conv_layer_gradient(Matrix(4, 2), Matrix(5, 2)), DimensionError);
}

TEST(ConvGradient, ConvLayerMatchesFiniteDifferencesUnderMse) {
  std::mt19937_64 gen(39);
  const LayerSpec conv = LayerSpec::conv(2, 2, 3, 5, 5);
  const Network net = oracle::random_network(gen, {conv, LayerSpec::dense(conv.output_size(), 2)}, Loss::mse);
  const Vector x = oracle::random_vector(gen, conv.input_size());
  const Vector y = oracle::random_vector(gen, 2);
  const GradientRecord rec = all_layer_gradients(net, x, y);
  EXPECT_LT(oracle::max_relative_error(rec.gradients[0], oracle::finite_difference_gradient(net, 0, x, y, Loss::mse)),
            1e-6);

  // The same gradient in the matrix form x_col^T Omega, with Omega laid out P x C_o.
  const Vector z = forward(net, x).logits;
  const Matrix& w2 = net.layer(1).weights;
  Vector err(2);
  for (std::size_t i = 0; i < 2; ++i) err[i] = z[i] - y[i];
  const std::size_t positions = conv.out_h() * conv.out_w();
  Matrix omega(positions, conv.out_channels);
  for (std::size_t c = 0; c < conv.out_channels; ++c)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t i = 0; i < 2; ++i) omega(p, c) += w2(i, c * positions + p) * err[i];
  EXPECT_LE(oracle::max_abs_diff(conv_layer_gradient(conv_patches(conv, x), omega), rec.gradients[0]), 1e-12);
}

TEST(BatchGradient, IsSumOfPerSampleOuterProductsAndStaysInInputSpan) {
  std::mt19937_64 gen(40);
  for (std::size_t n = 1; n <= 8; ++n) {
    const Network net = oracle::random_network(gen, {LayerSpec::dense(12, 3, Activation::identity, false)}, Loss::mse);
    const Matrix inputs = oracle::random_matrix(gen, n, 12);
    const Matrix targets = oracle::random_matrix(gen, n, 3);
    const Matrix g = batch_last_layer_gradient(net, inputs, targets);
    Matrix sum(3, 12);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector z = oracle::straight_forward(net, inputs.row(i));
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 12; ++c) sum(r, c) += (z[r] - targets(i, r)) * inputs(i, c);
    }
    EXPECT_LE(oracle::max_abs_diff(g, sum), 1e-10);
    const Matrix span = oracle::naive_transpose(inputs);
    const Matrix proj = oracle::least_squares_projection(g, span);
    for (std::size_t r = 0; r < 3; ++r) {
      double res = 0.0, nrm = 0.0;
      for (std::size_t c = 0; c < 12; ++c) {
        res += (g(r, c) - proj(r, c)) * (g(r, c) - proj(r, c));
        nrm += g(r, c) * g(r, c);
      }
      EXPECT_LE(std::sqrt(res), 1e-8 * std::sqrt(nrm));
    }
  }
}

TEST(Helpers, OneHotAndArgmax) {
  EXPECT_EQ(one_hot(1, 3), (Vector{0, 1, 0}));
  EXPECT_THROW(one_hot(3, 3), DimensionError);
  EXPECT_EQ(argmax(Vector{0.1, 0.7, 0.7}), 1u);
}
