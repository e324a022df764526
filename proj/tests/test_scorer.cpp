#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gradorth/error.hpp"
#include "gradorth/scorer.hpp"
#include "oracles.hpp"

using namespace gradorth;

namespace {

Matrix orthonormal_columns(std::mt19937_64& gen, std::size_t d, std::size_t k) {
  return oracle::orthonormalize(oracle::random_matrix(gen, d, k));
}

Subspace subspace_from(const Matrix& basis, std::size_t layer = 0, std::uint64_t seed = 0) {
  Subspace s;
  s.basis = basis;
  s.k = basis.cols();
  s.layer_index = layer;
  s.seed = seed;
  return s;
}

// Complement of span(basis) applied to each row of g.
Matrix remove_span(const Matrix& g, const Matrix& basis) { return g - oracle::least_squares_projection(g, basis); }

DatasetSplit rows_as_split(const Matrix& x) {
  DatasetSplit d;
  d.inputs = x;
  d.labels = std::vector<std::size_t>(x.rows(), 0);
  d.num_classes = 2;
  d.role = Role::id_test;
  return d;
}

}  // namespace

TEST(Project, FixesVectorsInsideTheSpan) {
  const Matrix basis = Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}});
  const Matrix g = Matrix::from_rows({{2, -3, 0}});
  EXPECT_EQ(project(g, basis), g);
}

TEST(Project, AnnihilatesOrthogonalVectors) {
  const Matrix basis = Matrix::from_rows({{1}, {0}, {0}});
  const Matrix g = Matrix::from_rows({{0, 4, 5}, {0, -1, 0}});
  EXPECT_EQ(frobenius_norm(project(g, basis)), 0.0);
}

TEST(Project, MatchesLeastSquaresOracle) {
  std::mt19937_64 gen(31);
  const Matrix basis = orthonormal_columns(gen, 9, 4);
  const Matrix g = oracle::random_matrix(gen, 3, 9);
  EXPECT_LE(oracle::max_abs_diff(project(g, basis), oracle::least_squares_projection(g, basis)), 1e-10);
}

TEST(Project, ShapeMismatchThrows) { EXPECT_THROW(project(Matrix(2, 3), Matrix(4, 1)), DimensionError); }

TEST(EntrywiseNorm, HandValues) {
  const Matrix m = Matrix::from_rows({{3, -4}, {0, 1}});
  EXPECT_DOUBLE_EQ(entrywise_norm(m, NormOrder(1)), 8.0);
  EXPECT_DOUBLE_EQ(entrywise_norm(m, NormOrder(2)), std::sqrt(26.0));
  EXPECT_DOUBLE_EQ(entrywise_norm(m, NormOrder::infinity()), 4.0);
  EXPECT_NEAR(entrywise_norm(m, NormOrder(3)), std::cbrt(27.0 + 64.0 + 1.0), 1e-13);
  EXPECT_NEAR(entrywise_norm(m, NormOrder(0.3)),
              std::pow(std::pow(3.0, 0.3) + std::pow(4.0, 0.3) + 1.0, 1.0 / 0.3), 1e-10);
}

TEST(OodScore, ZeroGradientScoresZero) {
  const Subspace s = subspace_from(Matrix::identity(3));
  for (NormOrder p : NormOrder::all()) EXPECT_EQ(ood_score(Matrix(2, 3), s, p), 0.0);
}

TEST(OodScore, InSpanGradientScoresItsFullNorm) {
  std::mt19937_64 gen(32);
  const Matrix basis = orthonormal_columns(gen, 8, 3);
  const Matrix g = oracle::naive_transpose(oracle::naive_matmul(basis, oracle::random_matrix(gen, 3, 2)));
  for (NormOrder p : NormOrder::all()) {
    const double full = entrywise_norm(g, p);
    EXPECT_NEAR(ood_score(g, subspace_from(basis), p), full, 1e-9 * full) << p.str();
  }
}

TEST(OodScore, HandComputedTwoByThree) {
  // Projection onto span{e0, e1} drops the last column.
  const Matrix g = Matrix::from_rows({{1, 2, 7}, {-2, 0, 9}});
  const Subspace s = subspace_from(Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}}));
  EXPECT_DOUBLE_EQ(ood_score(g, s, NormOrder(2)), 3.0);
  EXPECT_DOUBLE_EQ(ood_score(g, s, NormOrder(1)), 5.0);
  EXPECT_DOUBLE_EQ(ood_score(g, s, NormOrder::infinity()), 2.0);
}

TEST(Detect, ThresholdIsInclusive) {
  EXPECT_EQ(detect(1.0, 1.0), Decision::id);
  EXPECT_EQ(detect(std::nextafter(1.0, 0.0), 1.0), Decision::ood);
  EXPECT_EQ(detect(2.0, 1.0), Decision::id);
}

TEST(NormOrder, ParseAndReject) {
  EXPECT_EQ(NormOrder::parse("0.3"), NormOrder(0.3));
  EXPECT_TRUE(NormOrder::parse("inf").is_infinity());
  EXPECT_EQ(NormOrder::all().size(), 6u);
  EXPECT_THROW(NormOrder::parse("5"), ConfigError);
  EXPECT_THROW(NormOrder::parse("two"), ConfigError);
  EXPECT_THROW(NormOrder(-1.0), ConfigError);
}

TEST(Variants, ParseRoundTrip) {
  for (Variant v : {Variant::last_layer, Variant::all_layers, Variant::no_svd, Variant::msp, Variant::energy})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("gradnorm"), ConfigError);
  EXPECT_THROW(parse_pseudo_label("none"), ConfigError);
}

TEST(PseudoTarget, Shapes) {
  const Vector z = {0.1, 3.0, -1.0};
  EXPECT_EQ(pseudo_target(z, PseudoLabel::uniform), Vector(3, 1.0 / 3.0));
  EXPECT_EQ(pseudo_target(z, PseudoLabel::predicted_onehot), (Vector{0, 1, 0}));
  EXPECT_EQ(pseudo_target(z, PseudoLabel::mse_zero), Vector(3, 0.0));
  EXPECT_EQ(pseudo_loss(Loss::cross_entropy, PseudoLabel::mse_zero), Loss::mse);
  EXPECT_EQ(pseudo_loss(Loss::cross_entropy, PseudoLabel::uniform), Loss::cross_entropy);
}

TEST(ScoreBatch, MspOfTiedLogitsIsOneHalf) {
  Network net({Layer{LayerSpec::dense(2, 2, Activation::identity, false), Matrix(2, 2)}}, Loss::cross_entropy, 0, true);
  ScoreConfig cfg;
  cfg.variant = Variant::msp;
  const auto rows = score_batch(net, {}, rows_as_split(Matrix::from_rows({{1, 2}})), cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].score, 0.5);
  cfg.variant = Variant::energy;
  EXPECT_DOUBLE_EQ(score_batch(net, {}, rows_as_split(Matrix::from_rows({{1, 2}})), cfg)[0].score, std::log(2.0));
}

TEST(ScoreBatch, NoSvdIsOuterProductNorm) {
  std::mt19937_64 gen(33);
  Network net = oracle::random_network(gen, {LayerSpec::dense(5, 3, Activation::identity, false)}, Loss::cross_entropy);
  net.freeze();
  const Matrix x = oracle::random_matrix(gen, 4, 5);
  ScoreConfig cfg;
  cfg.variant = Variant::no_svd;
  const auto rows = score_batch(net, {}, rows_as_split(x), cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    const ForwardResult f = forward(net, x.row(i));
    const Vector err = output_error(Loss::cross_entropy, f.logits, Vector(3, 1.0 / 3.0));
    EXPECT_NEAR(rows[i].score, norm2(err) * norm2(x.row(i)), 1e-13);
  }
}

TEST(ScoreBatchProperty, RepresentationsOrthogonalToSubspaceScoreZero) {
  std::mt19937_64 gen(34);
  Network net = oracle::random_network(gen, {LayerSpec::dense(6, 2, Activation::identity, false)}, Loss::cross_entropy);
  net.freeze();
  const Matrix basis = Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}, {0, 0}, {0, 0}, {0, 0}});
  Matrix x = oracle::random_matrix(gen, 10, 6);
  for (std::size_t i = 0; i < 10; ++i) x(i, 0) = x(i, 1) = 0.0;
  for (NormOrder p : NormOrder::all()) {
    ScoreConfig cfg;
    cfg.norm = p;
    for (const auto& r : score_batch(net, {subspace_from(basis)}, rows_as_split(x), cfg)) EXPECT_LE(r.score, 1e-12);
  }
}

TEST(ProjectionProperty, IdempotentAndPythagorean) {
  std::mt19937_64 gen(35);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + gen() % 12;
    const std::size_t k = 1 + gen() % d;
    const Matrix basis = orthonormal_columns(gen, d, k);
    const Matrix g = oracle::random_matrix(gen, 1 + gen() % 4, d);
    const Matrix pg = project(g, basis);
    const double scale = std::max(1.0, frobenius_norm(g));
    EXPECT_LE(oracle::max_abs_diff(project(pg, basis), pg), 1e-9 * scale);
    const double lhs = frobenius_norm_squared(g);
    const double rhs = frobenius_norm_squared(pg) + frobenius_norm_squared(remove_span(g, basis));
    EXPECT_NEAR(lhs, rhs, 1e-9 * lhs);
  }
}

TEST(ProjectionProperty, ScoreGrowsWithAlignment) {
  // g = cos(phi) e0 + sin(phi) e1 scored against span{e0}.
  const Subspace s = subspace_from(Matrix::from_rows({{1}, {0}}));
  double prev = -1.0;
  for (int i = 10; i >= 0; --i) {
    const double phi = 1.5707963267948966 * i / 10.0;
    const double sc = ood_score(Matrix::from_rows({{std::cos(phi), std::sin(phi)}}), s, NormOrder(2));
    EXPECT_GT(sc, prev);
    prev = sc;
  }
}

TEST(ProjectionProperty, RankOneGradientFactorises) {
  // For g = e x^T the score is |e| |P x| under p = 2.
  std::mt19937_64 gen(36);
  const Matrix basis = orthonormal_columns(gen, 7, 3);
  const Vector e = oracle::random_vector(gen, 3);
  const Vector x = oracle::random_vector(gen, 7);
  const Matrix px = project(Matrix(1, 7, x), basis);
  EXPECT_NEAR(ood_score(outer(e, x), subspace_from(basis), NormOrder(2)), norm2(e) * frobenius_norm(px), 1e-12);
}

TEST(ScoreBatch, AllLayersEqualsLastLayerForOneLayerNetwork) {
  std::mt19937_64 gen(37);
  Network net = oracle::random_network(gen, {LayerSpec::dense(4, 3)}, Loss::cross_entropy);
  net.freeze();
  const Matrix basis = orthonormal_columns(gen, 5, 2);
  const DatasetSplit d = rows_as_split(oracle::random_matrix(gen, 6, 4));
  ScoreConfig a;
  ScoreConfig b;
  b.variant = Variant::all_layers;
  const auto ra = score_batch(net, {subspace_from(basis)}, d, a);
  const auto rb = score_batch(net, {subspace_from(basis)}, d, b);
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_NEAR(ra[i].score, rb[i].score, 1e-14);
}

TEST(ScoreBatch, MissingSubspacesAreConfigErrors) {
  std::mt19937_64 gen(38);
  Network net = oracle::random_network(gen, {LayerSpec::dense(3, 4, Activation::relu), LayerSpec::dense(4, 2)},
                                       Loss::cross_entropy);
  net.freeze();
  const DatasetSplit d = rows_as_split(oracle::random_matrix(gen, 2, 3));
  ScoreConfig cfg;
  EXPECT_THROW(score_batch(net, {}, d, cfg), ConfigError);
  cfg.variant = Variant::all_layers;
  EXPECT_THROW(score_batch(net, {subspace_from(Matrix::identity(5), 1)}, d, cfg), ConfigError);
  EXPECT_THROW(score_batch(net, {subspace_from(Matrix::identity(5), 1), subspace_from(Matrix::identity(5), 1)}, d,
                           ScoreConfig{}),
               ConfigError);
}

TEST(ScoreBatch, RejectsUnfrozenNetwork) {
  const Network net({LayerSpec::dense(2, 2)}, Loss::mse, 0);
  ScoreConfig cfg;
  cfg.variant = Variant::msp;
  EXPECT_THROW(score_batch(net, {}, rows_as_split(Matrix(1, 2)), cfg), StateError);
}

TEST(ScoreBatch, ThreadCountDoesNotChangeScores) {
  std::mt19937_64 gen(39);
  Network net = oracle::random_network(gen, {LayerSpec::dense(6, 8, Activation::relu), LayerSpec::dense(8, 3)},
                                       Loss::cross_entropy);
  net.freeze();
  const std::vector<Subspace> subs = {subspace_from(orthonormal_columns(gen, 9, 3), 1, 0),
                                      subspace_from(orthonormal_columns(gen, 9, 4), 1, 5)};
  const DatasetSplit d = rows_as_split(oracle::random_matrix(gen, 37, 6));
  ScoreConfig one;
  ScoreConfig many;
  many.threads = 4;
  const auto a = score_batch(net, subs, d, one);
  const auto b = score_batch(net, subs, d, many);
  ASSERT_EQ(a.size(), 74u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_EQ(a[i].sample_id, i / 2);
    EXPECT_EQ(a[i].subspace_seed, i % 2 ? 5u : 0u);
  }
}

TEST(ScoreBatch, ScoringLeavesWeightsUntouched) {
  std::mt19937_64 gen(40);
  Network net = oracle::random_network(gen, {LayerSpec::dense(3, 2)}, Loss::mse);
  net.freeze();
  const Network before = net;
  score_batch(net, {subspace_from(Matrix::identity(4))}, rows_as_split(oracle::random_matrix(gen, 5, 3)), {});
  EXPECT_EQ(net.layer(0).weights, before.layer(0).weights);
}

TEST(ScoresCsv, HeaderAndRow) {
  std::ostringstream out;
  write_scores_csv(out, {ScoredSample{3, 0.25, Variant::no_svd, NormOrder(1), 2}});
  EXPECT_EQ(out.str(), "sample_id,variant,p,subspace_seed,score\n3,no_svd,1,2,0.25\n");
}
