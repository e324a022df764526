#include <gtest/gtest.h>

#include <cmath>

#include "gradorth/error.hpp"
#include "gradorth/synth.hpp"
#include "oracles.hpp"

using namespace gradorth;

namespace {

// Squared norm of x outside span(basis), basis orthonormal.
double off_span_energy(std::span<const double> x, const Matrix& basis) {
  const Matrix row(1, x.size(), Vector(x.begin(), x.end()));
  return std::pow(oracle::frob(row - oracle::least_squares_projection(row, basis)), 2);
}

}  // namespace

TEST(Planted, IdSamplesLieInSubspaceWithUnitNorm) {
  PlantedParams p;
  const SplitSet s = gen_planted_subspace(p, 0);
  const Matrix basis = planted_basis(p, 0);
  for (const DatasetSplit* split : {&s.train, &s.id_test}) {
    ASSERT_EQ(split->features(), 16u);
    for (std::size_t i = 0; i < split->size(); ++i) {
      EXPECT_LE(off_span_energy(split->sample(i), basis), 1e-24);
      EXPECT_NEAR(norm2(split->sample(i)), 1.0, 1e-14);
    }
  }
  EXPECT_EQ(s.train.size(), 200u);
  EXPECT_EQ(s.ood_test.size(), 200u);
}

TEST(Planted, LabelsFollowSignOfFirstCoordinateWithMargin) {
  PlantedParams p;
  p.randomize_basis = true;
  const SplitSet s = gen_planted_subspace(p, 4);
  const Matrix basis = planted_basis(p, 4);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    double a0 = 0.0;
    for (std::size_t r = 0; r < 16; ++r) a0 += basis(r, 0) * s.train.inputs(i, r);
    EXPECT_EQ(s.train.labels[i], a0 >= 0 ? 1u : 0u);
    EXPECT_GE(std::abs(a0), p.margin - 1e-12);
    ones += s.train.labels[i];
  }
  EXPECT_GT(ones, 50u);
  EXPECT_LT(ones, 150u);
}

TEST(Planted, OodEnergySplitIsExact) {
  for (double energy : {1.0, 0.5, 0.1}) {
    PlantedParams p;
    p.ood_energy = energy;
    const SplitSet s = gen_planted_subspace(p, 2);
    const Matrix basis = planted_basis(p, 2);
    for (std::size_t i = 0; i < s.ood_test.size(); ++i) {
      EXPECT_NEAR(off_span_energy(s.ood_test.sample(i), basis), energy, 1e-12);
    }
  }
}

TEST(Planted, FullEnergyOodIsOrthogonal) {
  PlantedParams p;
  const SplitSet s = gen_planted_subspace(p, 6);
  for (std::size_t i = 0; i < s.ood_test.size(); ++i)
    for (std::size_t r = 0; r < p.rank; ++r) EXPECT_EQ(s.ood_test.inputs(i, r), 0.0);
}

TEST(Planted, RejectsBadParameters) {
  PlantedParams p;
  p.ood_energy = 0.0;
  EXPECT_THROW(gen_planted_subspace(p, 0), ConfigError);
  p = {};
  p.rank = p.dim;
  EXPECT_THROW(gen_planted_subspace(p, 0), ConfigError);
  p = {};
  p.margin = 1.0;
  EXPECT_THROW(gen_planted_subspace(p, 0), ConfigError);
}

TEST(Planted, DeterministicPerSeed) {
  PlantedParams p;
  EXPECT_EQ(gen_planted_subspace(p, 3).ood_test.inputs, gen_planted_subspace(p, 3).ood_test.inputs);
  EXPECT_NE(gen_planted_subspace(p, 3).train.inputs, gen_planted_subspace(p, 4).train.inputs);
}

TEST(Blobs, ZeroShiftMakesOodLookLikeClassZero) {
  BlobParams p;
  p.shift_ood = Vector(p.dim, 0.0);
  p.n_ood = 3000;
  const SplitSet s = gen_gaussian_blobs(p, 1);
  const Matrix centers = blob_centers(p, 1);
  for (std::size_t j = 0; j < p.dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < s.ood_test.size(); ++i) mean += s.ood_test.inputs(i, j);
    mean /= static_cast<double>(s.ood_test.size());
    // Four standard errors.
    EXPECT_NEAR(mean, centers(0, j), 4.0 * p.spread / std::sqrt(3000.0));
  }
}

TEST(Blobs, ClassMeansConcentrateOnCenters) {
  BlobParams p;
  p.shift_ood = random_shift(p.dim, 10.0, 2);
  p.n_train = 3000;
  const SplitSet s = gen_gaussian_blobs(p, 2);
  const Matrix centers = blob_centers(p, 2);
  Matrix mean(p.classes, p.dim);
  std::vector<double> count(p.classes, 0.0);
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    EXPECT_EQ(s.train.labels[i], i % p.classes);
    count[s.train.labels[i]] += 1.0;
    for (std::size_t j = 0; j < p.dim; ++j) mean(s.train.labels[i], j) += s.train.inputs(i, j);
  }
  for (std::size_t c = 0; c < p.classes; ++c)
    for (std::size_t j = 0; j < p.dim; ++j)
      EXPECT_NEAR(mean(c, j) / count[c], centers(c, j), 4.0 * p.spread / std::sqrt(count[c]));
}

TEST(Blobs, ShiftLengthMustMatchDimension) {
  BlobParams p;
  p.shift_ood = Vector(p.dim + 1, 0.0);
  EXPECT_THROW(gen_gaussian_blobs(p, 0), DimensionError);
  p.shift_ood = Vector(p.dim, 0.0);
  p.spread = 0.0;
  EXPECT_THROW(gen_gaussian_blobs(p, 0), ConfigError);
}

TEST(Blobs, Deterministic) {
  BlobParams p;
  p.shift_ood = random_shift(p.dim, 10.0, 0);
  EXPECT_EQ(gen_gaussian_blobs(p, 5).train.inputs, gen_gaussian_blobs(p, 5).train.inputs);
}

TEST(Shift, RandomShiftHasRequestedNorm) {
  EXPECT_NEAR(norm2(random_shift(32, 10.0, 7)), 10.0, 1e-12);
}

TEST(Shift, OrthogonalShiftAvoidsEveryCenter) {
  BlobParams p;
  p.dim = 6;
  const Matrix centers = blob_centers(p, 3);
  const Vector v = orthogonal_shift(centers, 10.0, 3);
  EXPECT_NEAR(norm2(v), 10.0, 1e-12);
  for (std::size_t c = 0; c < centers.rows(); ++c) EXPECT_NEAR(dot(v, centers.row(c)), 0.0, 1e-10);
  EXPECT_THROW(orthogonal_shift(Matrix(6, 6), 1.0, 0), ConfigError);
}
