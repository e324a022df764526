#pragma once

#include <cstddef>
#include <cstdint>

#include "gradorth/dataset.hpp"
#include "gradorth/matrix.hpp"

namespace gradorth {

struct PlantedParams {
  std::size_t dim = 16;
  std::size_t rank = 3;
  std::size_t n_train = 200;
  std::size_t n_id = 200;
  std::size_t n_ood = 200;
  // Fraction of each OOD sample's squared norm lying outside the planted subspace.
  double ood_energy = 1.0;
  // ID samples keep |<a, e_0>| >= margin so the two classes are separated by a gap.
  double margin = 0.2;
  // false: the planted subspace is spanned by the first `rank` coordinate axes.
  // true: a random orthonormal basis drawn from the seed.
  bool randomize_basis = false;
};

// Unit-norm samples. ID (train / id_test) inputs lie in span(U_k) with class
// label [<a, e_0> >= 0] in subspace coordinates a; OOD inputs put `ood_energy`
// of their squared norm in the orthogonal complement.
SplitSet gen_planted_subspace(const PlantedParams& params, std::uint64_t seed);

// d x k orthonormal basis gen_planted_subspace uses for (params, seed).
Matrix planted_basis(const PlantedParams& params, std::uint64_t seed);

struct BlobParams {
  std::size_t classes = 3;
  std::size_t dim = 8;
  double spread = 1.0;
  // Class centers are drawn as center_scale * N(0, I).
  double center_scale = 4.0;
  // OOD samples come from class 0's blob translated by this vector (length dim).
  Vector shift_ood;
  std::size_t n_train = 300;
  std::size_t n_id = 300;
  std::size_t n_ood = 300;
};

// Isotropic Gaussian classes; labels cycle 0, 1, ..., classes-1 so classes are balanced.
SplitSet gen_gaussian_blobs(const BlobParams& params, std::uint64_t seed);

// Random direction (drawn from `seed`) scaled to `norm`.
Vector random_shift(std::size_t dim, double norm, std::uint64_t seed);

// Class centers gen_gaussian_blobs uses for (params, seed), one per row.
Matrix blob_centers(const BlobParams& params, std::uint64_t seed);

// Random direction orthogonal to every center, scaled to `norm`.
// Requires fewer centers than dimensions.
Vector orthogonal_shift(const Matrix& centers, double norm, std::uint64_t seed);

}  // namespace gradorth
