#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gradorth/dataset.hpp"
#include "gradorth/matrix.hpp"
#include "gradorth/network.hpp"

namespace gradorth {

inline constexpr double kDefaultEpsTh = 0.97;

// Orthonormal basis (d x k) of the dominant directions of one layer's ID representations.
struct Subspace {
  Matrix basis;
  std::size_t layer_index = 0;
  double eps_th = kDefaultEpsTh;
  std::size_t k = 0;
  std::vector<std::size_t> sample_ids;
  std::uint64_t seed = 0;
  // Full singular spectrum of the representation matrix the basis came from.
  Vector singular_values;

  std::size_t dim() const noexcept { return basis.rows(); }
};

struct SubspaceMeta {
  std::size_t layer_index = 0;
  std::vector<std::size_t> sample_ids;
  std::uint64_t seed = 0;
};

// n_per_class indices per class, drawn without replacement from (seed, class).
// Output is class-major with indices ascending inside each class.
std::vector<std::size_t> sample_per_class(const DatasetSplit& data, std::size_t n_per_class,
                                          std::uint64_t seed);

// d x n matrix whose column j is the representation of sample ids[j] at `layer`.
// Dense layers contribute reps[layer] from a forward pass; conv layers contribute
// each of the sample's im2col patch rows, i.e. the space their filter gradients live in.
// Only frozen networks are accepted.
Matrix build_representation_matrix(const Network& net, const DatasetSplit& data,
                                   const std::vector<std::size_t>& ids, std::size_t layer);

// First k left singular vectors of rep, k from rank_select(eps_th).
Subspace compute_subspace(const Matrix& rep, double eps_th, SubspaceMeta meta = {});

// End to end: sample, build representations, extract the subspace.
Subspace build_subspace(const Network& net, const DatasetSplit& data, std::size_t layer,
                        std::size_t n_per_class, double eps_th, std::uint64_t seed);

// Text metadata followed by the basis in GOMX format:
//
//   GRADORTH-SUBSPACE 1
//   layer = 0
//   eps_th = 0.97
//   k = 3
//   seed = 0
//   sample_ids = 4,9,...
//   singular_values = ...
//   end
//   <GOMX basis>
void write_subspace(std::ostream& out, const Subspace& sub);
Subspace read_subspace(std::istream& in);
void save_subspace(const std::filesystem::path& path, const Subspace& sub);
Subspace load_subspace(const std::filesystem::path& path);

}  // namespace gradorth
