#pragma once

#include <cstddef>
#include <span>

#include "gradorth/matrix.hpp"

namespace gradorth {

// Thin SVD a = u * diag(sigma) * v^T with r = min(rows, cols).
//
// u is rows x r and v is cols x r, both with orthonormal columns; sigma is
// non-negative and non-increasing. Each column of u has its largest-magnitude
// entry non-negative so bases are reproducible across runs.
struct SvdResult {
  Matrix u;
  Vector sigma;
  Matrix v;

  std::size_t rank_capacity() const noexcept { return sigma.size(); }
};

struct SvdOptions {
  // A column pair is considered orthogonal once |<a_i, a_j>| <= tolerance * |a_i| |a_j|.
  double tolerance = 1e-12;
  int max_sweeps = 60;
};

// One-sided (Hestenes) Jacobi SVD on the thinner orientation.
// Throws NumericError when the sweep cap is reached before convergence.
SvdResult svd_thin(const Matrix& a, const SvdOptions& options = {});

// Smallest k with sum_{i<k} sigma_i^2 >= eps_th * sum_i sigma_i^2.
// eps_th must lie in (0, 1]; an all-zero spectrum throws NumericError.
std::size_t rank_select(std::span<const double> sigma, double eps_th);
std::size_t rank_select(const SvdResult& svd, double eps_th);

// u_k * diag(sigma_k) * v_k^T.
Matrix low_rank_approximation(const SvdResult& svd, std::size_t k);

// u * diag(sigma) * v^T over the full stored rank.
Matrix reconstruct(const SvdResult& svd);

}  // namespace gradorth
