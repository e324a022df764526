#include "gradorth/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gradorth/error.hpp"

namespace gradorth {

namespace {

// Rotates rows p and q of m (rows hold columns of the logical matrix).
void rotate_rows(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
  auto rp = m.row(p);
  auto rq = m.row(q);
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double x = rp[i];
    const double y = rq[i];
    rp[i] = c * x - s * y;
    rq[i] = s * x + c * y;
  }
}

// Fills u column `col` with a unit vector orthogonal to columns [0, col).
void complete_column(Matrix& u, std::size_t col) {
  const std::size_t m = u.rows();
  Vector best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < m; ++e) {
    Vector cand(m, 0.0);
    cand[e] = 1.0;
    // Two Gram-Schmidt passes.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < col; ++j) {
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += u(i, j) * cand[i];
        for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u(i, j);
      }
    }
    const double n = norm2(cand);
    if (n > best_norm) {
      best_norm = n;
      best = std::move(cand);
    }
    if (best_norm > 0.5) break;
  }
  for (std::size_t i = 0; i < m; ++i) u(i, col) = best[i] / best_norm;
}

// Largest-magnitude entry of every u column becomes non-negative; v follows.
void apply_sign_convention(SvdResult& svd) {
  for (std::size_t j = 0; j < svd.sigma.size(); ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < svd.u.rows(); ++i) {
      const double mag = std::abs(svd.u(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (svd.u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < svd.u.rows(); ++i) svd.u(i, j) = -svd.u(i, j);
      for (std::size_t i = 0; i < svd.v.rows(); ++i) svd.v(i, j) = -svd.v(i, j);
    }
  }
}

// Requires a.rows() >= a.cols().
SvdResult jacobi_tall(const Matrix& a, const SvdOptions& options) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();

  // Row j of `w` is column j of the working matrix; row j of `vt` is column j of V.
  Matrix w = a.transposed();
  Matrix vt = Matrix::identity(n);

  // Columns below this squared norm are round-off residue of a rank-deficient
  // input; their mutual cosines carry no information and are not rotated.
  const double negligible_norm = static_cast<double>(m) * std::numeric_limits<double>::epsilon() * frobenius_norm(a);
  const double negligible = negligible_norm * negligible_norm;

  double max_off = 0.0;
  bool converged = n < 2;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    max_off = 0.0;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(w.row(p), w.row(p));
        const double beta = dot(w.row(q), w.row(q));
        const double gamma = dot(w.row(p), w.row(q));
        if (alpha <= negligible || beta <= negligible) continue;
        const double off = std::abs(gamma) / std::sqrt(alpha * beta);
        max_off = std::max(max_off, off);
        if (off <= options.tolerance) continue;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_rows(w, p, q, c, s);
        rotate_rows(vt, p, q, c, s);
        rotated = true;
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "svd_thin: no convergence after " << options.max_sweeps
        << " sweeps; residual off-diagonal cosine " << max_off;
    throw NumericError(msg.str());
  }

  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(w.row(j));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out{Matrix(m, n), Vector(n), Matrix(n, n)};
  // Same cut as the rotation skip: a column that was never rotated cannot be
  // trusted to be orthogonal to the rest, so its u column is completed instead.
  const double null_threshold = negligible_norm;

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    const double sigma = norms[src];
    out.sigma[j] = sigma;
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = vt(src, i);
    if (sigma > null_threshold && sigma > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, j) = w(src, i) / sigma;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!(out.sigma[j] > null_threshold && out.sigma[j] > 0.0)) complete_column(out.u, j);
  }

  return out;
}

}  // namespace

SvdResult svd_thin(const Matrix& a, const SvdOptions& options) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw DimensionError("svd_thin: empty matrix " + a.shape_string());
  }
  if (!a.all_finite()) throw NumericError("svd_thin: non-finite input");
  SvdResult out;
  if (a.rows() >= a.cols()) {
    out = jacobi_tall(a, options);
  } else {
    // a^T = U' S V'^T  =>  a = V' S U'^T.
    SvdResult t = jacobi_tall(a.transposed(), options);
    out = SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
  }
  apply_sign_convention(out);
  return out;
}

std::size_t rank_select(std::span<const double> sigma, double eps_th) {
  if (!(eps_th > 0.0 && eps_th <= 1.0)) {
    throw ConfigError("rank_select: eps_th must lie in (0, 1], got " + std::to_string(eps_th));
  }
  Vector cumulative(sigma.size());
  double running = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    running += sigma[i] * sigma[i];
    cumulative[i] = running;
  }
  const double total = running;
  if (!(total > 0.0)) throw NumericError("rank_select: zero representation matrix");
  const double target = eps_th * total;
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    if (cumulative[i] >= target) return i + 1;
  }
  return sigma.size();
}

std::size_t rank_select(const SvdResult& svd, double eps_th) {
  return rank_select(svd.sigma, eps_th);
}

Matrix low_rank_approximation(const SvdResult& svd, std::size_t k) {
  if (k > svd.sigma.size()) {
    throw DimensionError("low_rank_approximation: k = " + std::to_string(k) + " exceeds rank " +
                         std::to_string(svd.sigma.size()));
  }
  Matrix us = svd.u.leading_columns(k);
  for (std::size_t i = 0; i < us.rows(); ++i) {
    for (std::size_t j = 0; j < k; ++j) us(i, j) *= svd.sigma[j];
  }
  return matmul_transposed_rhs(us, svd.v.leading_columns(k));
}

Matrix reconstruct(const SvdResult& svd) { return low_rank_approximation(svd, svd.sigma.size()); }

}  // namespace gradorth
