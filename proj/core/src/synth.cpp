#include "gradorth/synth.hpp"

#include <cmath>

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"
#include "gradorth/rng.hpp"

namespace gradorth {

namespace {

// Stream ids. Keep stable: changing them changes every generated dataset.
constexpr std::uint64_t kBasisStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kIdStream = 2;
constexpr std::uint64_t kOodStream = 3;
constexpr std::uint64_t kCenterStream = 4;
constexpr std::uint64_t kShiftStream = 5;

Vector gaussian_vector(CounterRng& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

void normalize(Vector& v) {
  const double n = norm2(v);
  for (double& x : v) x /= n;
}

GeneratorInfo planted_info(const PlantedParams& p, std::uint64_t seed) {
  GeneratorInfo info{"planted_subspace", seed, {}};
  info.parameters["dim"] = std::to_string(p.dim);
  info.parameters["rank"] = std::to_string(p.rank);
  info.parameters["n_train"] = std::to_string(p.n_train);
  info.parameters["n_id"] = std::to_string(p.n_id);
  info.parameters["n_ood"] = std::to_string(p.n_ood);
  info.parameters["ood_energy"] = format_double(p.ood_energy);
  info.parameters["margin"] = format_double(p.margin);
  info.parameters["randomize_basis"] = p.randomize_basis ? "true" : "false";
  return info;
}

DatasetSplit planted_id_split(const Matrix& basis, const PlantedParams& p, std::size_t n,
                              CounterRng rng, Role role, const GeneratorInfo& info) {
  DatasetSplit split{Matrix(n, p.dim), std::vector<std::size_t>(n), 2, role, info};
  for (std::size_t i = 0; i < n; ++i) {
    Vector a;
    do {
      a = gaussian_vector(rng, p.rank);
      normalize(a);
    } while (std::abs(a[0]) < p.margin);
    split.labels[i] = a[0] >= 0.0 ? 1 : 0;
    const Vector x = matvec(basis, a);
    std::copy(x.begin(), x.end(), split.inputs.row(i).begin());
  }
  return split;
}

}  // namespace

Matrix planted_basis(const PlantedParams& p, std::uint64_t seed) {
  Matrix basis(p.dim, p.rank);
  if (!p.randomize_basis) {
    for (std::size_t j = 0; j < p.rank; ++j) basis(j, j) = 1.0;
    return basis;
  }
  CounterRng rng(seed, kBasisStream);
  for (std::size_t j = 0; j < p.rank; ++j) {
    Vector v = gaussian_vector(rng, p.dim);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t q = 0; q < j; ++q) {
        const Vector bq = basis.column(q);
        const double proj = dot(bq, v);
        for (std::size_t i = 0; i < p.dim; ++i) v[i] -= proj * bq[i];
      }
    }
    normalize(v);
    basis.set_column(j, v);
  }
  return basis;
}

SplitSet gen_planted_subspace(const PlantedParams& p, std::uint64_t seed) {
  if (p.rank == 0 || p.rank >= p.dim) {
    throw ConfigError("gen_planted_subspace: need 0 < k < d, got k = " + std::to_string(p.rank) +
                      ", d = " + std::to_string(p.dim));
  }
  if (!(p.ood_energy > 0.0 && p.ood_energy <= 1.0)) {
    throw ConfigError("gen_planted_subspace: ood_energy must lie in (0, 1], got " +
                      format_double(p.ood_energy));
  }
  if (!(p.margin >= 0.0 && p.margin < 1.0)) {
    throw ConfigError("gen_planted_subspace: margin must lie in [0, 1)");
  }
  const Matrix basis = planted_basis(p, seed);
  const GeneratorInfo info = planted_info(p, seed);

  SplitSet set;
  set.train = planted_id_split(basis, p, p.n_train, CounterRng(seed, kTrainStream), Role::train, info);
  set.id_test = planted_id_split(basis, p, p.n_id, CounterRng(seed, kIdStream), Role::id_test, info);

  CounterRng rng(seed, kOodStream);
  DatasetSplit ood{Matrix(p.n_ood, p.dim), std::vector<std::size_t>(p.n_ood, 0), 2, Role::ood_test, info};
  const double inside = std::sqrt(1.0 - p.ood_energy);
  const double outside = std::sqrt(p.ood_energy);
  for (std::size_t i = 0; i < p.n_ood; ++i) {
    Vector b = gaussian_vector(rng, p.rank);
    normalize(b);
    const Vector in_part = matvec(basis, b);

    Vector out_part;
    double out_norm = 0.0;
    do {
      const Vector g = gaussian_vector(rng, p.dim);
      const Vector coords = matvec_transposed(basis, g);
      const Vector back = matvec(basis, coords);
      out_part.resize(p.dim);
      for (std::size_t j = 0; j < p.dim; ++j) out_part[j] = g[j] - back[j];
      out_norm = norm2(out_part);
    } while (out_norm < 1e-6);
    for (double& v : out_part) v /= out_norm;

    auto row = ood.inputs.row(i);
    for (std::size_t j = 0; j < p.dim; ++j) row[j] = inside * in_part[j] + outside * out_part[j];
  }
  set.ood_test = std::move(ood);
  return set;
}

Vector random_shift(std::size_t dim, double norm, std::uint64_t seed) {
  CounterRng rng(seed, kShiftStream);
  Vector v = gaussian_vector(rng, dim);
  normalize(v);
  for (double& x : v) x *= norm;
  return v;
}

Matrix blob_centers(const BlobParams& p, std::uint64_t seed) {
  CounterRng center_rng(seed, kCenterStream);
  Matrix centers(p.classes, p.dim);
  for (double& c : centers.data()) c = p.center_scale * center_rng.normal();
  return centers;
}

Vector orthogonal_shift(const Matrix& centers, double norm, std::uint64_t seed) {
  if (centers.rows() >= centers.cols()) {
    throw ConfigError("orthogonal_shift: " + std::to_string(centers.rows()) + " centers leave no orthogonal direction in R^" +
                      std::to_string(centers.cols()));
  }
  // Orthonormal basis of the center span (Gram-Schmidt), then strip it from a random draw.
  std::vector<Vector> basis;
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    Vector v(centers.row(c).begin(), centers.row(c).end());
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& b : basis) {
        const double d = dot(b, v);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] -= d * b[j];
      }
    }
    const double n = norm2(v);
    if (n > 1e-12) {
      for (double& x : v) x /= n;
      basis.push_back(std::move(v));
    }
  }
  CounterRng rng(seed, kShiftStream);
  Vector v;
  double n = 0.0;
  do {
    v = gaussian_vector(rng, centers.cols());
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& b : basis) {
        const double d = dot(b, v);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] -= d * b[j];
      }
    }
    n = norm2(v);
  } while (n < 1e-6);
  for (double& x : v) x *= norm / n;
  return v;
}

SplitSet gen_gaussian_blobs(const BlobParams& p, std::uint64_t seed) {
  if (!(p.spread > 0.0)) throw ConfigError("gen_gaussian_blobs: spread must be > 0");
  if (p.classes == 0 || p.dim == 0) throw ConfigError("gen_gaussian_blobs: classes and dim must be >= 1");
  Vector shift = p.shift_ood.empty() ? Vector(p.dim, 0.0) : p.shift_ood;
  if (shift.size() != p.dim) {
    throw DimensionError("gen_gaussian_blobs: shift length " + std::to_string(shift.size()) +
                         " for dim " + std::to_string(p.dim));
  }

  GeneratorInfo info{"gaussian_blobs", seed, {}};
  info.parameters["classes"] = std::to_string(p.classes);
  info.parameters["dim"] = std::to_string(p.dim);
  info.parameters["spread"] = format_double(p.spread);
  info.parameters["center_scale"] = format_double(p.center_scale);
  info.parameters["shift_norm"] = format_double(norm2(shift));
  info.parameters["n_train"] = std::to_string(p.n_train);
  info.parameters["n_id"] = std::to_string(p.n_id);
  info.parameters["n_ood"] = std::to_string(p.n_ood);

  const Matrix centers = blob_centers(p, seed);

  auto draw = [&](std::size_t n, CounterRng rng, Role role) {
    DatasetSplit split{Matrix(n, p.dim), std::vector<std::size_t>(n), p.classes, role, info};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cls = role == Role::ood_test ? 0 : i % p.classes;
      split.labels[i] = cls;
      auto row = split.inputs.row(i);
      for (std::size_t j = 0; j < p.dim; ++j) {
        row[j] = centers(cls, j) + p.spread * rng.normal();
        if (role == Role::ood_test) row[j] += shift[j];
      }
    }
    return split;
  };

  SplitSet set;
  set.train = draw(p.n_train, CounterRng(seed, kTrainStream), Role::train);
  set.id_test = draw(p.n_id, CounterRng(seed, kIdStream), Role::id_test);
  set.ood_test = draw(p.n_ood, CounterRng(seed, kOodStream), Role::ood_test);
  return set;
}

}  // namespace gradorth
