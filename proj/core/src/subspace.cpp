#include "gradorth/subspace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"
#include "gradorth/rng.hpp"
#include "gradorth/svd.hpp"

namespace gradorth {

namespace {

constexpr const char* kSubspaceMagic = "GRADORTH-SUBSPACE 1";
constexpr std::uint64_t kSampleStreamBase = 2000;

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string expect(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("subspace file: missing '" + key + "'");
  const std::string prefix = key + " = ";
  if (line.rfind(prefix, 0) != 0) {
    throw FormatError("subspace file: expected '" + key + "', got '" + line + "'");
  }
  return line.substr(prefix.size());
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("subspace file: bad integer '" + text + "' for '" + key + "'");
  }
  return value;
}

}  // namespace

std::vector<std::size_t> sample_per_class(const DatasetSplit& data, std::size_t n_per_class,
                                          std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members(data.num_classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] >= data.num_classes) {
      throw DimensionError("sample_per_class: label out of range at sample " + std::to_string(i));
    }
    members[data.labels[i]].push_back(i);
  }
  std::vector<std::size_t> out;
  out.reserve(n_per_class * data.num_classes);
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    auto& pool = members[c];
    if (pool.size() < n_per_class) {
      throw ConfigError("sample_per_class: class " + std::to_string(c) + " has " +
                        std::to_string(pool.size()) + " samples, need " + std::to_string(n_per_class));
    }
    // Partial Fisher-Yates over the class members.
    CounterRng rng(seed, kSampleStreamBase + c);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_per_class));
    std::sort(chosen.begin(), chosen.end());
    out.insert(out.end(), chosen.begin(), chosen.end());
  }
  return out;
}

Matrix build_representation_matrix(const Network& net, const DatasetSplit& data,
                                   const std::vector<std::size_t>& ids, std::size_t layer) {
  if (!net.frozen()) throw StateError("build_representation_matrix: network must be frozen");
  if (layer >= net.num_layers()) {
    throw DimensionError("build_representation_matrix: layer " + std::to_string(layer) + " of " +
                         std::to_string(net.num_layers()));
  }
  std::vector<Vector> columns;
  for (std::size_t id : ids) {
    if (id >= data.size()) throw DimensionError("build_representation_matrix: sample id out of range");
    const ForwardResult fwd = forward(net, data.sample(id));
    const LayerSpec& spec = net.layer(layer).spec;
    if (spec.kind == LayerKind::dense) {
      columns.push_back(fwd.reps[layer]);
    } else {
      const Matrix patches = conv_patches(spec, fwd.reps[layer]);
      for (std::size_t p = 0; p < patches.rows(); ++p) {
        columns.emplace_back(patches.row(p).begin(), patches.row(p).end());
      }
    }
  }
  if (columns.empty()) throw DimensionError("build_representation_matrix: no samples");
  Matrix rep(columns.front().size(), columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) rep.set_column(j, columns[j]);
  return rep;
}

Subspace compute_subspace(const Matrix& rep, double eps_th, SubspaceMeta meta) {
  const SvdResult svd = svd_thin(rep);
  const std::size_t k = rank_select(svd, eps_th);
  Subspace sub;
  sub.basis = svd.u.leading_columns(k);
  sub.layer_index = meta.layer_index;
  sub.eps_th = eps_th;
  sub.k = k;
  sub.sample_ids = std::move(meta.sample_ids);
  sub.seed = meta.seed;
  sub.singular_values = svd.sigma;
  return sub;
}

Subspace build_subspace(const Network& net, const DatasetSplit& data, std::size_t layer,
                        std::size_t n_per_class, double eps_th, std::uint64_t seed) {
  std::vector<std::size_t> ids = sample_per_class(data, n_per_class, seed);
  const Matrix rep = build_representation_matrix(net, data, ids, layer);
  return compute_subspace(rep, eps_th, SubspaceMeta{layer, std::move(ids), seed});
}

void write_subspace(std::ostream& out, const Subspace& sub) {
  std::vector<std::string> ids;
  for (std::size_t id : sub.sample_ids) ids.push_back(std::to_string(id));
  std::vector<std::string> sigma;
  for (double s : sub.singular_values) sigma.push_back(format_double(s));
  out << kSubspaceMagic << '\n'
      << "layer = " << sub.layer_index << '\n'
      << "eps_th = " << format_double(sub.eps_th) << '\n'
      << "k = " << sub.k << '\n'
      << "seed = " << sub.seed << '\n'
      << "sample_ids = " << join(ids) << '\n'
      << "singular_values = " << join(sigma) << '\n'
      << "end\n";
  write_gomx(out, sub.basis);
}

Subspace read_subspace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSubspaceMagic) throw FormatError("subspace file: bad magic line");
  Subspace sub;
  sub.layer_index = parse_unsigned("layer", expect(in, "layer"));
  sub.eps_th = parse_double(expect(in, "eps_th"));
  sub.k = parse_unsigned("k", expect(in, "k"));
  sub.seed = parse_unsigned("seed", expect(in, "seed"));
  for (const auto& s : split_csv(expect(in, "sample_ids"))) sub.sample_ids.push_back(parse_unsigned("sample_ids", s));
  for (const auto& s : split_csv(expect(in, "singular_values"))) sub.singular_values.push_back(parse_double(s));
  if (!std::getline(in, line) || line != "end") throw FormatError("subspace file: missing 'end'");
  sub.basis = read_gomx(in);
  if (sub.basis.cols() != sub.k) throw FormatError("subspace file: basis has " + sub.basis.shape_string() +
                                                  " but k = " + std::to_string(sub.k));
  return sub;
}

void save_subspace(const std::filesystem::path& path, const Subspace& sub) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_subspace(out, sub);
}

Subspace load_subspace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_subspace(in);
}

}  // namespace gradorth
