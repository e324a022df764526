#include "gradorth/network_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"

namespace gradorth {

namespace {

constexpr const char* kNetworkMagic = "GRADORTH-NETWORK 1";

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string("network file: missing ") + what);
  return line;
}

std::string header_value(const std::string& line, const std::string& key) {
  const std::string prefix = key + " = ";
  if (line.rfind(prefix, 0) != 0) throw FormatError("network file: expected '" + key + "', got '" + line + "'");
  return line.substr(prefix.size());
}

std::map<std::string, std::string> parse_fields(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream ss(line);
  std::string token;
  ss >> token;  // "layer"
  ss >> token;  // index
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError("network file: bad layer field '" + token + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("network file: bad integer '" + text + "' for '" + key + "'");
  }
  return value;
}

std::size_t field_count(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) throw FormatError("network file: layer missing '" + key + "'");
  return static_cast<std::size_t>(parse_unsigned(key, it->second));
}

}  // namespace

void write_network(std::ostream& out, const Network& net) {
  out << kNetworkMagic << '\n';
  out << "loss = " << to_string(net.loss()) << '\n';
  out << "seed = " << net.seed() << '\n';
  out << "frozen = " << (net.frozen() ? "true" : "false") << '\n';
  out << "layers = " << net.num_layers() << '\n';
  std::size_t offset = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const LayerSpec& s = net.layer(l).spec;
    const std::size_t bytes = gomx_encoded_size(net.layer(l).weights);
    out << "layer " << l << " kind=" << to_string(s.kind);
    if (s.kind == LayerKind::dense) {
      out << " in=" << s.in_dim << " out=" << s.out_dim;
    } else {
      out << " in_channels=" << s.in_channels << " out_channels=" << s.out_channels
          << " kernel=" << s.kernel << " in_h=" << s.in_h << " in_w=" << s.in_w;
    }
    out << " activation=" << to_string(s.activation) << " bias=" << (s.has_bias ? "true" : "false")
        << " offset=" << offset << " bytes=" << bytes << '\n';
    offset += bytes;
  }
  out << "end\n";
  for (const Layer& layer : net.layers()) write_gomx(out, layer.weights);
  if (!out) throw FormatError("network file: write failed");
}

Network read_network(std::istream& in) {
  if (read_line(in, "magic") != kNetworkMagic) throw FormatError("network file: bad magic line");
  const Loss loss = parse_loss(header_value(read_line(in, "loss"), "loss"));
  const auto seed = parse_unsigned("seed", header_value(read_line(in, "seed"), "seed"));
  const bool frozen = header_value(read_line(in, "frozen"), "frozen") == "true";
  const auto count = parse_unsigned("layers", header_value(read_line(in, "layers"), "layers"));

  struct Entry {
    LayerSpec spec;
    std::size_t offset;
    std::size_t bytes;
  };
  std::vector<Entry> entries;
  for (std::size_t l = 0; l < count; ++l) {
    const std::string line = read_line(in, "layer line");
    if (line.rfind("layer " + std::to_string(l) + " ", 0) != 0) {
      throw FormatError("network file: expected layer " + std::to_string(l));
    }
    const auto f = parse_fields(line);
    LayerSpec spec;
    spec.kind = parse_layer_kind(f.at("kind"));
    if (spec.kind == LayerKind::dense) {
      spec.in_dim = field_count(f, "in");
      spec.out_dim = field_count(f, "out");
    } else {
      spec.in_channels = field_count(f, "in_channels");
      spec.out_channels = field_count(f, "out_channels");
      spec.kernel = field_count(f, "kernel");
      spec.in_h = field_count(f, "in_h");
      spec.in_w = field_count(f, "in_w");
    }
    spec.activation = parse_activation(f.count("activation") ? f.at("activation") : "");
    spec.has_bias = f.count("bias") && f.at("bias") == "true";
    entries.push_back({spec, field_count(f, "offset"), field_count(f, "bytes")});
  }
  if (read_line(in, "end marker") != "end") throw FormatError("network file: missing 'end'");

  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<Layer> layers;
  for (const Entry& e : entries) {
    if (e.offset + e.bytes > payload.size()) throw FormatError("network file: truncated payload");
    std::istringstream blob(payload.substr(e.offset, e.bytes));
    layers.push_back(Layer{e.spec, read_gomx(blob)});
  }
  return Network(std::move(layers), loss, seed, frozen);
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_network(out, net);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_network(in);
}

}  // namespace gradorth
