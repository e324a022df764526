#include "gradorth/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"

namespace gradorth {

namespace {

using Entries = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

// Typed access to one section; every key must be consumed or it is reported as unknown.
class SectionReader {
 public:
  SectionReader(std::string name, const Entries* entries) : name_(std::move(name)) {
    if (entries == nullptr) return;
    for (const auto& [k, v] : *entries) values_[k] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string required(const std::string& key) {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) {
      throw ConfigError("missing required field '" + name_ + "." + key + "'");
    }
    return it->second;
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    const std::string v = text(key, "");
    try {
      return parse_double(v);
    } catch (const Error&) {
      throw ConfigError("field '" + name_ + "." + key + "': expected a number, got '" + v + "'");
    }
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    return parse_count(key, text(key, ""));
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    const std::string v = text(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("field '" + name_ + "." + key + "': expected true/false, got '" + v + "'");
  }

  std::uint64_t parse_count(const std::string& key, const std::string& v) const {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("field '" + name_ + "." + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return std::stoull(v);
  }

  template <typename Fn>
  auto wrap(const std::string& key, Fn&& fn) {
    try {
      return fn();
    } catch (const ConfigError& e) {
      throw ConfigError("field '" + name_ + "." + key + "': " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) throw ConfigError("unknown field '" + name_ + "." + k + "'");
    }
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

const Entries* find_section(const ConfigTable& t, const std::string& name) {
  for (const auto& s : t.sections) {
    if (s.name == name) return &s.entries;
  }
  return nullptr;
}

ConfigTable table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config snapshot must be a JSON object");
  ConfigTable t;
  for (const auto& [name, section] : j.items()) {
    if (!section.is_object()) throw ConfigError("config snapshot section '" + name + "' must be an object");
    ConfigTable::Section s{name, {}};
    for (const auto& [k, v] : section.items()) {
      s.entries.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    }
    t.sections.push_back(std::move(s));
  }
  return t;
}

}  // namespace

std::string to_string(Aggregate a) { return a == Aggregate::metrics ? "metrics" : "scores"; }

Aggregate parse_aggregate(const std::string& text) {
  if (text == "metrics") return Aggregate::metrics;
  if (text == "scores") return Aggregate::scores;
  throw ConfigError("unknown aggregate '" + text + "' (expected metrics or scores)");
}

ExperimentConfig from_table(const ConfigTable& table) {
  static const std::set<std::string> kKnown = {"data", "model", "train", "subspace", "eval"};
  for (const auto& s : table.sections) {
    if (!kKnown.count(s.name) && s.name.rfind("layer.", 0) != 0) {
      throw ConfigError("unknown section [" + s.name + "]");
    }
  }

  ExperimentConfig cfg;

  SectionReader data("data", find_section(table, "data"));
  cfg.data.generator = data.text("generator", "planted");
  cfg.data.seed = data.count("seed", 0);
  const std::size_t n_train = data.count("n_train", 200);
  const std::size_t n_id = data.count("n_id", 200);
  const std::size_t n_ood = data.count("n_ood", 200);
  if (cfg.data.generator == "planted") {
    PlantedParams& p = cfg.data.planted;
    p.dim = data.count("dim", 16);
    p.rank = data.count("rank", 3);
    p.ood_energy = data.real("ood_energy", 1.0);
    p.margin = data.real("margin", 0.2);
    p.randomize_basis = data.flag("randomize_basis", false);
    p.n_train = n_train;
    p.n_id = n_id;
    p.n_ood = n_ood;
  } else if (cfg.data.generator == "blobs") {
    BlobParams& b = cfg.data.blobs;
    b.classes = data.count("classes", 3);
    b.dim = data.count("dim", 8);
    b.spread = data.real("spread", 1.0);
    b.center_scale = data.real("center_scale", 4.0);
    cfg.data.shift_norm = data.real("shift_norm", 10.0 * b.spread);
    cfg.data.shift_direction = data.text("shift_direction", "random");
    if (cfg.data.shift_direction != "random" && cfg.data.shift_direction != "orthogonal") {
      throw ConfigError("field 'data.shift_direction': expected random or orthogonal, got '" +
                        cfg.data.shift_direction + "'");
    }
    b.n_train = n_train;
    b.n_id = n_id;
    b.n_ood = n_ood;
  } else {
    throw ConfigError("field 'data.generator': unknown generator '" + cfg.data.generator +
                      "' (expected planted or blobs)");
  }
  data.finish();

  SectionReader model("model", find_section(table, "model"));
  const std::string loss_text = model.required("loss");
  cfg.model.loss = model.wrap("loss", [&] { return parse_loss(loss_text); });
  cfg.model.seed = model.count("seed", 0);
  model.finish();

  std::map<std::size_t, const Entries*> layer_sections;
  for (const auto& s : table.sections) {
    if (s.name.rfind("layer.", 0) != 0) continue;
    const std::string idx = s.name.substr(6);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad layer section name [" + s.name + "]");
    }
    layer_sections[std::stoull(idx)] = &s.entries;
  }
  if (layer_sections.empty()) throw ConfigError("missing required section [layer.0]");
  std::size_t expected = 0;
  for (const auto& [idx, entries] : layer_sections) {
    if (idx != expected) throw ConfigError("layer sections must be numbered 0.." + std::to_string(layer_sections.size() - 1));
    ++expected;
    const std::string name = "layer." + std::to_string(idx);
    SectionReader r(name, entries);
    LayerSpec spec;
    spec.kind = r.wrap("kind", [&] { return parse_layer_kind(r.text("kind", "dense")); });
    spec.activation = r.wrap("activation", [&] { return parse_activation(r.text("activation", "identity")); });
    spec.has_bias = r.flag("bias", true);
    if (spec.kind == LayerKind::dense) {
      spec.in_dim = r.parse_count("in", r.required("in"));
      spec.out_dim = r.parse_count("out", r.required("out"));
    } else {
      spec.in_channels = r.parse_count("in_channels", r.required("in_channels"));
      spec.out_channels = r.parse_count("out_channels", r.required("out_channels"));
      spec.kernel = r.parse_count("kernel", r.required("kernel"));
      spec.in_h = r.parse_count("in_h", r.required("in_h"));
      spec.in_w = r.parse_count("in_w", r.required("in_w"));
    }
    r.finish();
    r.wrap("kind", [&] { spec.validate(); return 0; });
    cfg.model.layers.push_back(spec);
  }

  SectionReader train("train", find_section(table, "train"));
  cfg.train.lr = train.real("lr", 0.1);
  cfg.train.epochs = train.count("epochs", 100);
  cfg.train.batch = train.count("batch", 16);
  cfg.train.seed = train.count("seed", 0);
  train.finish();
  if (cfg.train.batch == 0) throw ConfigError("field 'train.batch': must be >= 1");

  SectionReader sub("subspace", find_section(table, "subspace"));
  cfg.subspace.eps_th = sub.real("eps_th", 0.97);
  if (!(cfg.subspace.eps_th > 0.0 && cfg.subspace.eps_th <= 1.0)) {
    throw ConfigError("field 'subspace.eps_th': must lie in (0, 1]");
  }
  cfg.subspace.n_per_class = sub.count("n_per_class", 5);
  if (sub.has("seeds")) {
    cfg.subspace.seeds.clear();
    for (const auto& s : split_list(sub.text("seeds", ""))) cfg.subspace.seeds.push_back(sub.parse_count("seeds", s));
    if (cfg.subspace.seeds.empty()) throw ConfigError("field 'subspace.seeds': empty list");
  }
  const std::string layers = sub.text("layers", "last");
  if (layers != "last" && layers != "all") {
    throw ConfigError("field 'subspace.layers': expected last or all, got '" + layers + "'");
  }
  cfg.subspace.all_layers = layers == "all";
  sub.finish();

  SectionReader eval("eval", find_section(table, "eval"));
  if (eval.has("variants")) {
    cfg.eval.variants.clear();
    for (const auto& v : split_list(eval.text("variants", ""))) {
      cfg.eval.variants.push_back(eval.wrap("variants", [&] { return parse_variant(v); }));
    }
  }
  if (eval.has("norms")) {
    cfg.eval.norms.clear();
    for (const auto& v : split_list(eval.text("norms", ""))) {
      cfg.eval.norms.push_back(eval.wrap("norms", [&] { return NormOrder::parse(v); }));
    }
  }
  if (cfg.eval.variants.empty()) throw ConfigError("field 'eval.variants': empty list");
  if (cfg.eval.norms.empty()) throw ConfigError("field 'eval.norms': empty list");
  cfg.eval.pseudo_label = eval.wrap("pseudo_label", [&] { return parse_pseudo_label(eval.text("pseudo_label", "uniform")); });
  cfg.eval.tpr = eval.real("tpr", 0.95);
  if (!(cfg.eval.tpr > 0.0 && cfg.eval.tpr <= 1.0)) throw ConfigError("field 'eval.tpr': must lie in (0, 1]");
  cfg.eval.aggregate = eval.wrap("aggregate", [&] { return parse_aggregate(eval.text("aggregate", "metrics")); });
  eval.finish();

  return cfg;
}

ConfigTable to_table(const ExperimentConfig& cfg) {
  ConfigTable t;
  Entries data = {{"generator", cfg.data.generator}, {"seed", std::to_string(cfg.data.seed)}};
  if (cfg.data.generator == "blobs") {
    const BlobParams& b = cfg.data.blobs;
    data.insert(data.end(), {{"n_train", std::to_string(b.n_train)},
                             {"n_id", std::to_string(b.n_id)},
                             {"n_ood", std::to_string(b.n_ood)},
                             {"classes", std::to_string(b.classes)},
                             {"dim", std::to_string(b.dim)},
                             {"spread", format_double(b.spread)},
                             {"center_scale", format_double(b.center_scale)},
                             {"shift_norm", format_double(cfg.data.shift_norm)},
                             {"shift_direction", cfg.data.shift_direction}});
  } else {
    const PlantedParams& p = cfg.data.planted;
    data.insert(data.end(), {{"n_train", std::to_string(p.n_train)},
                             {"n_id", std::to_string(p.n_id)},
                             {"n_ood", std::to_string(p.n_ood)},
                             {"dim", std::to_string(p.dim)},
                             {"rank", std::to_string(p.rank)},
                             {"ood_energy", format_double(p.ood_energy)},
                             {"margin", format_double(p.margin)},
                             {"randomize_basis", p.randomize_basis ? "true" : "false"}});
  }
  t.sections.push_back({"data", std::move(data)});
  t.sections.push_back({"model", {{"loss", to_string(cfg.model.loss)}, {"seed", std::to_string(cfg.model.seed)}}});
  for (std::size_t l = 0; l < cfg.model.layers.size(); ++l) {
    const LayerSpec& s = cfg.model.layers[l];
    Entries e = {{"kind", to_string(s.kind)}};
    if (s.kind == LayerKind::dense) {
      e.insert(e.end(), {{"in", std::to_string(s.in_dim)}, {"out", std::to_string(s.out_dim)}});
    } else {
      e.insert(e.end(), {{"in_channels", std::to_string(s.in_channels)},
                         {"out_channels", std::to_string(s.out_channels)},
                         {"kernel", std::to_string(s.kernel)},
                         {"in_h", std::to_string(s.in_h)},
                         {"in_w", std::to_string(s.in_w)}});
    }
    e.insert(e.end(), {{"activation", to_string(s.activation)}, {"bias", s.has_bias ? "true" : "false"}});
    t.sections.push_back({"layer." + std::to_string(l), std::move(e)});
  }
  t.sections.push_back({"train",
                        {{"lr", format_double(cfg.train.lr)},
                         {"epochs", std::to_string(cfg.train.epochs)},
                         {"batch", std::to_string(cfg.train.batch)},
                         {"seed", std::to_string(cfg.train.seed)}}});
  std::vector<std::string> seeds;
  for (auto s : cfg.subspace.seeds) seeds.push_back(std::to_string(s));
  t.sections.push_back({"subspace",
                        {{"eps_th", format_double(cfg.subspace.eps_th)},
                         {"n_per_class", std::to_string(cfg.subspace.n_per_class)},
                         {"seeds", join_list(seeds)},
                         {"layers", cfg.subspace.all_layers ? "all" : "last"}}});
  std::vector<std::string> variants;
  for (Variant v : cfg.eval.variants) variants.push_back(to_string(v));
  std::vector<std::string> norms;
  for (NormOrder p : cfg.eval.norms) norms.push_back(p.str());
  t.sections.push_back({"eval",
                        {{"variants", join_list(variants)},
                         {"norms", join_list(norms)},
                         {"pseudo_label", to_string(cfg.eval.pseudo_label)},
                         {"tpr", format_double(cfg.eval.tpr)},
                         {"aggregate", to_string(cfg.eval.aggregate)}}});
  return t;
}

ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigTable table;
  for (const auto& [name, section] : tree) {
    if (section.empty()) throw ConfigError("field '" + name + "' appears outside any [section]");
    ConfigTable::Section s{name, {}};
    for (const auto& [key, value] : section) s.entries.emplace_back(key, trim(value.data()));
    table.sections.push_back(std::move(s));
  }
  return from_table(table);
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  if (path.extension() != ".json") return parse_config(in);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (j.contains("config")) j = j.at("config");
  return from_table(table_from_json(j));
}

std::string to_ini(const ExperimentConfig& cfg) {
  std::ostringstream out;
  const ConfigTable t = to_table(cfg);
  for (std::size_t i = 0; i < t.sections.size(); ++i) {
    if (i) out << '\n';
    out << '[' << t.sections[i].name << "]\n";
    for (const auto& [k, v] : t.sections[i].entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

std::size_t threads_from_env() {
  const char* env = std::getenv("GRADORTH_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const std::string v = env;
  if (v.find_first_not_of("0123456789") != std::string::npos || std::stoull(v) == 0) {
    throw ConfigError("GRADORTH_THREADS must be a positive integer, got '" + v + "'");
  }
  return std::stoull(v);
}

}  // namespace gradorth
