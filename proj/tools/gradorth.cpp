#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gradorth/config.hpp"
#include "gradorth/dataset.hpp"
#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"
#include "gradorth/network_io.hpp"
#include "gradorth/pipeline.hpp"
#include "gradorth/scorer.hpp"
#include "gradorth/subspace.hpp"
#include "gradorth/version.hpp"

namespace fs = std::filesystem;
using namespace gradorth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Overrides {
  std::optional<double> eps_th;
  std::optional<std::size_t> n_per_class;
  std::string seeds;
  std::vector<std::string> norms;
  std::vector<std::string> variants;
  std::string pseudo_label;
};

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_integers(const std::string& text, const std::string& flag) {
  std::vector<std::uint64_t> out;
  try {
    for (const auto& p : split_commas(text)) {
      std::size_t used = 0;
      out.push_back(std::stoull(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    }
  } catch (const std::logic_error&) {
    throw ConfigError(flag + ": expected comma-separated non-negative integers, got '" + text + "'");
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

// "5" means seeds 0..4; "3,7,9" lists seeds explicitly.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  auto seeds = parse_integers(text, "--seeds");
  if (text.find(',') != std::string::npos) return seeds;
  const std::uint64_t n = seeds.front();
  if (n == 0) throw ConfigError("--seeds: need at least one seed");
  seeds.clear();
  for (std::uint64_t s = 0; s < n; ++s) seeds.push_back(s);
  return seeds;
}

std::vector<std::string> flatten(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    for (auto& part : split_commas(item)) out.push_back(part);
  }
  return out;
}

void apply(ExperimentConfig& cfg, const Overrides& o) {
  if (o.eps_th) {
    if (!(*o.eps_th > 0.0 && *o.eps_th <= 1.0)) throw ConfigError("--eps-th: must lie in (0, 1]");
    cfg.subspace.eps_th = *o.eps_th;
  }
  if (o.n_per_class) cfg.subspace.n_per_class = *o.n_per_class;
  if (!o.seeds.empty()) cfg.subspace.seeds = parse_seeds(o.seeds);
  if (!o.norms.empty()) {
    cfg.eval.norms.clear();
    for (const auto& n : flatten(o.norms)) cfg.eval.norms.push_back(NormOrder::parse(n));
  }
  if (!o.variants.empty()) {
    cfg.eval.variants.clear();
    for (const auto& v : flatten(o.variants)) cfg.eval.variants.push_back(parse_variant(v));
  }
  if (!o.pseudo_label.empty()) cfg.eval.pseudo_label = parse_pseudo_label(o.pseudo_label);
  cfg.eval.threads = threads_from_env();
}

ExperimentConfig load(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  apply(cfg, o);
  return cfg;
}

std::size_t class_count(const ExperimentConfig& cfg) {
  return cfg.data.generator == "blobs" ? cfg.data.blobs.classes : 2;
}

SplitSet datasets(const ExperimentConfig& cfg, const std::string& data_dir) {
  if (data_dir.empty()) return make_datasets(cfg.data);
  const std::size_t classes = class_count(cfg);
  SplitSet s;
  s.train = import_split(data_dir, "train", Role::train, classes);
  s.id_test = import_split(data_dir, "id_test", Role::id_test, classes);
  s.ood_test = import_split(data_dir, "ood_test", Role::ood_test, classes);
  return s;
}

std::vector<Subspace> load_subspaces(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("subspace directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".gos") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FormatError("no .gos subspace files in " + dir.string());
  std::vector<Subspace> subs;
  for (const auto& f : files) subs.push_back(load_subspace(f));
  return subs;
}

std::string subspace_file_name(const Subspace& s) {
  return "subspace_s" + std::to_string(s.seed) + "_l" + std::to_string(s.layer_index) + ".gos";
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

void print_subspaces(const std::vector<Subspace>& subs) {
  for (const auto& s : subs) {
    std::cout << "seed " << s.seed << " layer " << s.layer_index << ": k = " << s.k << " of " << s.dim() << '\n';
  }
}

void print_rows(const EvalReport& report) {
  for (const auto& r : report.rows) {
    std::cout << r.method << " p=" << (r.norm ? r.norm->str() : "-") << "  FPR95 " << format_double(r.fpr95.mean)
              << "  AUROC " << format_double(r.auroc.mean) << '\n';
  }
}

void add_overrides(CLI::App* cmd, Overrides& o, bool subspace_flags, bool eval_flags) {
  if (subspace_flags) {
    cmd->add_option("--eps-th", o.eps_th, "energy threshold in (0, 1]");
    cmd->add_option("--n-per-class", o.n_per_class, "samples per class for the representation matrix");
    cmd->add_option("--seeds", o.seeds, "seed count N (seeds 0..N-1) or comma list");
  }
  if (eval_flags) {
    cmd->add_option("--norm", o.norms, "norm orders: 0.3,1,2,3,4,inf");
    cmd->add_option("--variant", o.variants, "last_layer, all_layers, no_svd, msp, energy");
    cmd->add_option("--pseudo-label", o.pseudo_label, "uniform, predicted_onehot, mse_zero");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-subspace out-of-distribution detection"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string data_dir;
  std::string model_path;
  std::string subspace_dir;
  std::string out_path;
  std::string table_path;
  std::string split = "id_test";
  std::string study_name;
  std::string n_list_text;
  Overrides o;

  auto* synth = app.add_subcommand("synth", "generate the train/id_test/ood_test splits");
  synth->add_option("--config", config_path, "experiment config")->required();
  synth->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "train and freeze the network");
  train->add_option("--config", config_path, "experiment config")->required();
  train->add_option("--data", data_dir, "directory written by synth (default: generate from config)");
  train->add_option("--out", out_path, "model file")->required();

  auto* subspace = app.add_subcommand("subspace", "build one ID subspace per seed");
  subspace->add_option("--config", config_path, "experiment config")->required();
  subspace->add_option("--data", data_dir, "directory written by synth");
  subspace->add_option("--model", model_path, "model file")->required();
  subspace->add_option("--out", out_path, "output directory")->required();
  add_overrides(subspace, o, true, false);

  auto* score = app.add_subcommand("score", "per-sample scores as CSV");
  score->add_option("--config", config_path, "experiment config")->required();
  score->add_option("--data", data_dir, "directory written by synth");
  score->add_option("--model", model_path, "model file")->required();
  score->add_option("--subspaces", subspace_dir, "directory of .gos files");
  score->add_option("--split", split, "train, id_test or ood_test");
  score->add_option("--out", out_path, "CSV path (default stdout)");
  add_overrides(score, o, false, true);

  auto* eval = app.add_subcommand("eval", "FPR95/AUROC report; runs the whole pipeline when only --config is given");
  eval->add_option("--config", config_path, "experiment config")->required();
  eval->add_option("--data", data_dir, "directory written by synth");
  eval->add_option("--model", model_path, "model file");
  eval->add_option("--subspaces", subspace_dir, "directory of .gos files");
  eval->add_option("--out", out_path, "JSON report path (default stdout)");
  eval->add_option("--table", table_path, "CSV summary table");
  add_overrides(eval, o, true, true);

  auto* ablate = app.add_subcommand("ablate", "ablation sweep as CSV");
  ablate->add_option("--config", config_path, "experiment config")->required();
  ablate->add_option("--study", study_name, "norms, layers, nosvd, samples_per_class")->required();
  ablate->add_option("--n-list", n_list_text, "samples_per_class values (default 5,10,20,40)");
  ablate->add_option("--out", out_path, "CSV path (default stdout)");
  add_overrides(ablate, o, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) {
      const ExperimentConfig cfg = load(config_path, o);
      const SplitSet s = make_datasets(cfg.data);
      fs::create_directories(out_path);
      export_split(s.train, out_path, "train");
      export_split(s.id_test, out_path, "id_test");
      export_split(s.ood_test, out_path, "ood_test");
      std::cout << "train " << s.train.size() << ", id_test " << s.id_test.size() << ", ood_test "
                << s.ood_test.size() << " samples of dimension " << s.train.features() << '\n';
    } else if (*train) {
      const ExperimentConfig cfg = load(config_path, o);
      const SplitSet s = datasets(cfg, data_dir);
      TrainLog log;
      const Network net = train_model(cfg, s, &log);
      save_network(out_path, net);
      std::cout << "final train loss " << format_double(log.epoch_loss.back()) << ", accuracy "
                << format_double(log.train_accuracy) << '\n';
    } else if (*subspace) {
      const ExperimentConfig cfg = load(config_path, o);
      const SplitSet s = datasets(cfg, data_dir);
      const Network net = load_network(model_path);
      const auto subs = build_subspaces(net, s.train, cfg.subspace);
      fs::create_directories(out_path);
      for (const auto& sub : subs) save_subspace(fs::path(out_path) / subspace_file_name(sub), sub);
      print_subspaces(subs);
    } else if (*score) {
      const ExperimentConfig cfg = load(config_path, o);
      const SplitSet s = datasets(cfg, data_dir);
      const Network net = load_network(model_path);
      std::vector<Subspace> subs;
      if (!subspace_dir.empty()) subs = load_subspaces(subspace_dir);
      const Role role = parse_role(split);
      const DatasetSplit& samples = role == Role::train ? s.train : role == Role::id_test ? s.id_test : s.ood_test;
      ScoreConfig sc;
      sc.variant = cfg.eval.variants.front();
      sc.norm = cfg.eval.norms.front();
      sc.pseudo_label = cfg.eval.pseudo_label;
      sc.threads = cfg.eval.threads;
      std::ostringstream csv;
      write_scores_csv(csv, score_batch(net, subs, samples, sc));
      write_text(out_path, csv.str());
    } else if (*eval) {
      const ExperimentConfig cfg = load(config_path, o);
      EvalReport report;
      if (model_path.empty() && subspace_dir.empty() && data_dir.empty()) {
        report = run_experiment(cfg);
        std::cout << "train loss " << format_double(report.training->final_loss) << ", accuracy "
                  << format_double(report.training->train_accuracy) << '\n';
      } else {
        if (model_path.empty() || subspace_dir.empty()) {
          throw ConfigError("eval needs both --model and --subspaces when either is given");
        }
        const SplitSet s = datasets(cfg, data_dir);
        const Network net = load_network(model_path);
        report = evaluate(net, load_subspaces(subspace_dir), s.id_test, s.ood_test, cfg.eval);
        report.config = to_table(cfg);
      }
      for (const auto& sub : report.subspaces) {
        std::cout << "seed " << sub.seed << " layer " << sub.layer << ": k = " << sub.k << " of " << sub.dim << '\n';
      }
      print_rows(report);
      if (!out_path.empty()) write_text(out_path, report_to_json(report));
      if (!table_path.empty()) {
        std::ostringstream csv;
        write_report_table_csv(csv, report);
        write_text(table_path, csv.str());
      }
    } else if (*ablate) {
      const Study study = parse_study(study_name);
      const ExperimentConfig cfg = load(config_path, o);
      std::vector<std::size_t> n_list = kDefaultSamplesPerClass;
      if (!n_list_text.empty()) {
        n_list.clear();
        for (auto n : parse_integers(n_list_text, "--n-list")) n_list.push_back(static_cast<std::size_t>(n));
      }
      std::ostringstream csv;
      write_ablation_csv(csv, run_ablation(study, cfg, n_list));
      write_text(out_path, csv.str());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DimensionError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}
