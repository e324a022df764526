#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gradorth/network.hpp"
#include "gradorth/scorer.hpp"
#include "gradorth/synth.hpp"
#include "gradorth/trainer.hpp"

namespace gradorth {

struct DataConfig {
  // "planted" or "blobs".
  std::string generator = "planted";
  std::uint64_t seed = 0;
  PlantedParams planted;
  BlobParams blobs;
  // Blob OOD shift: random direction from the data seed scaled to this norm
  // (in units of absolute distance, not spread).
  double shift_norm = 10.0;
  // "random": any direction. "orthogonal": orthogonal to every class center.
  std::string shift_direction = "random";
};

struct ModelConfig {
  std::vector<LayerSpec> layers;
  Loss loss = Loss::cross_entropy;
  std::uint64_t seed = 0;
};

struct SubspaceConfig {
  double eps_th = 0.97;
  std::size_t n_per_class = 5;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  // Build one subspace per layer (needed by the all_layers variant) instead of the last layer only.
  bool all_layers = false;
};

enum class Aggregate { metrics, scores };
std::string to_string(Aggregate a);
Aggregate parse_aggregate(const std::string& text);

struct EvalSettings {
  std::vector<Variant> variants = {Variant::last_layer};
  std::vector<NormOrder> norms = {NormOrder(2.0)};
  PseudoLabel pseudo_label = PseudoLabel::uniform;
  double tpr = 0.95;
  // metrics: metrics per subspace seed, then mean over seeds.
  // scores: scores averaged over seeds per sample, then one metric evaluation.
  Aggregate aggregate = Aggregate::metrics;
  std::size_t threads = 1;
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  TrainOptions train;
  SubspaceConfig subspace;
  EvalSettings eval;
};

// Ordered section -> (key, value) table; the canonical, serializable form of a config.
struct ConfigTable {
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections;
};

// INI-style text:
//
//   [data]   generator, seed, n_train, n_id, n_ood,
//            planted: dim, rank, ood_energy, margin, randomize_basis
//            blobs:   classes, dim, spread, center_scale, shift_norm, shift_direction
//   [model]  loss (required), seed
//   [layer.N] kind = dense | conv, activation, bias,
//            dense: in, out    conv: in_channels, out_channels, kernel, in_h, in_w
//   [train]  lr, epochs, batch, seed
//   [subspace] eps_th, n_per_class, seeds (comma list), layers = last | all
//   [eval]   variants, norms (comma lists), pseudo_label, tpr, aggregate
//
// Throws ConfigError naming the offending field (and line, for syntax errors).
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(const std::string& text);
// .json files are read as a config snapshot, either bare or under a report's "config" key.
ExperimentConfig load_config(const std::filesystem::path& path);

ConfigTable to_table(const ExperimentConfig& cfg);
ExperimentConfig from_table(const ConfigTable& table);
std::string to_ini(const ExperimentConfig& cfg);

// Worker count from GRADORTH_THREADS (default 1).
std::size_t threads_from_env();

}  // namespace gradorth
