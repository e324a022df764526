#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradorth/config.hpp"
#include "gradorth/dataset.hpp"
#include "gradorth/metrics.hpp"
#include "gradorth/network.hpp"
#include "gradorth/scorer.hpp"
#include "gradorth/subspace.hpp"
#include "gradorth/trainer.hpp"

namespace gradorth {

struct SeedMetrics {
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double fpr95 = 0.0;
  double auroc = 0.0;
};

// One (variant, p) cell of an evaluation. Baselines (msp, energy) carry no norm.
struct EvalRow {
  Variant variant = Variant::last_layer;
  std::optional<NormOrder> norm;
  std::string method;
  std::vector<SeedMetrics> per_seed;
  MeanVariance gamma;
  MeanVariance fpr95;
  MeanVariance auroc;
};

struct SubspaceSummary {
  std::uint64_t seed = 0;
  std::size_t layer = 0;
  std::size_t k = 0;
  std::size_t dim = 0;
};

struct TrainingSummary {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  bool loss_monotone = true;
  std::size_t epochs = 0;
};

struct EvalReport {
  // Mean over seeds of the first row.
  double gamma = 0.0;
  double fpr95 = 0.0;
  double auroc = 0.0;
  std::vector<EvalRow> rows;
  std::vector<SubspaceSummary> subspaces;
  std::optional<TrainingSummary> training;
  PseudoLabel pseudo_label = PseudoLabel::uniform;
  Aggregate aggregate = Aggregate::metrics;
  double tpr = 0.95;
  std::size_t id_samples = 0;
  std::size_t ood_samples = 0;
  ConfigTable config;
};

// Display name matching the usual result-table labels ("GradOrth", "GradOrth-NoSVD", ...).
std::string method_name(Variant v);

SplitSet make_datasets(const DataConfig& data);
Network make_network(const ModelConfig& model);
Network train_model(const ExperimentConfig& cfg, const SplitSet& data, TrainLog* log = nullptr);

// One subspace per (seed, layer); last layer only unless cfg.all_layers.
std::vector<Subspace> build_subspaces(const Network& net, const DatasetSplit& train, const SubspaceConfig& cfg);

// Full variant x norm cross-product with per-seed metrics and seed means.
EvalReport evaluate(const Network& net, const std::vector<Subspace>& subspaces, const DatasetSplit& id_test,
                    const DatasetSplit& ood_test, const EvalSettings& settings);

// Generate data, train, build subspaces, evaluate; the report embeds the config snapshot.
EvalReport run_experiment(const ExperimentConfig& cfg);

std::string report_to_json(const EvalReport& report);
// method,p,fpr95_pct,auroc_pct,fpr95_pct_var,auroc_pct_var,seeds
void write_report_table_csv(std::ostream& out, const EvalReport& report);

enum class Study { norms, layers, nosvd, samples_per_class };
std::string to_string(Study s);
Study parse_study(const std::string& text);

struct AblationRow {
  std::string setting;
  EvalRow result;
};

struct AblationTable {
  Study study = Study::norms;
  std::vector<AblationRow> rows;
  ConfigTable config;
};

inline const std::vector<std::size_t> kDefaultSamplesPerClass = {5, 10, 20, 40};

// norms: last_layer for every p in {0.3, 1, 2, 3, 4, inf}
// layers: last_layer vs all_layers
// nosvd: last_layer vs no_svd
// Single-norm studies use p = 2 when it is among cfg.eval.norms.
// samples_per_class: last_layer with subspaces from each n in `n_list`
AblationTable run_ablation(Study study, const ExperimentConfig& cfg,
                           const std::vector<std::size_t>& n_list = kDefaultSamplesPerClass);

// study,setting,method,p,fpr95_pct,auroc_pct,fpr95_pct_var,auroc_pct_var
void write_ablation_csv(std::ostream& out, const AblationTable& table);

}  // namespace gradorth
