#include "gradorth/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "json.hpp"

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"
#include "gradorth/version.hpp"

namespace gradorth {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<double> scores_for_seed(const std::vector<ScoredSample>& rows, std::uint64_t seed) {
  std::vector<double> out;
  for (const ScoredSample& r : rows) {
    if (r.subspace_seed == seed) out.push_back(r.score);
  }
  return out;
}

std::vector<double> seed_averaged_scores(const std::vector<ScoredSample>& rows) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const ScoredSample& r : rows) {
    auto& [sum, n] = acc[r.sample_id];
    sum += r.score;
    ++n;
  }
  std::vector<double> out;
  for (const auto& [id, entry] : acc) out.push_back(entry.first / static_cast<double>(entry.second));
  return out;
}

std::vector<std::uint64_t> distinct_seeds(const std::vector<ScoredSample>& rows) {
  std::vector<std::uint64_t> seeds;
  for (const ScoredSample& r : rows) {
    if (std::find(seeds.begin(), seeds.end(), r.subspace_seed) == seeds.end()) seeds.push_back(r.subspace_seed);
  }
  return seeds;
}

EvalRow evaluate_cell(const Network& net, const std::vector<Subspace>& subspaces, const DatasetSplit& id_test,
                      const DatasetSplit& ood_test, const EvalSettings& settings, Variant variant,
                      std::optional<NormOrder> norm) {
  ScoreConfig sc;
  sc.variant = variant;
  sc.norm = norm.value_or(NormOrder(2.0));
  sc.pseudo_label = settings.pseudo_label;
  sc.threads = settings.threads;
  const auto id_rows = score_batch(net, subspaces, id_test, sc);
  const auto ood_rows = score_batch(net, subspaces, ood_test, sc);

  EvalRow row;
  row.variant = variant;
  row.norm = norm;
  row.method = method_name(variant);
  if (settings.aggregate == Aggregate::scores) {
    const auto id = seed_averaged_scores(id_rows);
    const auto ood = seed_averaged_scores(ood_rows);
    const double g = calibrate_gamma(id, settings.tpr);
    row.gamma = {g, 0.0};
    row.fpr95 = {fpr_at_tpr(id, ood, settings.tpr), 0.0};
    row.auroc = {auroc(id, ood), 0.0};
    return row;
  }
  std::vector<double> gammas;
  std::vector<double> fprs;
  std::vector<double> aucs;
  for (std::uint64_t seed : distinct_seeds(id_rows)) {
    const auto id = scores_for_seed(id_rows, seed);
    const auto ood = scores_for_seed(ood_rows, seed);
    SeedMetrics m{seed, calibrate_gamma(id, settings.tpr), fpr_at_tpr(id, ood, settings.tpr), auroc(id, ood)};
    row.per_seed.push_back(m);
    gammas.push_back(m.gamma);
    fprs.push_back(m.fpr95);
    aucs.push_back(m.auroc);
  }
  row.gamma = mean_variance(gammas);
  row.fpr95 = mean_variance(fprs);
  row.auroc = mean_variance(aucs);
  return row;
}

ordered_json mv_json(const MeanVariance& mv) { return ordered_json{{"mean", mv.mean}, {"variance", mv.variance}}; }

ordered_json row_json(const EvalRow& row) {
  ordered_json j;
  j["method"] = row.method;
  j["variant"] = to_string(row.variant);
  j["p"] = row.norm ? row.norm->str() : "-";
  j["gamma"] = mv_json(row.gamma);
  j["fpr95"] = mv_json(row.fpr95);
  j["auroc"] = mv_json(row.auroc);
  ordered_json seeds = ordered_json::array();
  for (const SeedMetrics& m : row.per_seed) {
    seeds.push_back({{"seed", m.seed}, {"gamma", m.gamma}, {"fpr95", m.fpr95}, {"auroc", m.auroc}});
  }
  j["per_seed"] = std::move(seeds);
  return j;
}

ordered_json config_json(const ConfigTable& t) {
  ordered_json j = ordered_json::object();
  for (const auto& s : t.sections) {
    ordered_json section = ordered_json::object();
    for (const auto& [k, v] : s.entries) section[k] = v;
    j[s.name] = std::move(section);
  }
  return j;
}

std::string pct(double v) { return format_double(100.0 * v); }

std::string pct_var(double v) { return format_double(10000.0 * v); }

bool needs_all_layers(const ExperimentConfig& cfg) {
  if (cfg.subspace.all_layers) return true;
  return std::find(cfg.eval.variants.begin(), cfg.eval.variants.end(), Variant::all_layers) != cfg.eval.variants.end();
}

TrainingSummary summarize(const TrainLog& log, std::size_t epochs) {
  TrainingSummary t;
  t.initial_loss = log.epoch_loss.empty() ? 0.0 : log.epoch_loss.front();
  t.final_loss = log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back();
  t.train_accuracy = log.train_accuracy;
  t.loss_monotone = log.loss_monotone;
  t.epochs = epochs;
  return t;
}

}  // namespace

std::string method_name(Variant v) {
  switch (v) {
    case Variant::last_layer:
      return "GradOrth";
    case Variant::all_layers:
      return "GradOrth-All layers";
    case Variant::no_svd:
      return "GradOrth-NoSVD";
    case Variant::msp:
      return "Softmax score";
    case Variant::energy:
      return "Energy score";
  }
  return "GradOrth";
}

SplitSet make_datasets(const DataConfig& data) {
  if (data.generator == "planted") return gen_planted_subspace(data.planted, data.seed);
  if (data.generator == "blobs") {
    BlobParams p = data.blobs;
    if (p.shift_ood.empty()) {
      p.shift_ood = data.shift_direction == "orthogonal"
                        ? orthogonal_shift(blob_centers(p, data.seed), data.shift_norm, data.seed)
                        : random_shift(p.dim, data.shift_norm, data.seed);
    }
    return gen_gaussian_blobs(p, data.seed);
  }
  throw ConfigError("unknown generator '" + data.generator + "'");
}

Network make_network(const ModelConfig& model) { return Network(model.layers, model.loss, model.seed); }

Network train_model(const ExperimentConfig& cfg, const SplitSet& data, TrainLog* log) {
  return train_sgd(make_network(cfg.model), data.train, cfg.train, log);
}

std::vector<Subspace> build_subspaces(const Network& net, const DatasetSplit& train, const SubspaceConfig& cfg) {
  std::vector<Subspace> out;
  const std::size_t first = cfg.all_layers ? 0 : net.last_layer_index();
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t layer = first; layer < net.num_layers(); ++layer) {
      out.push_back(build_subspace(net, train, layer, cfg.n_per_class, cfg.eps_th, seed));
    }
  }
  return out;
}

EvalReport evaluate(const Network& net, const std::vector<Subspace>& subspaces, const DatasetSplit& id_test,
                    const DatasetSplit& ood_test, const EvalSettings& settings) {
  EvalReport report;
  report.pseudo_label = settings.pseudo_label;
  report.aggregate = settings.aggregate;
  report.tpr = settings.tpr;
  report.id_samples = id_test.size();
  report.ood_samples = ood_test.size();
  for (const Subspace& s : subspaces) report.subspaces.push_back({s.seed, s.layer_index, s.k, s.dim()});
  for (Variant v : settings.variants) {
    if (uses_gradient(v)) {
      for (NormOrder p : settings.norms) report.rows.push_back(evaluate_cell(net, subspaces, id_test, ood_test, settings, v, p));
    } else {
      report.rows.push_back(evaluate_cell(net, subspaces, id_test, ood_test, settings, v, std::nullopt));
    }
  }
  if (!report.rows.empty()) {
    report.gamma = report.rows.front().gamma.mean;
    report.fpr95 = report.rows.front().fpr95.mean;
    report.auroc = report.rows.front().auroc.mean;
  }
  return report;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  const SplitSet data = make_datasets(cfg.data);
  TrainLog log;
  const Network net = train_model(cfg, data, &log);
  SubspaceConfig sub = cfg.subspace;
  sub.all_layers = needs_all_layers(cfg);
  const auto subspaces = build_subspaces(net, data.train, sub);
  EvalReport report = evaluate(net, subspaces, data.id_test, data.ood_test, cfg.eval);
  report.training = summarize(log, cfg.train.epochs);
  report.config = to_table(cfg);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["tool"] = "gradorth";
  j["version"] = kVersion;
  j["norm_convention"] = "entrywise";
  j["pseudo_label"] = to_string(report.pseudo_label);
  j["aggregate"] = to_string(report.aggregate);
  j["tpr_target"] = report.tpr;
  j["gamma"] = report.gamma;
  j["fpr95"] = report.fpr95;
  j["auroc"] = report.auroc;
  j["id_samples"] = report.id_samples;
  j["ood_samples"] = report.ood_samples;
  ordered_json rows = ordered_json::array();
  for (const EvalRow& r : report.rows) rows.push_back(row_json(r));
  j["rows"] = std::move(rows);
  ordered_json subs = ordered_json::array();
  for (const SubspaceSummary& s : report.subspaces) {
    subs.push_back({{"seed", s.seed}, {"layer", s.layer}, {"k", s.k}, {"dim", s.dim}});
  }
  j["subspaces"] = std::move(subs);
  if (report.training) {
    const TrainingSummary& t = *report.training;
    j["training"] = {{"epochs", t.epochs},
                     {"initial_loss", t.initial_loss},
                     {"final_loss", t.final_loss},
                     {"train_accuracy", t.train_accuracy},
                     {"loss_monotone", t.loss_monotone}};
  }
  j["config"] = config_json(report.config);
  return j.dump(2) + "\n";
}

void write_report_table_csv(std::ostream& out, const EvalReport& report) {
  out << "method,p,fpr95_pct,auroc_pct,fpr95_pct_var,auroc_pct_var,seeds\n";
  for (const EvalRow& r : report.rows) {
    out << r.method << ',' << (r.norm ? r.norm->str() : "-") << ',' << pct(r.fpr95.mean) << ','
        << pct(r.auroc.mean) << ',' << pct_var(r.fpr95.variance) << ',' << pct_var(r.auroc.variance) << ','
        << r.per_seed.size() << '\n';
  }
}

std::string to_string(Study s) {
  switch (s) {
    case Study::norms:
      return "norms";
    case Study::layers:
      return "layers";
    case Study::nosvd:
      return "nosvd";
    case Study::samples_per_class:
      return "samples_per_class";
  }
  return "norms";
}

Study parse_study(const std::string& text) {
  for (Study s : {Study::norms, Study::layers, Study::nosvd, Study::samples_per_class}) {
    if (to_string(s) == text) return s;
  }
  throw ConfigError("unknown study '" + text + "' (expected norms, layers, nosvd, samples_per_class)");
}

AblationTable run_ablation(Study study, const ExperimentConfig& cfg, const std::vector<std::size_t>& n_list) {
  const SplitSet data = make_datasets(cfg.data);
  const Network net = train_model(cfg, data);
  AblationTable table;
  table.study = study;
  table.config = to_table(cfg);

  EvalSettings settings = cfg.eval;
  // Single-norm studies use L2 when configured, otherwise the first listed order.
  const auto& norms = cfg.eval.norms;
  const NormOrder primary_norm =
      std::find(norms.begin(), norms.end(), NormOrder(2.0)) != norms.end() ? NormOrder(2.0) : norms.front();
  settings.norms = {primary_norm};

  switch (study) {
    case Study::norms: {
      settings.variants = {Variant::last_layer};
      settings.norms = NormOrder::all();
      const auto subs = build_subspaces(net, data.train, cfg.subspace);
      const EvalReport r = evaluate(net, subs, data.id_test, data.ood_test, settings);
      for (const EvalRow& row : r.rows) table.rows.push_back({"L" + row.norm->str(), row});
      break;
    }
    case Study::layers: {
      SubspaceConfig sub = cfg.subspace;
      sub.all_layers = true;
      settings.variants = {Variant::last_layer, Variant::all_layers};
      const auto subs = build_subspaces(net, data.train, sub);
      const EvalReport r = evaluate(net, subs, data.id_test, data.ood_test, settings);
      table.rows.push_back({"last_layer", r.rows[0]});
      table.rows.push_back({"all_layers", r.rows[1]});
      break;
    }
    case Study::nosvd: {
      settings.variants = {Variant::last_layer, Variant::no_svd};
      const auto subs = build_subspaces(net, data.train, cfg.subspace);
      const EvalReport r = evaluate(net, subs, data.id_test, data.ood_test, settings);
      table.rows.push_back({"svd", r.rows[0]});
      table.rows.push_back({"no_svd", r.rows[1]});
      break;
    }
    case Study::samples_per_class: {
      settings.variants = {Variant::last_layer};
      for (std::size_t n : n_list) {
        SubspaceConfig sub = cfg.subspace;
        sub.n_per_class = n;
        const auto subs = build_subspaces(net, data.train, sub);
        const EvalReport r = evaluate(net, subs, data.id_test, data.ood_test, settings);
        EvalRow row = r.rows.front();
        row.method = "GradOrth-S_" + std::to_string(n);
        table.rows.push_back({"S_" + std::to_string(n), row});
      }
      break;
    }
  }
  return table;
}

void write_ablation_csv(std::ostream& out, const AblationTable& table) {
  out << "study,setting,method,p,fpr95_pct,auroc_pct,fpr95_pct_var,auroc_pct_var\n";
  for (const AblationRow& a : table.rows) {
    const EvalRow& r = a.result;
    out << to_string(table.study) << ',' << a.setting << ',' << r.method << ',' << (r.norm ? r.norm->str() : "-")
        << ',' << pct(r.fpr95.mean) << ',' << pct(r.auroc.mean) << ',' << pct_var(r.fpr95.variance) << ','
        << pct_var(r.auroc.variance) << '\n';
  }
}

}  // namespace gradorth
