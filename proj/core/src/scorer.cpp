#include "gradorth/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "gradorth/error.hpp"
#include "gradorth/matrix_io.hpp"

namespace gradorth {

namespace {

constexpr double kAllowedOrders[] = {0.3, 1.0, 2.0, 3.0, 4.0};

using SeedLayers = std::map<std::size_t, const Subspace*>;

double score_one(const Network& net, std::span<const double> x, const SeedLayers* layers,
                 const ScoreConfig& cfg) {
  const ForwardResult fwd = forward(net, x);
  switch (cfg.variant) {
    case Variant::msp: {
      const Vector probs = softmax_probs(fwd.logits);
      return *std::max_element(probs.begin(), probs.end());
    }
    case Variant::energy:
      return log_sum_exp(fwd.logits);
    case Variant::no_svd:
    case Variant::last_layer: {
      const Vector target = pseudo_target(fwd.logits, cfg.pseudo_label);
      const Loss loss = pseudo_loss(net.loss(), cfg.pseudo_label);
      const Matrix grad = outer(output_error(loss, fwd.logits, target), fwd.reps.back());
      if (cfg.variant == Variant::no_svd) return entrywise_norm(grad, cfg.norm);
      return ood_score(grad, *layers->at(net.last_layer_index()), cfg.norm);
    }
    case Variant::all_layers: {
      const Vector target = pseudo_target(fwd.logits, cfg.pseudo_label);
      const Loss loss = pseudo_loss(net.loss(), cfg.pseudo_label);
      const GradientRecord rec = all_layer_gradients(net, x, target, loss);
      double total = 0.0;
      for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const Matrix g = oriented_gradient(net.layer(l).spec, rec.gradients[l]);
        total += ood_score(g, *layers->at(l), cfg.norm);
      }
      return total / static_cast<double>(net.num_layers());
    }
  }
  return 0.0;
}

}  // namespace

NormOrder::NormOrder(double p) : p_(p) {
  const bool allowed = (std::isinf(p) && p > 0) ||
                       std::find(std::begin(kAllowedOrders), std::end(kAllowedOrders), p) !=
                           std::end(kAllowedOrders);
  if (!allowed) throw ConfigError("norm order must be one of 0.3, 1, 2, 3, 4, inf; got " + format_double(p));
}

NormOrder NormOrder::infinity() { return NormOrder(std::numeric_limits<double>::infinity()); }

NormOrder NormOrder::parse(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "max") return infinity();
  double p = 0.0;
  try {
    p = parse_double(text);
  } catch (const Error&) {
    throw ConfigError("bad norm order '" + text + "'");
  }
  return NormOrder(p);
}

std::vector<NormOrder> NormOrder::all() {
  std::vector<NormOrder> out;
  for (double p : kAllowedOrders) out.emplace_back(p);
  out.push_back(infinity());
  return out;
}

bool NormOrder::is_infinity() const noexcept { return std::isinf(p_); }

std::string NormOrder::str() const { return format_double(p_); }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::last_layer:
      return "last_layer";
    case Variant::all_layers:
      return "all_layers";
    case Variant::no_svd:
      return "no_svd";
    case Variant::msp:
      return "msp";
    case Variant::energy:
      return "energy";
  }
  return "last_layer";
}

std::string to_string(PseudoLabel p) {
  switch (p) {
    case PseudoLabel::uniform:
      return "uniform";
    case PseudoLabel::predicted_onehot:
      return "predicted_onehot";
    case PseudoLabel::mse_zero:
      return "mse_zero";
  }
  return "uniform";
}

Variant parse_variant(const std::string& text) {
  for (Variant v : {Variant::last_layer, Variant::all_layers, Variant::no_svd, Variant::msp, Variant::energy}) {
    if (to_string(v) == text) return v;
  }
  throw ConfigError("unknown variant '" + text + "' (expected last_layer, all_layers, no_svd, msp, energy)");
}

PseudoLabel parse_pseudo_label(const std::string& text) {
  for (PseudoLabel p : {PseudoLabel::uniform, PseudoLabel::predicted_onehot, PseudoLabel::mse_zero}) {
    if (to_string(p) == text) return p;
  }
  throw ConfigError("unknown pseudo label '" + text + "' (expected uniform, predicted_onehot, mse_zero)");
}

bool uses_gradient(Variant v) {
  return v == Variant::last_layer || v == Variant::all_layers || v == Variant::no_svd;
}

bool uses_subspace(Variant v) { return v == Variant::last_layer || v == Variant::all_layers; }

Matrix project(const Matrix& grad, const Matrix& basis) {
  if (grad.cols() != basis.rows()) {
    throw DimensionError("project: gradient " + grad.shape_string() + " vs basis " + basis.shape_string());
  }
  return matmul_transposed_rhs(matmul(grad, basis), basis);
}

Matrix project(const Matrix& grad, const Subspace& sub) { return project(grad, sub.basis); }

double entrywise_norm(const Matrix& m, NormOrder p) {
  const auto data = m.data();
  if (p.is_infinity()) {
    double mx = 0.0;
    for (double v : data) mx = std::max(mx, std::abs(v));
    return mx;
  }
  const double order = p.value();
  if (order == 2.0) return frobenius_norm(m);
  if (order == 1.0) {
    double s = 0.0;
    for (double v : data) s += std::abs(v);
    return s;
  }
  double s = 0.0;
  for (double v : data) s += std::pow(std::abs(v), order);
  return std::pow(s, 1.0 / order);
}

double ood_score(const Matrix& grad, const Subspace& sub, NormOrder p) {
  return entrywise_norm(project(grad, sub), p);
}

Decision detect(double score, double gamma) { return score >= gamma ? Decision::id : Decision::ood; }

Vector pseudo_target(std::span<const double> logits, PseudoLabel label) {
  const std::size_t m = logits.size();
  switch (label) {
    case PseudoLabel::uniform:
      return Vector(m, 1.0 / static_cast<double>(m));
    case PseudoLabel::predicted_onehot:
      return one_hot(argmax(logits), m);
    case PseudoLabel::mse_zero:
      return Vector(m, 0.0);
  }
  return Vector(m, 0.0);
}

Loss pseudo_loss(Loss network_loss, PseudoLabel label) {
  return label == PseudoLabel::mse_zero ? Loss::mse : network_loss;
}

Matrix oriented_gradient(const LayerSpec& spec, const Matrix& grad) {
  return spec.kind == LayerKind::conv ? grad.transposed() : grad;
}

std::vector<ScoredSample> score_batch(const Network& net, const std::vector<Subspace>& subspaces,
                                      const DatasetSplit& samples, const ScoreConfig& config) {
  if (!net.frozen()) throw StateError("score_batch: network must be frozen");
  std::map<std::uint64_t, SeedLayers> by_seed;
  for (const Subspace& sub : subspaces) {
    if (sub.layer_index >= net.num_layers()) {
      throw DimensionError("score_batch: subspace for layer " + std::to_string(sub.layer_index) +
                           " but network has " + std::to_string(net.num_layers()) + " layers");
    }
    auto& layers = by_seed[sub.seed];
    if (!layers.emplace(sub.layer_index, &sub).second) {
      throw ConfigError("score_batch: duplicate subspace for seed " + std::to_string(sub.seed) + ", layer " +
                        std::to_string(sub.layer_index));
    }
  }
  if (uses_subspace(config.variant)) {
    if (by_seed.empty()) throw ConfigError("score_batch: variant " + to_string(config.variant) + " needs subspaces");
    for (const auto& [seed, layers] : by_seed) {
      const std::size_t first = config.variant == Variant::all_layers ? 0 : net.last_layer_index();
      for (std::size_t l = first; l < net.num_layers(); ++l) {
        if (!layers.count(l)) {
          throw ConfigError("score_batch: variant " + to_string(config.variant) + " needs a subspace for layer " +
                            std::to_string(l) + " (seed " + std::to_string(seed) + ")");
        }
      }
    }
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& entry : by_seed) seeds.push_back(entry.first);
  if (seeds.empty()) seeds.push_back(0);

  const std::size_t n = samples.size();
  std::vector<ScoredSample> rows(n * seeds.size());
  std::vector<std::exception_ptr> failures(std::max<std::size_t>(1, config.threads));
  auto work = [&](std::size_t slot, std::size_t begin, std::size_t end) {
    try {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto it = by_seed.find(seeds[s]);
        const SeedLayers* layers = it == by_seed.end() ? nullptr : &it->second;
        const double score = score_one(net, samples.sample(i), layers, config);
        rows[i * seeds.size() + s] = ScoredSample{i, score, config.variant, config.norm, seeds[s]};
      }
    }
    } catch (...) {
      failures[slot] = std::current_exception();
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, n));
  if (threads == 1) {
    work(0, 0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, t, b, e);
    }
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  for (const ScoredSample& row : rows) {
    if (!std::isfinite(row.score)) {
      throw NumericError("score_batch: non-finite score for sample " + std::to_string(row.sample_id));
    }
  }
  return rows;
}

void write_scores_csv(std::ostream& out, const std::vector<ScoredSample>& rows) {
  out << "sample_id,variant,p,subspace_seed,score\n";
  for (const ScoredSample& r : rows) {
    out << r.sample_id << ',' << to_string(r.variant) << ',' << r.norm.str() << ',' << r.subspace_seed << ','
        << format_double(r.score) << '\n';
  }
}

}  // namespace gradorth
