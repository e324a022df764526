#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gradorth/dataset.hpp"
#include "gradorth/matrix.hpp"
#include "gradorth/network.hpp"
#include "gradorth/subspace.hpp"

namespace gradorth {

// Entrywise L_p order, restricted to {0.3, 1, 2, 3, 4, inf}.
class NormOrder {
 public:
  constexpr NormOrder() = default;
  explicit NormOrder(double p);

  static NormOrder infinity();
  // Accepts "0.3", "1", "2", "3", "4", "inf".
  static NormOrder parse(const std::string& text);
  static std::vector<NormOrder> all();

  double value() const noexcept { return p_; }
  bool is_infinity() const noexcept;
  std::string str() const;

  friend bool operator==(NormOrder, NormOrder) = default;

 private:
  double p_ = 2.0;
};

enum class Variant { last_layer, all_layers, no_svd, msp, energy };
enum class PseudoLabel { uniform, predicted_onehot, mse_zero };

std::string to_string(Variant v);
std::string to_string(PseudoLabel p);
Variant parse_variant(const std::string& text);
PseudoLabel parse_pseudo_label(const std::string& text);
// Gradient-based variants use the norm order and (except no_svd) subspaces.
bool uses_gradient(Variant v);
bool uses_subspace(Variant v);

struct ScoreConfig {
  NormOrder norm{2.0};
  Variant variant = Variant::last_layer;
  PseudoLabel pseudo_label = PseudoLabel::uniform;
  // Worker threads for score_batch; results do not depend on this.
  std::size_t threads = 1;
};

struct ScoredSample {
  std::size_t sample_id = 0;
  double score = 0.0;
  Variant variant = Variant::last_layer;
  NormOrder norm{2.0};
  std::uint64_t subspace_seed = 0;
};

// grad * S * S^T: each gradient row projected onto span(S).
Matrix project(const Matrix& grad, const Matrix& basis);
Matrix project(const Matrix& grad, const Subspace& sub);

// (sum |e|^p)^(1/p) over all entries, or max |e| for p = inf.
double entrywise_norm(const Matrix& m, NormOrder p);

double ood_score(const Matrix& grad, const Subspace& sub, NormOrder p);

enum class Decision { id, ood };
// ID iff score >= gamma.
Decision detect(double score, double gamma);

// Target vector and loss the inference-time gradient is taken against.
Vector pseudo_target(std::span<const double> logits, PseudoLabel label);
Loss pseudo_loss(Loss network_loss, PseudoLabel label);

// Layer gradient laid out with one row per output unit, so its rows live in
// the layer's representation space: dense gradients as-is, conv gradients transposed.
Matrix oriented_gradient(const LayerSpec& spec, const Matrix& grad);

// Scores every sample of `samples` under every subspace seed present in
// `subspaces` (one subspace per (seed, layer)). Variants that ignore subspaces
// still emit one row per seed, or a single seed-0 row when none are given.
// Rows are sample-major, seeds ascending.
std::vector<ScoredSample> score_batch(const Network& net, const std::vector<Subspace>& subspaces,
                                      const DatasetSplit& samples, const ScoreConfig& config);

// Header: sample_id,variant,p,subspace_seed,score
void write_scores_csv(std::ostream& out, const std::vector<ScoredSample>& rows);

}  // namespace gradorth
