#include "gradorth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "gradorth/error.hpp"

namespace gradorth {

namespace {

void require_non_empty(std::span<const double> v, const char* what) {
  if (v.empty()) throw Error(std::string(what) + ": empty score list");
}

void require_tpr(double tpr) {
  if (!(tpr > 0.0 && tpr <= 1.0)) throw ConfigError("tpr target must lie in (0, 1]");
}

}  // namespace

double calibrate_gamma(std::span<const double> id_scores, double tpr_target) {
  require_non_empty(id_scores, "calibrate_gamma");
  require_tpr(tpr_target);
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  // sorted[j - 1] has at least j scores >= it; pick the smallest such j meeting the target.
  for (std::size_t j = 1; j <= sorted.size(); ++j) {
    if (static_cast<double>(j) / n >= tpr_target) return sorted[j - 1];
  }
  return sorted.back();
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr_target) {
  require_non_empty(ood_scores, "fpr_at_tpr");
  const double gamma = calibrate_gamma(id_scores, tpr_target);
  const auto positives = std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s >= gamma; });
  return static_cast<double>(positives) / static_cast<double>(ood_scores.size());
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_non_empty(id_scores, "auroc");
  require_non_empty(ood_scores, "auroc");
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end());
  // Integer pair counts keep the result exact for any list size below 2^53 pairs.
  unsigned long long greater = 0;
  unsigned long long ties = 0;
  for (double s : id_scores) {
    const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
    const auto hi = std::upper_bound(lo, ood.end(), s);
    greater += static_cast<unsigned long long>(lo - ood.begin());
    ties += static_cast<unsigned long long>(hi - lo);
  }
  const double pairs = static_cast<double>(id_scores.size()) * static_cast<double>(ood.size());
  return (static_cast<double>(greater) + 0.5 * static_cast<double>(ties)) / pairs;
}

MeanVariance mean_variance(std::span<const double> values) {
  MeanVariance out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.variance = ss / static_cast<double>(values.size() - 1);
  }
  return out;
}

}  // namespace gradorth
