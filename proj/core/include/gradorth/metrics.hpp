#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gradorth {

inline constexpr double kDefaultTpr = 0.95;

// Largest gamma with |{s >= gamma}| / n >= tpr_target. Always one of the ID
// scores; ties at gamma count as ID.
double calibrate_gamma(std::span<const double> id_scores, double tpr_target = kDefaultTpr);

// Fraction of OOD scores >= calibrate_gamma(id_scores, tpr_target).
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target = kDefaultTpr);

// Mann-Whitney statistic P(id > ood) + P(id == ood) / 2, with ID as the positive class.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct MeanVariance {
  double mean = 0.0;
  // Sample variance (n - 1 denominator); 0 for a single value.
  double variance = 0.0;
};

MeanVariance mean_variance(std::span<const double> values);

}  // namespace gradorth
