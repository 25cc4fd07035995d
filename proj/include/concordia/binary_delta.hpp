#pragma once

// Two raters, two categories. The general model has more parameters than
// free cells here, so the table is embedded in a 3 x 3 table with an empty
// dummy category, smoothed by +0.5 per cell, and fitted as a K = 3 model.
// The estimates for the two real categories are then rescaled to the
// subjects that did not fall into the dummy category.

#include "concordia/agreement.hpp"
#include "concordia/delta_fit.hpp"
#include "concordia/inference.hpp"

#include <array>
#include <optional>
#include <vector>

namespace concordia {

struct BinaryDeltaFit {
  std::array<double, 2> alpha_star{};
  double delta_star = 0.0;
  std::array<double, 2> consistency_star{};
  std::array<std::optional<double>, 2> se_alpha_star;
  std::optional<double> se_delta_star;
  std::array<std::optional<double>, 2> se_consistency_star;
  std::array<double, 2> var_alpha_star{};
  double var_delta_star = 0.0;
  std::array<std::optional<double>, 2> var_consistency_star;
  // Fit and variances of the augmented 3 x 3 table.
  DeltaFit inner;
  InferenceReport inner_variances;
  double p3_dot = 0.0;  // row marginal of the dummy category
  double X3 = 0.0;      // pi_31^2 / (2 pi_31 - 1)
  std::vector<std::string> warnings;
};

// [[a, b], [c, d]] -> [[a+.5, b+.5, .5], [c+.5, d+.5, .5], [.5, .5, .5]].
JointCountTable augment_2x2(const JointCountTable& t);

BinaryDeltaFit fit_binary(const JointCountTable& t, const FitOptions& options = {});

}  // namespace concordia
