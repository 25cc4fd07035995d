#pragma once

// Delta-method variances of the delta estimators, Wald bounds, and the
// chi-square goodness-of-fit test.

#include "concordia/agreement.hpp"
#include "concordia/delta_fit.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace concordia {

struct VarianceOptions {
  // Compute on the smoothed data even when the fit is interior.
  bool force_smoothing = false;
  double smoothing_increment = 0.5;
  FitOptions fit;
};

struct InferenceReport {
  double var_delta = 0.0;
  std::optional<double> se_delta;  // empty when the variance is negative
  Eigen::VectorXd var_alpha;
  std::vector<std::optional<double>> se_alpha;
  std::vector<std::optional<double>> var_consistency;  // empty for N_i = 0
  std::vector<std::optional<double>> se_consistency;
  Eigen::VectorXd X_cat;
  double X_total = 0.0;
  // The variances were evaluated on the smoothed data, refitted there.
  bool smoothing_applied = false;
  // Sample size the variances use (the smoothed total when smoothed).
  double n = 0.0;
  // The fit the variance formulas were evaluated at.
  DeltaFit evaluated_at;
  std::vector<std::string> warnings;
};

// Variances at `fit`, whose summary is the data being analysed. When some
// pi is 0 or 1, or B = 0, the data are smoothed by +increment per cell and
// refitted first.
InferenceReport estimate_variances(const DeltaFit& fit, const VarianceOptions& options = {});

// The raw formulas at a given interior fit, with no smoothing logic.
// Throws SingularVarianceError if (R-1) X = 1 or some X_i is infinite.
InferenceReport delta_method_variances(const DeltaFit& fit);

enum class Sidedness { two_sided, lower, upper };

struct Bound {
  double estimate = 0.0;
  std::optional<double> se;
  // -inf / +inf on the open side of a one-sided bound; empty without an SE.
  std::optional<double> lower;
  std::optional<double> upper;
};

// Estimate -/+ z se; the open side of a one-sided bound is infinite.
Bound wald_bound(double estimate, std::optional<double> se, double z, Sidedness sidedness);

// z for a two-sided or one-sided Wald bound at `level`.
double critical_value(double level, Sidedness sidedness);

struct ConfidenceBounds {
  double level = 0.95;
  Sidedness sidedness = Sidedness::two_sided;
  double z = 0.0;
  Bound delta;
  std::vector<Bound> alpha;
  std::vector<std::optional<Bound>> consistency;  // empty where S_i is undefined
};

// Wald bounds estimate -/+ z SE around the estimates of `fit`, using the SEs
// in `report`. Bounds are not truncated to the parameter space.
ConfidenceBounds confidence_bounds(const InferenceReport& report, const DeltaFit& fit,
                                   double level, Sidedness sidedness);

struct GofResult {
  double chi_square = 0.0;  // +inf when incompatible
  int df = 0;
  std::optional<double> p_value;
  int cells = 0;
  int cells_expected_lt_1 = 0;
  int cells_expected_le_5 = 0;
  bool reliability_warning = false;
  // Some cell has expected count 0 but a positive observed count.
  bool incompatible = false;
};

// df = (K^R - 1) - K - R(K - 1); throws SaturatedModelError when df <= 0.
int gof_degrees_of_freedom(int categories, int raters);

// Pearson chi-square of the table against the expected cells of `fit`.
GofResult goodness_of_fit(const DeltaFit& fit, const JointCountTable& t,
                          std::size_t max_cells = kDefaultMaxDenseCells);

}  // namespace concordia
