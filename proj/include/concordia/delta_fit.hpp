#pragma once

// Maximum-likelihood fit of the multi-rater delta model
//
//   p(i1..iR) = [i1 = .. = iR] alpha_{i1} + (1 - Delta) prod_r pi_{i_r r}
//
// The likelihood equations reduce to one unknown B = 1 - Delta plus one
// lambda_i per category:
//
//   prod_r (lambda_i + d_ir) = B^(R-1) lambda_i      (lambda_i = 0 if some d_ir = 0)
//   g(B) = sum_i lambda_i - B + D = 0
//
// Each lambda equation has a low and a high root. The solver scans a grid
// in B for every branch (choice of root per category), refines each sign
// change of g, and keeps the candidate with the largest profile
// log-likelihood.

#include "concordia/agreement.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace concordia {

enum class RootBranch : signed char { none = -1, low = 0, high = 1 };

struct FitOptions {
  int grid_points = 512;
  double b_cap = 1e3;
  double g_tolerance = 1e-11;
  // Try every 2^K' combination of roots instead of only the all-low branch
  // and the K' single-high branches. A valid solution never has two
  // categories on the high root, so both give the same answer; the full
  // enumeration is kept as a cross-check.
  bool exhaustive_branches = false;
  // Used by fit_delta(JointCountTable) only.
  bool smooth_on_failure = true;
  bool force_smoothing = false;
  double smoothing_increment = 0.5;
  std::size_t max_cells = kDefaultMaxDenseCells;
};

struct FitCandidate {
  double B = 0.0;
  Eigen::VectorXd lambda;
  std::vector<RootBranch> branch;
  double log_likelihood = 0.0;
  double g_residual = 0.0;
};

struct FitDiagnostics {
  std::vector<RootBranch> branch;
  double g_residual = 0.0;
  bool smoothing_applied = false;
  // D = 0: every subject was rated unanimously, B = 0 and Delta = 1.
  bool perfect_agreement = false;
  // The unsmoothed data had no feasible root below b_cap.
  bool degenerate = false;
  std::vector<FitCandidate> candidates;
};

struct DeltaFit {
  double B = 0.0;
  Eigen::VectorXd lambda;
  Eigen::VectorXd alpha;
  double delta_total = 0.0;
  // K x R. When B = 0 the chance distributions are not identified and this
  // holds the observed marginals instead.
  Eigen::MatrixXd pi;
  std::vector<std::optional<double>> consistency;
  double I_pi = 0.0;
  FitDiagnostics diagnostics;
  // Summary of the table that was actually fitted (the smoothed one when
  // smoothing was applied).
  AgreementSummary summary;
};

// Nonnegative roots of prod_r (lambda + d_r) = B^(R-1) lambda, ascending.
// Requires B > 0 and every d_r > 0. Empty when B is below the category's
// feasibility threshold.
std::vector<double> lambda_roots(double B, const Eigen::Ref<const Eigen::VectorXd>& d);

// Smallest B at which the category with disagreement vector d has a root.
double feasibility_threshold(const Eigen::Ref<const Eigen::VectorXd>& d);

// g(B) for a branch vector (one entry per category; entries for categories
// with a zero disagreement are ignored). Empty when some category has no
// root at B or an implied pi lies outside [0, 1].
std::optional<double> g_of_B(double B, const std::vector<RootBranch>& branch,
                             const AgreementSummary& s);

// f = -(R-1) D log B + sum_ir d_ir log(lambda_i + d_ir). Throws DataError for
// an infeasible candidate (B <= 0 or a negative lambda).
double profile_log_likelihood(double B, const Eigen::Ref<const Eigen::VectorXd>& lambda,
                              const AgreementSummary& s);

// S_i = R alpha_i / N_i; empty for a category nobody used.
std::vector<std::optional<double>> consistencies(const Eigen::VectorXd& alpha,
                                                 const AgreementSummary& s);

// Fits the summary as given. Throws DegenerateFitError when no feasible
// root exists. Rejects R = K = 2, which needs fit_binary.
DeltaFit fit_delta(const AgreementSummary& s, const FitOptions& options = {});

// Fits the table, retrying on the smoothed table when the raw fit is
// degenerate (if options.smooth_on_failure).
DeltaFit fit_delta(const JointCountTable& t, const FitOptions& options = {});

}  // namespace concordia
