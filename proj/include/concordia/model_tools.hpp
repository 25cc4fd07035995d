#pragma once

// Conversions between the classic two-rater delta parameters and the
// multi-rater ones, a sampler for the multi-rater model, and a bootstrap
// for the standard errors of the fitted estimates.

#include "concordia/agreement.hpp"
#include "concordia/delta_fit.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace concordia {

enum class Orientation { rows, columns };

// p_ij = [i = j] A_i + (p_i. - A_i) pi_j with A_i = p_i. Delta_i, R = 2.
// In column orientation the roles of the two raters are exchanged:
// row_marginal holds p_.i and pi the chance distribution of rater 1.
struct ClassicDeltaParams {
  Orientation orientation = Orientation::rows;
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd Delta_i;
  Eigen::VectorXd pi;

  Eigen::VectorXd agreements() const { return row_marginal.cwiseProduct(Delta_i); }
  double overall() const { return agreements().sum(); }
};

// p(i1..iR) = [all equal] alpha_i + (1 - Delta) prod_r pi(i_r, r).
struct NewDeltaParams {
  Eigen::VectorXd alpha;
  double Delta = 0.0;
  Eigen::MatrixXd pi;  // K x R

  int categories() const { return static_cast<int>(alpha.size()); }
  int raters() const { return static_cast<int>(pi.cols()); }
};

// Builds parameters with Delta = sum alpha. Throws DataError on a shape
// mismatch, a pi column that is not a distribution, or a negative cell.
NewDeltaParams make_params(Eigen::VectorXd alpha, Eigen::MatrixXd pi);
NewDeltaParams params_of(const DeltaFit& fit);
void validate(const NewDeltaParams& p);
void validate(const ClassicDeltaParams& c);

NewDeltaParams classic_to_new(const ClassicDeltaParams& c);
ClassicDeltaParams new_to_classic(const NewDeltaParams& p,
                                  Orientation orientation = Orientation::rows);
// Column-oriented parameters computed directly from row-oriented ones.
ClassicDeltaParams rows_to_columns(const ClassicDeltaParams& c);

// All K^R cell probabilities in lexicographic profile order.
std::vector<double> cell_probabilities(const NewDeltaParams& p);

RatingMatrix sample_model(const NewDeltaParams& p, int subjects, std::uint64_t seed);

// Multinomial draw of `n` subjects over the K^R cells with probabilities
// `probs` (lexicographic order), by sequential binomials.
JointCountTable sample_table(int categories, int raters, const std::vector<double>& probs,
                             long long n, std::mt19937_64& rng);

// Seed of replicate `index`, independent of the order replicates run in.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index);

enum class BootstrapKind {
  nonparametric,  // resample from the observed cell proportions
  parametric      // resample from the fitted model
};

struct BootstrapOptions {
  int replicates = 2000;
  std::uint64_t seed = 1;
  BootstrapKind kind = BootstrapKind::nonparametric;
  // The original table is summarized at this fit for the parametric kind.
  FitOptions fit;
  // Stop with UnreliableBootstrapError above this fraction of failed refits.
  double max_degenerate_fraction = 0.2;
};

struct BootstrapResult {
  int replicates = 0;
  int degenerate = 0;
  double se_delta = 0.0;
  Eigen::VectorXd se_alpha;
  std::vector<std::optional<double>> se_consistency;
  // One row per successful replicate: Delta, alpha_1..K, S_1..K (NaN where
  // S_i is undefined). For K = R = 2 the starred estimates are used.
  Eigen::MatrixXd samples;
};

BootstrapResult bootstrap_se(const JointCountTable& t, const BootstrapOptions& options = {});

}  // namespace concordia
