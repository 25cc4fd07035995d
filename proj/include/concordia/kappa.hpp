#pragma once

// Raw agreement and the kappa family. Every coefficient is written in the
// common form 1 - (1 - I_o) / (1 - I_e); when 1 - I_e vanishes the result is
// "undefined" (empty value plus a reason) rather than NaN.

#include "concordia/agreement.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace concordia {

enum class KappaKind { raw, cohen, fleiss, hubert_r_wise, hubert_pairwise };

std::string_view to_string(KappaKind kind);

// Intermediates of the agreement-count forms. Which ones are set depends on
// the coefficient.
struct KappaComponents {
  std::optional<double> observed_agreements;   // A_o
  std::optional<double> max_agreements;        // Max(A_o)
  std::optional<double> expected_agreements;   // E(A_o) under independent raters
  std::optional<double> sum_squared_rater_counts;    // sum_s sum_i R_si^2
  std::optional<double> sum_squared_response_shares; // sum_i R_i^2
};

struct KappaResult {
  KappaKind kind = KappaKind::raw;
  std::optional<double> value;
  double observed_index = 0.0;
  std::optional<double> expected_index;
  KappaComponents components;
  std::string undefined_reason;

  bool defined() const { return value.has_value(); }
};

KappaResult raw_agreement(const AgreementSummary& s);

// Requires R = 2.
KappaResult cohen_kappa(const AgreementSummary& s);

// DeMoivre agreement: all R raters coincide.
KappaResult hubert_r_wise_kappa(const AgreementSummary& s);

KappaResult fleiss_kappa(const AgreementSummary& s);

// Pairwise agreement.
KappaResult hubert_pairwise_kappa(const AgreementSummary& s);

// Collapses the table on `category` ("is i" vs "not i") and applies `kind`,
// which must be cohen (R = 2) or hubert_r_wise.
KappaResult per_category_kappa(const JointCountTable& t, int category, KappaKind kind);

}  // namespace concordia
