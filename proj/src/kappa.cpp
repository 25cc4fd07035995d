#include "concordia/kappa.hpp"

#include "concordia/errors.hpp"

#include <cmath>

namespace concordia {

namespace {

// Below this, 1 - I_e is treated as zero (all raters pinned to one category).
constexpr double kDegenerateDenominator = 1e-14;

KappaResult chance_corrected(KappaKind kind, double observed, double expected,
                             KappaComponents components) {
  KappaResult out;
  out.kind = kind;
  out.observed_index = observed;
  out.expected_index = expected;
  out.components = components;
  const double denom = 1.0 - expected;
  if (std::abs(denom) <= kDegenerateDenominator) {
    out.undefined_reason = "undefined: degenerate marginals (expected agreement index is 1)";
    return out;
  }
  out.value = 1.0 - (1.0 - observed) / denom;
  return out;
}

double sum_squared_rater_counts(const AgreementSummary& s) {
  double total = 0.0;
  for (int i = 0; i < s.categories; ++i) {
    for (int w = 1; w <= s.raters; ++w) {
      total += static_cast<double>(w) * w * s.rater_count_histogram(i, w);
    }
  }
  return total;
}

}  // namespace

std::string_view to_string(KappaKind kind) {
  switch (kind) {
    case KappaKind::raw: return "raw";
    case KappaKind::cohen: return "cohen";
    case KappaKind::fleiss: return "fleiss";
    case KappaKind::hubert_r_wise: return "hubert_r_wise";
    case KappaKind::hubert_pairwise: return "hubert_pairwise";
  }
  return "unknown";
}

KappaResult raw_agreement(const AgreementSummary& s) {
  KappaResult out;
  out.kind = KappaKind::raw;
  out.observed_index = s.p_total;
  out.value = s.p_total;
  out.components.observed_agreements = s.n * s.p_total;
  out.components.max_agreements = s.n;
  return out;
}

KappaResult cohen_kappa(const AgreementSummary& s) {
  if (s.raters != 2) {
    throw DataError("Cohen's kappa needs exactly 2 raters, got " + std::to_string(s.raters));
  }
  const double expected = s.t.col(0).dot(s.t.col(1));
  KappaComponents c;
  c.observed_agreements = s.n * s.p_total;
  c.max_agreements = s.n;
  c.expected_agreements = s.n * expected;
  return chance_corrected(KappaKind::cohen, s.p_total, expected, c);
}

KappaResult hubert_r_wise_kappa(const AgreementSummary& s) {
  const double expected = s.t.rowwise().prod().sum();
  KappaComponents c;
  c.observed_agreements = s.n * s.p_total;
  c.max_agreements = s.n;
  c.expected_agreements = s.n * expected;
  return chance_corrected(KappaKind::hubert_r_wise, s.p_total, expected, c);
}

KappaResult fleiss_kappa(const AgreementSummary& s) {
  const double R = s.raters;
  const double n = s.n;
  const double ss = sum_squared_rater_counts(s);
  // Share of all n*R responses falling in category i.
  const double shares = (s.R_dot / (n * R)).squaredNorm();
  const double max_pairs = n * R * (R - 1.0) / 2.0;
  KappaComponents c;
  c.sum_squared_rater_counts = ss;
  c.sum_squared_response_shares = shares;
  c.observed_agreements = (ss - n * R) / 2.0;
  c.max_agreements = max_pairs;
  c.expected_agreements = max_pairs * shares;
  const double observed = (ss - n * R) / (n * R * (R - 1.0));
  return chance_corrected(KappaKind::fleiss, observed, shares, c);
}

KappaResult hubert_pairwise_kappa(const AgreementSummary& s) {
  const double R = s.raters;
  const double n = s.n;
  const double ss = sum_squared_rater_counts(s);
  double cross = 0.0;
  for (int i = 0; i < s.categories; ++i) {
    for (int r = 0; r < s.raters; ++r) {
      for (int q = r + 1; q < s.raters; ++q) cross += s.t(i, r) * s.t(i, q);
    }
  }
  const double pairs = R * (R - 1.0);
  KappaComponents c;
  c.sum_squared_rater_counts = ss;
  c.observed_agreements = (ss - n * R) / 2.0;
  c.max_agreements = n * pairs / 2.0;
  c.expected_agreements = n * cross;
  const double observed = (ss / n - R) / pairs;
  return chance_corrected(KappaKind::hubert_pairwise, observed, 2.0 * cross / pairs, c);
}

KappaResult per_category_kappa(const JointCountTable& t, int category, KappaKind kind) {
  const auto collapsed = summarize(collapse_category(t, category));
  switch (kind) {
    case KappaKind::cohen: return cohen_kappa(collapsed);
    case KappaKind::hubert_r_wise: return hubert_r_wise_kappa(collapsed);
    default:
      throw DataError("per-category kappa supports cohen or hubert_r_wise, not " +
                      std::string(to_string(kind)));
  }
}

}  // namespace concordia
