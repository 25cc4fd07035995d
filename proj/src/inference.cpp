#include "concordia/inference.hpp"

#include "concordia/distributions.hpp"
#include "concordia/errors.hpp"

#include <cmath>
#include <limits>

namespace concordia {

namespace {

std::optional<double> root_of(double variance) {
  if (variance >= 0.0) return std::sqrt(variance);
  return std::nullopt;
}

bool on_boundary(const DeltaFit& fit) {
  if (!(fit.B > 0.0)) return true;
  return (fit.pi.array() <= 0.0).any() || (fit.pi.array() >= 1.0).any();
}

}  // namespace

Bound wald_bound(double estimate, std::optional<double> se, double z, Sidedness sidedness) {
  Bound b;
  b.estimate = estimate;
  b.se = se;
  if (!se) return b;
  const double inf = std::numeric_limits<double>::infinity();
  b.lower = sidedness == Sidedness::upper ? -inf : estimate - z * *se;
  b.upper = sidedness == Sidedness::lower ? inf : estimate + z * *se;
  return b;
}

double critical_value(double level, Sidedness sidedness) {
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  return normal_quantile(sidedness == Sidedness::two_sided ? 0.5 + level / 2.0 : level);
}

InferenceReport delta_method_variances(const DeltaFit& fit) {
  const AgreementSummary& s = fit.summary;
  const int K = s.categories;
  const int R = s.raters;
  const double n = s.n;
  const double Delta = fit.delta_total;
  const double B = 1.0 - Delta;

  InferenceReport rep;
  rep.n = n;
  rep.X_cat.resize(K);
  for (int i = 0; i < K; ++i) {
    const double inv = (1.0 / fit.pi.row(i).array()).sum() - 1.0 / fit.pi.row(i).prod();
    if (!(std::abs(inv) > 0.0) || !std::isfinite(inv)) {
      throw SingularVarianceError("X_" + std::to_string(i + 1) +
                                  " is undefined (sum 1/pi - 1/prod pi = 0)");
    }
    rep.X_cat(i) = 1.0 / inv;
  }
  rep.X_total = rep.X_cat.sum();
  const double denom = (R - 1) * rep.X_total - 1.0;
  if (denom == 0.0 || !std::isfinite(denom)) {
    throw SingularVarianceError("(R-1) X - 1 = 0 in the delta-method variances");
  }

  rep.var_delta = B / n * (Delta + rep.X_total / denom);
  rep.se_delta = root_of(rep.var_delta);

  rep.var_alpha.resize(K);
  rep.se_alpha.resize(static_cast<std::size_t>(K));
  rep.var_consistency.resize(static_cast<std::size_t>(K));
  rep.se_consistency.resize(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) {
    const double a = fit.alpha(i);
    const double Xi = rep.X_cat(i);
    rep.var_alpha(i) = (a * (1.0 - a) + B * Xi * ((R - 1) * Xi / denom - 1.0)) / n;
    rep.se_alpha[i] = root_of(rep.var_alpha(i));

    const double Ni = s.N_cat(i);
    if (!(Ni > 0.0) || !fit.consistency[i]) continue;
    const double S = *fit.consistency[i];
    const double sum = fit.pi.row(i).sum();
    const double sum_sq = fit.pi.row(i).squaredNorm();
    const double bracket = n * rep.var_alpha(i) - a * (1.0 - a) +
                           a * (1.0 - S) * (1.0 - (R - 1.0) / R * S) +
                           B * S * S / (R * R) * (sum * sum - sum_sq);
    rep.var_consistency[i] = R * R / (n * Ni * Ni) * bracket;
    rep.se_consistency[i] = root_of(*rep.var_consistency[i]);
  }

  if (!rep.se_delta) rep.warnings.push_back("negative variance estimate for Delta");
  for (int i = 0; i < K; ++i) {
    if (!rep.se_alpha[i]) {
      rep.warnings.push_back("negative variance estimate for alpha_" + std::to_string(i + 1));
    }
    if (rep.var_consistency[i] && !rep.se_consistency[i]) {
      rep.warnings.push_back("negative variance estimate for S_" + std::to_string(i + 1));
    }
  }
  rep.evaluated_at = fit;
  return rep;
}

InferenceReport estimate_variances(const DeltaFit& fit, const VarianceOptions& options) {
  const bool already_smoothed = fit.diagnostics.smoothing_applied;
  const bool smooth = !already_smoothed && (options.force_smoothing || on_boundary(fit));
  if (!smooth) {
    InferenceReport rep = delta_method_variances(fit);
    rep.smoothing_applied = already_smoothed;
    return rep;
  }
  const auto smoothed = smooth_summary(fit.summary, options.smoothing_increment);
  DeltaFit refit = fit_delta(smoothed, options.fit);
  refit.diagnostics.smoothing_applied = true;
  InferenceReport rep = delta_method_variances(refit);
  rep.smoothing_applied = true;
  return rep;
}

ConfidenceBounds confidence_bounds(const InferenceReport& report, const DeltaFit& fit,
                                   double level, Sidedness sidedness) {
  ConfidenceBounds out;
  out.level = level;
  out.sidedness = sidedness;
  out.z = critical_value(level, sidedness);
  out.delta = wald_bound(fit.delta_total, report.se_delta, out.z, sidedness);
  const auto K = static_cast<std::size_t>(fit.alpha.size());
  for (std::size_t i = 0; i < K; ++i) {
    out.alpha.push_back(wald_bound(fit.alpha(static_cast<Eigen::Index>(i)), report.se_alpha[i], out.z,
                             sidedness));
    if (fit.consistency[i]) {
      out.consistency.emplace_back(
          wald_bound(*fit.consistency[i], report.se_consistency[i], out.z, sidedness));
    } else {
      out.consistency.emplace_back();
    }
  }
  return out;
}

int gof_degrees_of_freedom(int categories, int raters) {
  const double cells = std::pow(static_cast<double>(categories), raters);
  const double df = (cells - 1.0) - categories - static_cast<double>(raters) * (categories - 1);
  if (df <= 0.0) {
    throw SaturatedModelError("goodness of fit has no degrees of freedom for K = " +
                              std::to_string(categories) + ", R = " + std::to_string(raters));
  }
  if (df > std::numeric_limits<int>::max()) throw DataError("degrees of freedom overflow");
  return static_cast<int>(df);
}

GofResult goodness_of_fit(const DeltaFit& fit, const JointCountTable& t, std::size_t max_cells) {
  const int K = t.categories();
  const int R = t.raters();
  if (fit.alpha.size() != K || fit.pi.cols() != R) {
    throw DataError("fit and table dimensions differ");
  }
  require_dense_bound(t, max_cells);
  GofResult out;
  out.df = gof_degrees_of_freedom(K, R);
  const double n = t.total();
  const double B = fit.B;
  double chi = 0.0;
  for_each_profile(K, R, [&](const Profile& p) {
    double chance = B;
    bool unanimous = true;
    for (int r = 0; r < R; ++r) {
      chance *= fit.pi(p[r], r);
      unanimous = unanimous && p[r] == p[0];
    }
    const double expected = (unanimous ? fit.alpha(p[0]) : 0.0) + chance;
    const double observed = t.count(p) / n;
    ++out.cells;
    if (n * expected < 1.0) ++out.cells_expected_lt_1;
    if (n * expected <= 5.0) ++out.cells_expected_le_5;
    if (expected <= 0.0) {
      if (observed > 0.0) out.incompatible = true;
      return;
    }
    const double diff = observed - expected;
    chi += diff * diff / expected;
  });
  out.reliability_warning = out.cells_expected_le_5 > 0;
  if (out.incompatible) {
    out.chi_square = std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
  } else {
    out.chi_square = n * chi;
    out.p_value = chi_square_tail(out.chi_square, out.df);
  }
  return out;
}

}  // namespace concordia
