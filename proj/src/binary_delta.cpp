#include "concordia/binary_delta.hpp"

#include "concordia/errors.hpp"

#include <cmath>

namespace concordia {

namespace {

void require_binary(const JointCountTable& t) {
  if (t.categories() != 2 || t.raters() != 2) {
    throw DataError("the dummy-category procedure needs K = 2 and R = 2, got K = " +
                    std::to_string(t.categories()) + ", R = " + std::to_string(t.raters()));
  }
}

std::optional<double> root_of(double v) {
  if (v >= 0.0) return std::sqrt(v);
  return std::nullopt;
}

}  // namespace

JointCountTable augment_2x2(const JointCountTable& t) {
  require_binary(t);
  std::map<Profile, double> cells;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double x = i < 2 && j < 2 ? t.count({i, j}) : 0.0;
      cells[{i, j}] = x + 0.5;
    }
  }
  std::vector<std::string> names = t.category_names();
  if (names.size() == 2) names.push_back("dummy");
  return JointCountTable(3, 2, std::move(cells), std::move(names));
}

BinaryDeltaFit fit_binary(const JointCountTable& t, const FitOptions& options) {
  const JointCountTable aug = augment_2x2(t);
  BinaryDeltaFit out;
  out.inner = fit_delta(summarize(aug), options);
  out.inner.diagnostics.smoothing_applied = true;
  out.inner_variances = delta_method_variances(out.inner);

  const DeltaFit& f = out.inner;
  const AgreementSummary& s = f.summary;
  const InferenceReport& v = out.inner_variances;
  const double n = s.n;
  const double B = f.B;
  const double X = v.X_total;

  out.p3_dot = s.t(2, 0);
  const double q = 1.0 - out.p3_dot;
  const double pi31 = f.pi(2, 0);
  out.X3 = pi31 * pi31 / (2.0 * pi31 - 1.0);

  for (int i = 0; i < 2; ++i) {
    const double a_star = f.alpha(i) / q;
    const double Xi = v.X_cat(i);
    out.alpha_star[i] = a_star;
    out.var_alpha_star[i] =
        (B * Xi * (Xi / (X - 1.0) - 1.0) + q * a_star * (1.0 - a_star)) / (n * q * q);
    out.se_alpha_star[i] = root_of(out.var_alpha_star[i]);
    // S* = 2 alpha_i / N_i is the consistency of the augmented fit itself.
    out.consistency_star[i] = f.consistency[i].value_or(0.0);
    out.var_consistency_star[i] = v.var_consistency[i];
    out.se_consistency_star[i] = v.se_consistency[i];
  }
  out.delta_star = out.alpha_star[0] + out.alpha_star[1];
  out.var_delta_star = (B * (1.0 - out.X3) * (X - out.X3) / (X - 1.0) +
                        q * out.delta_star * (1.0 - out.delta_star)) /
                       (n * q * q);
  out.se_delta_star = root_of(out.var_delta_star);

  if (!out.se_delta_star) out.warnings.push_back("V(Delta*) evaluated negative");
  for (int i = 0; i < 2; ++i) {
    if (!out.se_alpha_star[i]) {
      out.warnings.push_back("V(alpha*_" + std::to_string(i + 1) + ") evaluated negative");
    }
  }
  for (const auto& w : v.warnings) out.warnings.push_back(w);
  return out;
}

}  // namespace concordia
