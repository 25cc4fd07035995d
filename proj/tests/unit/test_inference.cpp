#include "check_near.hpp"
#include "fixtures.hpp"
#include "numeric_delta.hpp"
#include "random_tables.hpp"

#include "concordia/distributions.hpp"
#include "concordia/errors.hpp"
#include "concordia/inference.hpp"
#include "concordia/model_tools.hpp"

#include <cmath>
#include <random>

using namespace concordia;
using concordia::testing::load_fixture;

namespace {

// X and the Delta variance written out from pi directly.
double x_total(const Eigen::MatrixXd& pi) {
  double X = 0.0;
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    double inv_sum = 0.0;
    double prod = 1.0;
    for (Eigen::Index r = 0; r < pi.cols(); ++r) {
      inv_sum += 1.0 / pi(i, r);
      prod *= pi(i, r);
    }
    X += 1.0 / (inv_sum - 1.0 / prod);
  }
  return X;
}

double delta_variance(const DeltaFit& f, double n) {
  const double X = x_total(f.pi);
  const double R = static_cast<double>(f.pi.cols());
  return (1.0 - f.delta_total) / n * (f.delta_total + X / ((R - 1) * X - 1));
}

// Consistency variance before the n V(alpha) - alpha (1 - alpha) regrouping.
double consistency_variance_ungrouped(const DeltaFit& f, int i, double n) {
  const double R = static_cast<double>(f.pi.cols());
  const double X = x_total(f.pi);
  double inv_sum = 0.0, prod = 1.0, sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index r = 0; r < f.pi.cols(); ++r) {
    inv_sum += 1.0 / f.pi(i, r);
    prod *= f.pi(i, r);
    sum += f.pi(i, r);
    sum_sq += f.pi(i, r) * f.pi(i, r);
  }
  const double Xi = 1.0 / (inv_sum - 1.0 / prod);
  const double B = f.B;
  const double a = f.alpha(i);
  const double N = f.summary.N_cat(i);
  const double S = R * a / N;
  return R * R / (n * N * N) *
         (B * Xi * ((R - 1) * Xi / ((R - 1) * X - 1) - 1) + a * (1 - S) * (1 - (R - 1) / R * S) +
          B * (S / R) * (S / R) * (sum * sum - sum_sq));
}

// Pearson statistic written out cell by cell.
double pearson(const DeltaFit& f, const JointCountTable& t) {
  const int K = t.categories();
  const int R = t.raters();
  const double n = t.total();
  double chi = 0.0;
  for_each_profile(K, R, [&](const Profile& p) {
    bool same = true;
    double prod = 1.0;
    for (int r = 0; r < R; ++r) {
      same = same && p[r] == p[0];
      prod *= f.pi(p[r], r);
    }
    const double e = (same ? f.alpha(p[0]) : 0.0) + f.B * prod;
    const double o = t.count(p) / n;
    if (e > 0) chi += n * (o - e) * (o - e) / e;
  });
  return chi;
}

}  // namespace

TEST_CASE("variances for the 100-subject table go through the smoothed data") {
  const DeltaFit f = fit_delta(summarize(load_fixture("table1")));
  const InferenceReport v = estimate_variances(f);
  CHECK(v.smoothing_applied);
  CHECK_NEAR(v.n, 104.5, 1e-12);
  CHECK_NEAR(*v.se_delta, 0.1099, 5e-5);
  const double se_S[3] = {0.1442, 0.2058, 0.1085};
  for (int i = 0; i < 3; ++i) CHECK_NEAR(*v.se_consistency[i], se_S[i], 5e-5);
  CHECK_NEAR(v.var_delta, delta_variance(v.evaluated_at, v.n), 1e-15);
  CHECK(v.evaluated_at.diagnostics.smoothing_applied);
}

TEST_CASE("variances for the 164-subject table") {
  const DeltaFit f = fit_delta(summarize(load_fixture("table2")));
  const InferenceReport v = estimate_variances(f);
  CHECK_FALSE(v.smoothing_applied);
  CHECK_NEAR(*v.se_delta, 0.0462, 5e-5);
  const double se_S[3] = {0.0460, 0.1011, 0.0668};
  for (int i = 0; i < 3; ++i) {
    CHECK_NEAR(*v.se_consistency[i], se_S[i], 5e-5);
    CHECK_NEAR(*v.var_consistency[i], consistency_variance_ungrouped(f, i, 164), 1e-14);
  }
  CHECK_NEAR(v.var_delta, delta_variance(f, 164), 1e-15);
  CHECK_NEAR(v.X_total, x_total(f.pi), 1e-12);

  VarianceOptions force;
  force.force_smoothing = true;
  const InferenceReport vs = estimate_variances(f, force);
  CHECK(vs.smoothing_applied);
  CHECK_NEAR(vs.n, 164 + 13.5, 1e-12);
}

TEST_CASE("closed-form variances equal the numeric delta method") {
  std::mt19937_64 rng(5);
  concordia::testing::ParamSpec spec;
  spec.pi_floor = 0.05;
  spec.alpha_floor = 0.05;
  spec.delta_low = 0.2;
  const int shapes[4][2] = {{3, 2}, {2, 3}, {3, 3}, {4, 3}};
  for (int k = 0; k < 8; ++k) {
    const int K = shapes[k % 4][0], R = shapes[k % 4][1];
    const NewDeltaParams p = concordia::testing::random_params(K, R, rng, spec);
    const std::vector<double> probs = cell_probabilities(p);
    std::map<Profile, double> cells;
    std::size_t c = 0;
    for_each_profile(K, R, [&](const Profile& profile) { cells[profile] = 1000 * probs[c++]; });
    const DeltaFit f = fit_delta(summarize(JointCountTable(K, R, cells)));
    const InferenceReport v = delta_method_variances(f);
    const auto nv = concordia::testing::numeric_delta_variances(f, 1000);
    CAPTURE(K);
    CAPTURE(R);
    CHECK(std::abs(v.var_delta / nv.var_delta - 1) <= 1e-4);
    for (int i = 0; i < K; ++i) {
      CHECK(std::abs(v.var_alpha(i) / nv.var_alpha(i) - 1) <= 1e-4);
      CHECK(std::abs(*v.var_consistency[i] / *nv.var_consistency[i] - 1) <= 1e-4);
    }
  }
}

TEST_CASE("singular variance denominators") {
  // A two-rater row (.5, .5) has sum 1/pi - 1/prod pi = 4 - 4 = 0.
  DeltaFit g = fit_delta(summarize(load_fixture("table1")));
  g.pi.row(0) << 0.5, 0.5;
  CHECK_THROWS_AS(delta_method_variances(g), SingularVarianceError);
}

TEST_CASE("Wald bounds") {
  const DeltaFit f = fit_delta(summarize(load_fixture("table2")));
  const InferenceReport v = estimate_variances(f);
  const ConfidenceBounds lower = confidence_bounds(v, f, 0.95, Sidedness::lower);
  CHECK_NEAR(*lower.delta.lower, 0.4736, 5e-5);
  CHECK(std::isinf(*lower.delta.upper));
  CHECK_NEAR(lower.z, 1.6448536, 1e-6);

  const ConfidenceBounds upper = confidence_bounds(v, f, 0.95, Sidedness::upper);
  CHECK(std::isinf(*upper.delta.lower));
  CHECK_NEAR(*upper.delta.upper, f.delta_total + 1.6448536 * *v.se_delta, 1e-6);

  const DeltaFit f1 = fit_delta(summarize(load_fixture("table1")));
  const InferenceReport v1 = estimate_variances(f1);
  const ConfidenceBounds two = confidence_bounds(v1, f1, 0.95, Sidedness::two_sided);
  CHECK_NEAR(*two.delta.lower, 0.6875 - 1.959964 * *v1.se_delta, 1e-5);
  CHECK_NEAR(*two.delta.upper, 0.6875 + 1.959964 * *v1.se_delta, 1e-5);
  CHECK(two.alpha.size() == 3);

  const Bound zero = wald_bound(0.3, 0.0, 1.96, Sidedness::two_sided);
  CHECK(*zero.lower == 0.3);
  CHECK(*zero.upper == 0.3);
  const Bound none = wald_bound(0.3, std::nullopt, 1.96, Sidedness::two_sided);
  CHECK_FALSE(none.lower.has_value());

  CHECK_THROWS_AS(critical_value(1.0, Sidedness::two_sided), DataError);
  CHECK_THROWS_AS(critical_value(0.0, Sidedness::lower), DataError);
}

TEST_CASE("goodness of fit") {
  const auto t1 = load_fixture("table1");
  const DeltaFit f1 = fit_delta(summarize(t1));
  const GofResult g1 = goodness_of_fit(f1, t1);
  CHECK(g1.chi_square <= 1e-9);
  CHECK(g1.df == 1);
  CHECK_FALSE(g1.incompatible);

  const JointCountTable t1m = load_fixture("table1_modified");
  const GofResult gm = goodness_of_fit(fit_delta(summarize(t1m)), t1m);
  CHECK(gm.chi_square <= 1e-9);
  CHECK(gm.df == 1);

  const auto t3 = load_fixture("table3");
  const DeltaFit f3 = fit_delta(summarize(t3));
  const GofResult g3 = goodness_of_fit(f3, t3);
  CHECK_NEAR(g3.chi_square, 19.83, 5e-3);
  CHECK_NEAR(g3.chi_square, pearson(f3, t3), 1e-9);
  CHECK(g3.df == 17);
  CHECK(g3.cells_expected_lt_1 == 9);
  CHECK(g3.cells_expected_le_5 == 24);
  CHECK(g3.reliability_warning);
  CHECK_NEAR(*g3.p_value, chi_square_tail(g3.chi_square, 17), 1e-15);

  // At the fitted parameters the Pearson statistic of this table is 37.606.
  const auto t2 = load_fixture("table2");
  const DeltaFit f2 = fit_delta(summarize(t2));
  const GofResult g2 = goodness_of_fit(f2, t2);
  CHECK_NEAR(g2.chi_square, pearson(f2, t2), 1e-9);
  CHECK_NEAR(g2.chi_square, 37.606, 5e-3);
  CHECK(g2.df == 17);
  CHECK(g2.cells_expected_lt_1 == 7);
  CHECK(g2.cells_expected_le_5 == 21);
  CHECK(g2.cells == 27);
}

TEST_CASE("goodness of fit on model-generated data and incompatible tables") {
  const DeltaFit f = fit_delta(summarize(load_fixture("table2")));
  NewDeltaParams p;
  p.alpha = f.alpha;
  p.Delta = f.delta_total;
  p.pi = f.pi;
  const auto probs = cell_probabilities(p);
  std::map<Profile, double> cells;
  std::size_t c = 0;
  for_each_profile(3, 3, [&](const Profile& q) { cells[q] = 500 * probs[c++]; });
  const JointCountTable expected(3, 3, cells);
  const GofResult g = goodness_of_fit(fit_delta(summarize(expected)), expected);
  CHECK(g.chi_square <= 1e-9);

  // pi_31 = 0 in this fit, so cell (3, 1) has expected count 0.
  const DeltaFit f1 = fit_delta(summarize(load_fixture("table1")));
  const JointCountTable other(3, 2, {{{0, 0}, 5}, {{2, 0}, 1}, {{1, 2}, 2}});
  const GofResult gi = goodness_of_fit(f1, other);
  CHECK(gi.incompatible);
  CHECK(std::isinf(gi.chi_square));
}

TEST_CASE("degrees of freedom") {
  CHECK(gof_degrees_of_freedom(3, 2) == 1);
  CHECK(gof_degrees_of_freedom(3, 3) == 17);
  CHECK(gof_degrees_of_freedom(2, 3) == 2);
  CHECK(gof_degrees_of_freedom(4, 2) == 5);
  CHECK_THROWS_AS(gof_degrees_of_freedom(2, 2), SaturatedModelError);
  CHECK_THROWS_AS(goodness_of_fit(fit_delta(summarize(load_fixture("table1"))),
                                  load_fixture("table1"), 4),
                  DataError);
}

TEST_CASE("variances agree with a parametric bootstrap") {
  std::mt19937_64 rng(17);
  concordia::testing::ParamSpec spec;
  spec.pi_floor = 0.05;
  spec.alpha_floor = 0.05;
  spec.delta_low = 0.3;
  const NewDeltaParams p = concordia::testing::random_params(3, 3, rng, spec);
  const std::vector<double> probs = cell_probabilities(p);
  std::map<Profile, double> cells;
  std::size_t c = 0;
  for_each_profile(3, 3, [&](const Profile& q) { cells[q] = 2000 * probs[c++]; });
  const JointCountTable t(3, 3, cells);
  const DeltaFit f = fit_delta(summarize(t));
  const InferenceReport v = estimate_variances(f);
  BootstrapOptions opts;
  opts.replicates = 2000;
  opts.kind = BootstrapKind::parametric;
  const BootstrapResult b = bootstrap_se(t, opts);
  CHECK(std::abs(b.se_delta / *v.se_delta - 1) <= 0.15);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(b.se_alpha(i) / *v.se_alpha[i] - 1) <= 0.15);
    CHECK(std::abs(*b.se_consistency[i] / *v.se_consistency[i] - 1) <= 0.15);
  }
}
