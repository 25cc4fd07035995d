#include "concordia/delta_fit.hpp"

#include "concordia/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

namespace concordia {

namespace {

constexpr int kMaxNewton = 200;
constexpr int kMaxBisection = 200;
constexpr int kMaxExhaustiveCategories = 20;
constexpr double kTieTolerance = 1e-10;
constexpr double kPiSlack = 1e-9;

// h(x) = q(x) - c x with q(x) = prod_r (x + d_r) expanded into coefficients
// (coef[k] multiplies x^k) and c = B^(R-1). Horner keeps the inner loop free
// of divisions.
struct Residual {
  const double* coef;
  int R;
  double c;

  void eval(double x, double& h, double& dh) const {
    double q = coef[R];
    double dq = 0.0;
    for (int k = R - 1; k >= 0; --k) {
      dq = dq * x + q;
      q = q * x + coef[k];
    }
    h = q - c * x;
    dh = dq - c;
  }
};

std::vector<double> expand_product(const std::vector<double>& d) {
  std::vector<double> coef(d.size() + 1, 0.0);
  coef[0] = 1.0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t k = r + 1; k > 0; --k) coef[k] = coef[k - 1] + d[r] * coef[k];
    coef[0] *= d[r];
  }
  return coef;
}

// Newton from the left of the low root. h is convex with h(0) > 0, so the
// iterates increase monotonically. Passing the minimizer while h is still
// positive means there is no root. Stops once a step falls below
// step_tol relative to the iterate.
std::optional<double> newton_low(const Residual& res, double x, double step_tol) {
  for (int it = 0; it < kMaxNewton; ++it) {
    double h, dh;
    res.eval(x, h, dh);
    // Monotone iterates only overshoot by rounding, so h <= 0 after a step
    // means the root has been reached; at the start it means a bad start.
    if (h <= 0.0) return it > 0 || h == 0.0 ? std::optional<double>(x) : std::nullopt;
    if (dh >= 0.0) return std::nullopt;
    const double step = h / dh;
    x -= step;
    if (std::abs(step) <= step_tol * std::abs(x) + 1e-300) return x;
  }
  return x;
}

// Newton from the right of the high root; iterates decrease monotonically.
std::optional<double> newton_high(const Residual& res, double x, double step_tol) {
  for (int it = 0; it < kMaxNewton; ++it) {
    double h, dh;
    res.eval(x, h, dh);
    if (h <= 0.0) return it > 0 || h == 0.0 ? std::optional<double>(x) : std::nullopt;
    if (dh <= 0.0) return std::nullopt;
    const double step = h / dh;
    x -= step;
    if (std::abs(step) <= step_tol * std::abs(x) + 1e-300) return x;
  }
  return x;
}

// Full precision for reported roots; the scan only needs the sign of g.
constexpr double kExactStep = 1e-15;
constexpr double kScanStep = 1e-7;

// A category whose disagreements are all positive, so its lambda solves the
// polynomial equation rather than being pinned at zero.
struct FreeCategory {
  int index = 0;
  std::vector<double> d;
  std::vector<double> coef;
  double b_star = 0.0;    // feasibility threshold
  double lam_star = 0.0;  // double root at b_star
};

double threshold_lambda(const double* d, int R) {
  // Solves sum_r x / (x + d_r) = 1; the left side increases from 0 and is
  // at least R/2 >= 1 at x = max d.
  double lo = 0.0;
  double hi = *std::max_element(d, d + R);
  for (int it = 0; it < 200 && hi - lo > 1e-17 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    double phi = 0.0;
    for (int r = 0; r < R; ++r) phi += mid / (mid + d[r]);
    (phi < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double threshold_B(const double* d, int R, double lam) {
  double log_prod = 0.0;
  for (int r = 0; r < R; ++r) log_prod += std::log(lam + d[r]);
  return std::exp((log_prod - std::log(lam)) / (R - 1));
}

FreeCategory make_category(int index, std::vector<double> d) {
  FreeCategory cat;
  cat.index = index;
  cat.d = std::move(d);
  cat.coef = expand_product(cat.d);
  const int R = static_cast<int>(cat.d.size());
  cat.lam_star = threshold_lambda(cat.d.data(), R);
  cat.b_star = threshold_B(cat.d.data(), R, cat.lam_star);
  return cat;
}

double power(double B, int e) {
  double out = 1.0;
  for (int k = 0; k < e; ++k) out *= B;
  return out;
}

struct RootPair {
  double low = 0.0;
  double high = 0.0;
};

// Two raters: lambda^2 - (B - d_1 - d_2) lambda + d_1 d_2 = 0.
RootPair quadratic_roots(const FreeCategory& cat, double B) {
  const double b = B - cat.coef[1];
  const double disc = b * b - 4.0 * cat.coef[0];
  // Within rounding of the threshold the roots merge.
  if (!(disc > 0.0) || !(b > 0.0)) {
    const double mid = b > 0.0 ? 0.5 * b : cat.lam_star;
    return {mid, mid};
  }
  const double high = 0.5 * (b + std::sqrt(disc));
  return {cat.coef[0] / high, high};
}

constexpr double kNoStart = std::numeric_limits<double>::quiet_NaN();

// One root by monotone Newton. Starts must lie left of the low root or right
// of the high root (NaN for none). Each bad start falls through to the next
// and finally to the cold start, 0 or B.
std::optional<double> newton_root(const Residual& res, bool high, double start, double fallback,
                                  double B, double step_tol) {
  for (double x : {start, fallback, high ? B : 0.0}) {
    if (!(x >= 0.0)) continue;
    auto root = high ? newton_high(res, x, step_tol) : newton_low(res, x, step_tol);
    if (root) return root;
  }
  return std::nullopt;
}

const RootPair kCold{kNoStart, kNoStart};

// Both roots at B >= b_star.
RootPair solve_pair(const FreeCategory& cat, double B, const RootPair& start,
                    const RootPair& fallback, double step_tol) {
  const int R = static_cast<int>(cat.d.size());
  if (R == 2) return quadratic_roots(cat, B);
  const Residual res{cat.coef.data(), R, power(B, R - 1)};
  const auto low = newton_root(res, false, start.low, fallback.low, B, step_tol);
  const auto high = newton_root(res, true, start.high, fallback.high, B, step_tol);
  if (!low || !high || *low > *high) {
    // Only reachable within rounding of b_star, where the roots merge.
    const double mid = low && high ? 0.5 * (*low + *high) : cat.lam_star;
    return {mid, mid};
  }
  return {*low, *high};
}

double solve_one(const FreeCategory& cat, double B, bool high, double start, double step_tol) {
  const int R = static_cast<int>(cat.d.size());
  if (R == 2) {
    const auto pair = quadratic_roots(cat, B);
    return high ? pair.high : pair.low;
  }
  const Residual res{cat.coef.data(), R, power(B, R - 1)};
  if (const auto root = newton_root(res, high, start, kNoStart, B, step_tol)) return *root;
  const auto pair = solve_pair(cat, B, kCold, kCold, step_tol);
  return high ? pair.high : pair.low;
}

class Solver {
 public:
  Solver(const AgreementSummary& s, const FitOptions& options) : s_(s), options_(options) {
    for (int i = 0; i < s.categories; ++i) {
      if (!(s.d.row(i).array() > 0.0).all()) continue;
      std::vector<double> d(static_cast<std::size_t>(s.raters));
      for (int r = 0; r < s.raters; ++r) d[r] = s.d(i, r);
      free_.push_back(make_category(i, std::move(d)));
    }
    lower_ = s.d.maxCoeff();
    for (const auto& cat : free_) lower_ = std::max(lower_, cat.b_star);
    build_branches();
  }

  std::vector<FitCandidate> run() {
    std::vector<FitCandidate> found;
    if (!(lower_ <= options_.b_cap)) return found;

    const int N = std::max(2, options_.grid_points);
    const std::size_t F = free_.size();
    std::vector<double> grid(static_cast<std::size_t>(N));
    const double ratio = std::log(options_.b_cap / lower_);
    for (int k = 0; k < N; ++k) grid[k] = options_.b_cap * std::exp(-ratio * k / (N - 1));
    grid[N - 1] = lower_;

    // The scan runs downwards: as B decreases the low root grows and the high
    // root shrinks, so earlier points give valid starts for both. The start
    // is extrapolated log-linearly from the two previous points when
    // possible; a start on the wrong side is caught and replaced.
    std::vector<RootPair> roots(F), prev(F), prev2(F);
    std::vector<double> g_prev(branches_.size());
    std::vector<double> g_now(branches_.size());
    for (int k = 0; k < N; ++k) {
      const double B = grid[k];
      for (std::size_t c = 0; c < F; ++c) {
        RootPair start = kCold;
        RootPair fallback = kCold;
        if (k >= 2 && prev2[c].low > 0.0) {
          start = {prev[c].low * (prev[c].low / prev2[c].low),
                   prev[c].high * (prev[c].high / prev2[c].high)};
        }
        if (k >= 1) fallback = prev[c];
        roots[c] = solve_pair(free_[c], B, start, fallback, kScanStep);
      }
      double base = -B + s_.D_total;
      for (std::size_t c = 0; c < F; ++c) base += roots[c].low;
      for (std::size_t b = 0; b < branches_.size(); ++b) {
        double g = base;
        for (std::size_t c = 0; c < F; ++c) {
          if (branches_[b] >> c & 1U) g += roots[c].high - roots[c].low;
        }
        g_now[b] = g;
        if (g == 0.0) {
          add_candidate(found, B, b);
        } else if (k > 0 && g_prev[b] != 0.0 && (g < 0.0) != (g_prev[b] < 0.0)) {
          refine(found, B, grid[k - 1], b, prev);
        }
      }
      std::swap(g_prev, g_now);
      prev2.swap(prev);
      prev = roots;
    }
    // A root at the lower end itself (merged lambda roots, or some pi = 1)
    // shows no sign change; add_candidate keeps it only if g vanishes there.
    for (std::size_t b = 0; b < branches_.size(); ++b) add_candidate(found, lower_, b);
    return found;
  }

  std::string describe() const {
    std::ostringstream out;
    out << "no feasible root of g(B) on [" << lower_ << ", " << options_.b_cap << "] across "
        << branches_.size() << " branch(es); " << free_.size()
        << " category(ies) with all disagreements positive";
    return out.str();
  }

 private:
  void build_branches() {
    const std::size_t F = free_.size();
    if (options_.exhaustive_branches) {
      if (F > kMaxExhaustiveCategories) {
        throw DataError("exhaustive branch enumeration is limited to " +
                        std::to_string(kMaxExhaustiveCategories) + " free categories");
      }
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << F); ++m) branches_.push_back(m);
    } else {
      if (F > 63) throw DataError("too many categories for the branch encoding");
      branches_.push_back(0);
      for (std::size_t c = 0; c < F; ++c) branches_.push_back(std::uint64_t{1} << c);
    }
  }

  std::vector<RootBranch> branch_vector(std::uint64_t mask) const {
    std::vector<RootBranch> out(static_cast<std::size_t>(s_.categories), RootBranch::none);
    for (std::size_t c = 0; c < free_.size(); ++c) {
      out[free_[c].index] = mask >> c & 1U ? RootBranch::high : RootBranch::low;
    }
    return out;
  }

  // Roots on `mask` at B, started from roots at some larger B (valid starts
  // on both branches) or cold when `from` is null. Returns g(B).
  double branch_roots(double B, std::uint64_t mask, const std::vector<RootPair>* from,
                      std::vector<RootPair>& out) const {
    double g = -B + s_.D_total;
    for (std::size_t c = 0; c < free_.size(); ++c) {
      const bool high = mask >> c & 1U;
      const double start = from ? (high ? (*from)[c].high : (*from)[c].low) : kNoStart;
      const double root = solve_one(free_[c], B, high, start, kExactStep);
      (high ? out[c].high : out[c].low) = root;
      g += root;
    }
    return g;
  }

  // Bisection on [lo, hi] where g changes sign; `at_hi` holds the scan roots
  // at hi.
  void refine(std::vector<FitCandidate>& found, double lo, double hi, std::size_t b,
              std::vector<RootPair> at_hi) {
    const auto mask = branches_[b];
    std::vector<RootPair> at_mid(free_.size());
    double g_lo = branch_roots(lo, mask, &at_hi, at_mid);
    double g_hi = branch_roots(hi, mask, nullptr, at_hi);
    if (std::abs(g_lo) > options_.g_tolerance && std::abs(g_hi) > options_.g_tolerance) {
      for (int it = 0; it < kMaxBisection; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double g = branch_roots(mid, mask, &at_hi, at_mid);
        if (std::abs(g) <= options_.g_tolerance) {
          lo = hi = mid;
          g_lo = g_hi = g;
          break;
        }
        if ((g < 0.0) == (g_lo < 0.0)) {
          lo = mid;
          g_lo = g;
        } else {
          hi = mid;
          g_hi = g;
          at_hi = at_mid;
        }
      }
    }
    add_candidate(found, std::abs(g_lo) <= std::abs(g_hi) ? lo : hi, b);
  }

  void add_candidate(std::vector<FitCandidate>& found, double B, std::size_t b) {
    const auto mask = branches_[b];
    FitCandidate cand;
    cand.B = B;
    cand.lambda = Eigen::VectorXd::Zero(s_.categories);
    for (std::size_t c = 0; c < free_.size(); ++c) {
      cand.lambda(free_[c].index) = solve_one(free_[c], B, mask >> c & 1U, kNoStart, kExactStep);
    }
    cand.g_residual = cand.lambda.sum() - B + s_.D_total;
    // A sign change across a jump (possible only at merged roots) is not a root.
    if (!(std::abs(cand.g_residual) <= 1e-9)) return;
    cand.branch = branch_vector(mask);
    for (int i = 0; i < s_.categories; ++i) {
      for (int r = 0; r < s_.raters; ++r) {
        const double pi = (cand.lambda(i) + s_.d(i, r)) / B;
        if (!(pi >= -kPiSlack && pi <= 1.0 + kPiSlack)) return;
      }
    }
    // Where two branches meet (a double root) they give the same point.
    for (const auto& other : found) {
      if (std::abs(other.B - B) <= 1e-12 * B &&
          (other.lambda - cand.lambda).lpNorm<Eigen::Infinity>() <= 1e-12) {
        return;
      }
    }
    cand.log_likelihood = profile_log_likelihood(B, cand.lambda, s_);
    found.push_back(std::move(cand));
  }

  const AgreementSummary& s_;
  const FitOptions& options_;
  std::vector<FreeCategory> free_;
  std::vector<std::uint64_t> branches_;
  double lower_ = 0.0;
};

DeltaFit assemble(const AgreementSummary& s, double B, const Eigen::VectorXd& lambda) {
  DeltaFit fit;
  fit.B = B;
  fit.lambda = lambda;
  fit.alpha = s.p_agree - lambda;
  fit.delta_total = 1.0 - B;
  fit.pi.resize(s.categories, s.raters);
  for (int i = 0; i < s.categories; ++i) {
    for (int r = 0; r < s.raters; ++r) fit.pi(i, r) = (lambda(i) + s.d(i, r)) / B;
  }
  // Roots at the edge of the feasible range can leave pi a few ulps above 1.
  fit.pi = fit.pi.cwiseMin(1.0);
  fit.consistency = consistencies(fit.alpha, s);
  fit.I_pi = fit.pi.rowwise().prod().sum();
  fit.summary = s;
  return fit;
}

}  // namespace

std::vector<double> lambda_roots(double B, const Eigen::Ref<const Eigen::VectorXd>& d) {
  const int R = static_cast<int>(d.size());
  if (R < 2) throw DataError("lambda_roots needs at least 2 raters");
  if (!(B > 0.0)) throw DataError("lambda_roots needs B > 0");
  for (int r = 0; r < R; ++r) {
    if (!(d(r) > 0.0)) throw DataError("lambda_roots needs every disagreement positive");
  }
  const auto cat = make_category(0, std::vector<double>(d.data(), d.data() + R));
  if (B < cat.b_star) return {};
  const auto pair = solve_pair(cat, B, kCold, kCold, kExactStep);
  if (pair.low == pair.high) return {pair.low};
  return {pair.low, pair.high};
}

double feasibility_threshold(const Eigen::Ref<const Eigen::VectorXd>& d) {
  const int R = static_cast<int>(d.size());
  std::vector<double> v(d.data(), d.data() + R);
  return threshold_B(v.data(), R, threshold_lambda(v.data(), R));
}

std::optional<double> g_of_B(double B, const std::vector<RootBranch>& branch,
                             const AgreementSummary& s) {
  if (!(B > 0.0)) throw DataError("g_of_B needs B > 0");
  if (branch.size() != static_cast<std::size_t>(s.categories)) {
    throw DataError("branch vector length does not match K");
  }
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(s.categories);
  for (int i = 0; i < s.categories; ++i) {
    if ((s.d.row(i).array() > 0.0).all()) {
      const auto roots = lambda_roots(B, s.d.row(i).transpose());
      if (roots.empty()) return std::nullopt;
      lam(i) = branch[i] == RootBranch::high ? roots.back() : roots.front();
    }
  }
  for (int i = 0; i < s.categories; ++i) {
    for (int r = 0; r < s.raters; ++r) {
      const double pi = (lam(i) + s.d(i, r)) / B;
      if (pi < 0.0 || pi > 1.0 + 1e-12) return std::nullopt;
    }
  }
  return lam.sum() - B + s.D_total;
}

double profile_log_likelihood(double B, const Eigen::Ref<const Eigen::VectorXd>& lambda,
                              const AgreementSummary& s) {
  if (s.D_total == 0.0) return 0.0;
  if (!(B > 0.0) || (lambda.array() < 0.0).any()) {
    throw DataError("profile log-likelihood needs B > 0 and lambda >= 0");
  }
  double f = -(s.raters - 1) * s.D_total * std::log(B);
  for (int i = 0; i < s.categories; ++i) {
    for (int r = 0; r < s.raters; ++r) {
      if (s.d(i, r) > 0.0) f += s.d(i, r) * std::log(lambda(i) + s.d(i, r));
    }
  }
  return f;
}

std::vector<std::optional<double>> consistencies(const Eigen::VectorXd& alpha,
                                                 const AgreementSummary& s) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(s.categories));
  for (int i = 0; i < s.categories; ++i) {
    if (s.N_cat(i) > 0.0) out[i] = s.raters * alpha(i) / s.N_cat(i);
  }
  return out;
}

DeltaFit fit_delta(const AgreementSummary& s, const FitOptions& options) {
  if (s.categories == 2 && s.raters == 2) {
    throw DataError(
        "the general delta model is under-identified for 2 raters and 2 categories; "
        "use the binary procedure");
  }
  if (s.D_total <= 0.0) {
    DeltaFit fit;
    fit.B = 0.0;
    fit.lambda = Eigen::VectorXd::Zero(s.categories);
    fit.alpha = s.p_agree;
    fit.delta_total = 1.0;
    fit.pi = s.t;
    fit.consistency = consistencies(fit.alpha, s);
    fit.I_pi = s.t.rowwise().prod().sum();
    fit.diagnostics.perfect_agreement = true;
    fit.diagnostics.branch.assign(static_cast<std::size_t>(s.categories), RootBranch::none);
    fit.summary = s;
    return fit;
  }

  Solver solver(s, options);
  auto candidates = solver.run();
  if (candidates.empty()) throw DegenerateFitError("delta fit is degenerate", solver.describe());

  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double diff = candidates[c].log_likelihood - candidates[best].log_likelihood;
    if (diff > kTieTolerance || (std::abs(diff) <= kTieTolerance && candidates[c].B < candidates[best].B)) {
      best = c;
    }
  }
  DeltaFit fit = assemble(s, candidates[best].B, candidates[best].lambda);
  fit.diagnostics.branch = candidates[best].branch;
  fit.diagnostics.g_residual = candidates[best].g_residual;
  fit.diagnostics.candidates = std::move(candidates);
  return fit;
}

DeltaFit fit_delta(const JointCountTable& t, const FitOptions& options) {
  if (options.force_smoothing) {
    DeltaFit fit = fit_delta(summarize(smooth(t, options.smoothing_increment, options.max_cells)),
                             options);
    fit.diagnostics.smoothing_applied = true;
    return fit;
  }
  try {
    return fit_delta(summarize(t), options);
  } catch (const DegenerateFitError& raw_failure) {
    if (!options.smooth_on_failure) throw;
    try {
      DeltaFit fit =
          fit_delta(summarize(smooth(t, options.smoothing_increment, options.max_cells)), options);
      fit.diagnostics.smoothing_applied = true;
      fit.diagnostics.degenerate = true;
      return fit;
    } catch (const DegenerateFitError& smoothed_failure) {
      throw DegenerateFitError("delta fit is degenerate even after smoothing",
                               std::string(raw_failure.diagnostics()) + "; after smoothing: " +
                                   smoothed_failure.diagnostics());
    }
  }
}

}  // namespace concordia
