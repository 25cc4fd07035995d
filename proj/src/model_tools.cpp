#include "concordia/model_tools.hpp"

#include "concordia/binary_delta.hpp"
#include "concordia/errors.hpp"

#include <cmath>
#include <limits>

namespace concordia {

namespace {

constexpr double kTol = 1e-9;

void require(bool ok, const std::string& what) {
  if (!ok) throw DataError(what);
}

void require_distribution(const Eigen::VectorXd& v, const std::string& name) {
  require((v.array() >= -kTol).all(), name + " has a negative entry");
  require(std::abs(v.sum() - 1.0) <= kTol, name + " does not sum to 1");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int draw(const Eigen::Ref<const Eigen::VectorXd>& probs, double u) {
  double acc = 0.0;
  const int last = static_cast<int>(probs.size()) - 1;
  for (int i = 0; i < last; ++i) {
    acc += probs(i);
    if (u < acc) return i;
  }
  return last;
}

double sample_sd(const Eigen::VectorXd& x) {
  const Eigen::Index m = x.size();
  if (m < 2) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(m - 1));
}

}  // namespace

NewDeltaParams make_params(Eigen::VectorXd alpha, Eigen::MatrixXd pi) {
  NewDeltaParams p;
  p.Delta = alpha.sum();
  p.alpha = std::move(alpha);
  p.pi = std::move(pi);
  validate(p);
  return p;
}

NewDeltaParams params_of(const DeltaFit& fit) {
  NewDeltaParams p;
  p.alpha = fit.alpha;
  p.Delta = fit.alpha.sum();
  p.pi = fit.pi;
  return p;
}

void validate(const NewDeltaParams& p) {
  const int K = p.categories();
  require(K >= 2, "need at least two categories");
  require(p.pi.rows() == K && p.raters() >= 2, "pi must be K x R with R >= 2");
  require(std::abs(p.Delta - p.alpha.sum()) <= 1e-12, "Delta must equal the sum of alpha");
  for (int r = 0; r < p.raters(); ++r) {
    require_distribution(p.pi.col(r), "pi column " + std::to_string(r + 1));
  }
  for (double c : cell_probabilities(p)) {
    require(c >= -kTol, "the parameters give a negative cell probability");
  }
}

void validate(const ClassicDeltaParams& c) {
  const Eigen::Index K = c.row_marginal.size();
  require(K >= 2 && c.Delta_i.size() == K && c.pi.size() == K,
          "classic parameters must all have K >= 2 entries");
  require_distribution(c.row_marginal, "marginal");
  require_distribution(c.pi, "pi");
  require((c.Delta_i.array() <= 1.0 + kTol).all(), "every Delta_i must be at most 1");
}

NewDeltaParams classic_to_new(const ClassicDeltaParams& c) {
  validate(c);
  const Eigen::VectorXd A = c.agreements();
  const double Delta = A.sum();
  const double B = 1.0 - Delta;
  require(B > kTol, "Delta = 1: the chance distribution is not defined");
  const Eigen::VectorXd own = (c.row_marginal - A) / B;
  NewDeltaParams p;
  p.alpha = A;
  p.Delta = Delta;
  p.pi.resize(A.size(), 2);
  // Column orientation: the marginal and Delta_i belong to rater 2.
  const int own_col = c.orientation == Orientation::rows ? 0 : 1;
  p.pi.col(own_col) = own;
  p.pi.col(1 - own_col) = c.pi;
  return p;
}

ClassicDeltaParams new_to_classic(const NewDeltaParams& p, Orientation orientation) {
  validate(p);
  require(p.raters() == 2, "the classic parameterization needs R = 2");
  const double B = 1.0 - p.Delta;
  require(B > kTol, "Delta = 1: the chance distribution is not defined");
  const int own_col = orientation == Orientation::rows ? 0 : 1;
  ClassicDeltaParams c;
  c.orientation = orientation;
  c.row_marginal = p.alpha + B * p.pi.col(own_col);
  require((c.row_marginal.array() > 0.0).all(), "a marginal is zero");
  c.Delta_i = p.alpha.cwiseQuotient(c.row_marginal);
  c.pi = p.pi.col(1 - own_col);
  return c;
}

ClassicDeltaParams rows_to_columns(const ClassicDeltaParams& c) {
  validate(c);
  require(c.orientation == Orientation::rows, "expected row-oriented parameters");
  const Eigen::VectorXd A = c.agreements();
  const double B = 1.0 - A.sum();
  require(B > kTol, "Delta = 1: the chance distribution is not defined");
  ClassicDeltaParams out;
  out.orientation = Orientation::columns;
  out.row_marginal = A + B * c.pi;
  require((out.row_marginal.array() > 0.0).all(), "a marginal is zero");
  out.Delta_i = A.cwiseQuotient(out.row_marginal);
  out.pi = c.row_marginal.cwiseProduct((1.0 - c.Delta_i.array()).matrix()) / B;
  return out;
}

std::vector<double> cell_probabilities(const NewDeltaParams& p) {
  const int K = p.categories();
  const int R = p.raters();
  const double B = 1.0 - p.Delta;
  std::vector<double> probs;
  for_each_profile(K, R, [&](const Profile& prof) {
    double chance = B;
    bool unanimous = true;
    for (int r = 0; r < R; ++r) {
      chance *= p.pi(prof[r], r);
      unanimous = unanimous && prof[r] == prof[0];
    }
    probs.push_back(chance + (unanimous ? p.alpha(prof[0]) : 0.0));
  });
  return probs;
}

RatingMatrix sample_model(const NewDeltaParams& p, int subjects, std::uint64_t seed) {
  validate(p);
  require(subjects > 0, "the number of subjects must be positive");
  require((p.alpha.array() >= 0.0).all(),
          "a negative alpha_i is a valid fit but not a sampling distribution");
  const int K = p.categories();
  const int R = p.raters();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(subjects) * R);
  for (int s = 0; s < subjects; ++s) {
    const double u = unif(rng);
    double acc = 0.0;
    int recognized = -1;
    for (int i = 0; i < K; ++i) {
      acc += p.alpha(i);
      if (u < acc) {
        recognized = i;
        break;
      }
    }
    for (int r = 0; r < R; ++r) {
      labels.push_back(recognized >= 0 ? recognized : draw(p.pi.col(r), unif(rng)));
    }
  }
  return RatingMatrix(K, R, std::move(labels));
}

JointCountTable sample_table(int categories, int raters, const std::vector<double>& probs,
                             long long n, std::mt19937_64& rng) {
  std::size_t expected = 1;
  for (int r = 0; r < raters; ++r) expected *= static_cast<std::size_t>(categories);
  require(probs.size() == expected, "need one probability per cell (K^R = " +
                                        std::to_string(expected) + "), got " +
                                        std::to_string(probs.size()));
  require(n > 0, "the number of subjects must be positive");
  std::map<Profile, double> cells;
  long long left = n;
  double mass = 0.0;
  for (double q : probs) mass += std::max(q, 0.0);
  std::size_t c = 0;
  for_each_profile(categories, raters, [&](const Profile& prof) {
    const double q = std::max(probs[c++], 0.0);
    if (left <= 0 || q <= 0.0) {
      mass -= q;
      return;
    }
    long long x = left;
    if (mass > q) {
      std::binomial_distribution<long long> bin(left, std::min(1.0, q / mass));
      x = bin(rng);
    }
    mass -= q;
    left -= x;
    if (x > 0) cells[prof] = static_cast<double>(x);
  });
  return JointCountTable(categories, raters, std::move(cells));
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

BootstrapResult bootstrap_se(const JointCountTable& t, const BootstrapOptions& options) {
  require(options.replicates >= 100, "the bootstrap needs at least 100 replicates");
  const int K = t.categories();
  const int R = t.raters();
  require_dense_bound(t, options.fit.max_cells);
  const bool binary = K == 2 && R == 2;
  const long long n = std::llround(t.total());
  require(n > 0, "the table is empty");

  std::vector<double> probs;
  if (options.kind == BootstrapKind::nonparametric) {
    for_each_profile(K, R, [&](const Profile& p) { probs.push_back(t.count(p) / t.total()); });
  } else if (binary) {
    // The fitted 3 x 3 model restricted to the two real categories.
    const DeltaFit& inner = fit_binary(t, options.fit).inner;
    const std::vector<double> all = cell_probabilities(params_of(inner));
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) probs.push_back(all[static_cast<std::size_t>(3 * i + j)]);
    }
  } else {
    probs = cell_probabilities(params_of(fit_delta(t, options.fit)));
  }

  FitOptions refit = options.fit;
  refit.smooth_on_failure = false;
  refit.force_smoothing = false;

  const int cols = 1 + 2 * K;
  Eigen::MatrixXd rows(options.replicates, cols);
  int ok = 0;
  int degenerate = 0;
  const int allowed =
      static_cast<int>(std::floor(options.max_degenerate_fraction * options.replicates));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b < options.replicates; ++b) {
    std::mt19937_64 rng(replicate_seed(options.seed, static_cast<std::uint64_t>(b)));
    const JointCountTable rep = sample_table(K, R, probs, n, rng);
    Eigen::RowVectorXd row(cols);
    try {
      if (binary) {
        const BinaryDeltaFit f = fit_binary(rep, refit);
        row(0) = f.delta_star;
        for (int i = 0; i < 2; ++i) {
          row(1 + i) = f.alpha_star[i];
          row(1 + K + i) = f.consistency_star[i];
        }
      } else {
        const DeltaFit f = fit_delta(summarize(rep), refit);
        row(0) = f.delta_total;
        for (int i = 0; i < K; ++i) {
          row(1 + i) = f.alpha(i);
          row(1 + K + i) = f.consistency[i].value_or(nan);
        }
      }
    } catch (const DegenerateFitError&) {
      if (++degenerate > allowed) {
        throw UnreliableBootstrapError(
            "more than " + std::to_string(allowed) + " of " +
            std::to_string(options.replicates) + " bootstrap refits were degenerate");
      }
      continue;
    }
    rows.row(ok++) = row;
  }

  BootstrapResult out;
  out.replicates = options.replicates;
  out.degenerate = degenerate;
  out.samples = rows.topRows(ok);
  out.se_delta = sample_sd(out.samples.col(0));
  out.se_alpha.resize(K);
  out.se_consistency.resize(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) {
    out.se_alpha(i) = sample_sd(out.samples.col(1 + i));
    const Eigen::VectorXd s = out.samples.col(1 + K + i);
    if (s.array().isNaN().any()) continue;
    out.se_consistency[i] = sample_sd(s);
  }
  return out;
}

}  // namespace concordia
