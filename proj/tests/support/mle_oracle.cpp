#include "mle_oracle.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace concordia::testing {

namespace {

constexpr double kShiftPenalty = 1.0;

struct Objective {
  const AgreementSummary& s;

  Eigen::MatrixXd softmax(const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd pi(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.cols(); ++r) {
      const double m = z.col(r).maxCoeff();
      pi.col(r) = (z.col(r).array() - m).exp().matrix();
      pi.col(r) /= pi.col(r).sum();
    }
    return pi;
  }

  // -inf when U reaches 1.
  double value(const Eigen::MatrixXd& z) const {
    const Eigen::MatrixXd pi = softmax(z);
    double v = 0.0;
    for (Eigen::Index r = 0; r < z.cols(); ++r) {
      const double m = z.col(r).maxCoeff();
      const double lse = m + std::log((z.col(r).array() - m).exp().sum());
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        if (s.d(i, r) > 0.0) v += s.d(i, r) * (z(i, r) - lse);
      }
      const double shift = z.col(r).sum();
      v -= 0.5 * kShiftPenalty * shift * shift;
    }
    const double U = pi.rowwise().prod().sum();
    if (!(U < 1.0)) return -std::numeric_limits<double>::infinity();
    return v - s.D_total * std::log1p(-U);
  }

  Eigen::VectorXd gradient(const Eigen::MatrixXd& z) const {
    const Eigen::MatrixXd pi = softmax(z);
    const Eigen::VectorXd P = pi.rowwise().prod();
    const double U = P.sum();
    const double D = s.D_total;
    Eigen::MatrixXd g(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.cols(); ++r) {
      const double shift = z.col(r).sum();
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        g(i, r) = s.d(i, r) - D * pi(i, r) + D * (P(i) - pi(i, r) * U) / (1.0 - U) -
                  kShiftPenalty * shift;
      }
    }
    return Eigen::Map<Eigen::VectorXd>(g.data(), g.size());
  }
};

Eigen::MatrixXd as_matrix(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

struct LocalResult {
  Eigen::MatrixXd z;
  double value = -std::numeric_limits<double>::infinity();
  double grad_norm = 0.0;
};

LocalResult climb(const Objective& obj, Eigen::MatrixXd z) {
  const Eigen::Index rows = z.rows();
  const Eigen::Index cols = z.cols();
  const Eigen::Index m = z.size();
  double f = obj.value(z);
  double mu = 1e-6;
  for (int it = 0; it < 3000; ++it) {
    const Eigen::VectorXd g = obj.gradient(z);
    if (g.lpNorm<Eigen::Infinity>() < 1e-14) break;
    // Central-difference Hessian of the analytic gradient.
    Eigen::MatrixXd H(m, m);
    const double h = 1e-6;
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(z.data(), m);
    for (Eigen::Index k = 0; k < m; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      H.col(k) = (obj.gradient(as_matrix(xp, rows, cols)) - obj.gradient(as_matrix(xm, rows, cols))) /
                 (2.0 * h);
    }
    H = 0.5 * (H + H.transpose()).eval();
    bool improved = false;
    for (int tries = 0; tries < 60 && !improved; ++tries) {
      const Eigen::MatrixXd A = -H + mu * Eigen::MatrixXd::Identity(m, m);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
        mu = std::max(mu * 10.0, 1e-8);
        continue;
      }
      const Eigen::VectorXd step = ldlt.solve(g);
      const Eigen::MatrixXd zn = z + as_matrix(step, rows, cols);
      const double fn = obj.value(zn);
      if (fn >= f && std::isfinite(fn)) {
        improved = fn > f || step.norm() < 1e-15;
        if (fn == f && step.norm() >= 1e-15) break;
        z = zn;
        f = fn;
        mu = std::max(mu / 10.0, 1e-15);
      } else {
        mu = std::max(mu * 10.0, 1e-8);
      }
    }
    if (!improved) break;
  }
  LocalResult out;
  out.z = z;
  out.value = f;
  out.grad_norm = obj.gradient(z).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace

OracleFit oracle_fit(const AgreementSummary& s, int random_starts, std::uint64_t seed) {
  const int K = s.categories;
  const int R = s.raters;
  Objective obj{s};
  std::vector<Eigen::MatrixXd> starts;
  starts.push_back(Eigen::MatrixXd::Zero(K, R));
  starts.push_back((s.t.array() + 1e-3).log().matrix());
  starts.push_back((s.d.array() + 1e-3).log().matrix());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int k = 0; k < random_starts; ++k) {
    Eigen::MatrixXd z(K, R);
    for (int i = 0; i < K; ++i) {
      for (int r = 0; r < R; ++r) z(i, r) = normal(rng);
    }
    starts.push_back(z);
  }

  LocalResult best;
  for (auto z : starts) {
    for (int r = 0; r < R; ++r) z.col(r).array() -= z.col(r).mean();
    const LocalResult res = climb(obj, z);
    if (res.value > best.value) best = res;
  }

  OracleFit out;
  out.pi = obj.softmax(best.z);
  out.objective = best.value;
  out.grad_norm = best.grad_norm;
  const Eigen::VectorXd P = out.pi.rowwise().prod();
  const double U = P.sum();
  out.unbounded = !(U < 1.0) || s.D_total / (1.0 - U) > 1e6;
  out.B = s.D_total / (1.0 - U);
  out.alpha = s.p_agree - out.B * P;
  return out;
}

double model_log_likelihood(const AgreementSummary& s, const JointCountTable& t, double B,
                            const Eigen::VectorXd& alpha, const Eigen::MatrixXd& pi) {
  double ll = 0.0;
  for (const auto& [profile, count] : t.cells()) {
    if (count <= 0.0) continue;
    double chance = B;
    bool unanimous = true;
    for (int r = 0; r < s.raters; ++r) {
      chance *= pi(profile[r], r);
      unanimous = unanimous && profile[r] == profile[0];
    }
    const double p = chance + (unanimous ? alpha(profile[0]) : 0.0);
    if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += count / t.total() * std::log(p);
  }
  return ll;
}

}  // namespace concordia::testing
