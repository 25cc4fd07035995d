#include "random_tables.hpp"

namespace concordia::testing {

Eigen::VectorXd dirichlet(int k, double concentration, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = gamma(rng) + 1e-300;
  return v / v.sum();
}

NewDeltaParams random_params(int K, int R, std::mt19937_64& rng, const ParamSpec& spec) {
  std::uniform_real_distribution<double> unif(spec.delta_low, spec.delta_high);
  const double Delta = unif(rng);
  Eigen::VectorXd share = dirichlet(K, spec.concentration, rng);
  share = (share.array() * (1.0 - K * spec.alpha_floor) + spec.alpha_floor).matrix();
  Eigen::MatrixXd pi(K, R);
  for (int r = 0; r < R; ++r) {
    const Eigen::VectorXd col = dirichlet(K, spec.concentration, rng);
    pi.col(r) = (col.array() * (1.0 - K * spec.pi_floor) + spec.pi_floor).matrix();
  }
  return make_params(Delta * share, pi);
}

JointCountTable random_table(int K, int R, long long n, std::mt19937_64& rng,
                             const ParamSpec& spec) {
  const NewDeltaParams p = random_params(K, R, rng, spec);
  return sample_table(K, R, cell_probabilities(p), n, rng);
}

JointCountTable permute_categories(const JointCountTable& t, const std::vector<int>& perm) {
  std::map<Profile, double> cells;
  for (const auto& [profile, count] : t.cells()) {
    Profile p = profile;
    for (int& c : p) c = perm[static_cast<std::size_t>(c)];
    cells[p] += count;
  }
  return JointCountTable(t.categories(), t.raters(), std::move(cells));
}

JointCountTable permute_raters(const JointCountTable& t, const std::vector<int>& order) {
  std::map<Profile, double> cells;
  for (const auto& [profile, count] : t.cells()) {
    Profile p(profile.size());
    for (std::size_t r = 0; r < order.size(); ++r) p[r] = profile[static_cast<std::size_t>(order[r])];
    cells[p] += count;
  }
  return JointCountTable(t.categories(), t.raters(), std::move(cells));
}

}  // namespace concordia::testing
