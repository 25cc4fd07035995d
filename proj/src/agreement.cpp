#include "concordia/agreement.hpp"

#include "concordia/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <unordered_map>

namespace concordia {

namespace {

void require_shape(int categories, int raters) {
  if (raters < 2) {
    throw DataError("at least 2 raters are required, got " + std::to_string(raters));
  }
  if (categories < 2) {
    throw DataError("at least 2 categories are required, got " +
                    std::to_string(categories));
  }
}

// Index assignment by explicit order, falling back to first appearance.
class Indexer {
 public:
  Indexer(const std::vector<std::string>& order, const char* what)
      : fixed_(!order.empty()), what_(what) {
    for (const auto& name : order) {
      if (!index_.emplace(name, static_cast<int>(names_.size())).second) {
        throw DataError(std::string("duplicate ") + what_ + " in explicit order: " + name);
      }
      names_.push_back(name);
    }
  }

  int operator()(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    if (fixed_) {
      throw DataError(std::string(what_) + " '" + name + "' is not in the declared order");
    }
    const int id = static_cast<int>(names_.size());
    index_.emplace(name, id);
    names_.push_back(name);
    return id;
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  bool fixed_;
  const char* what_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> names_;
};

}  // namespace

RatingMatrix::RatingMatrix(int categories, int raters, std::vector<int> labels,
                           std::vector<std::string> category_names,
                           std::vector<std::string> rater_names,
                           std::vector<std::string> subject_ids)
    : raters_(raters),
      categories_(categories),
      labels_(std::move(labels)),
      category_names_(std::move(category_names)),
      rater_names_(std::move(rater_names)),
      subject_ids_(std::move(subject_ids)) {
  require_shape(categories, raters);
  if (labels_.empty() || labels_.size() % static_cast<std::size_t>(raters) != 0) {
    throw DataError("rating matrix needs at least one subject and a complete row per subject");
  }
  subjects_ = static_cast<int>(labels_.size() / static_cast<std::size_t>(raters));
  for (int v : labels_) {
    if (v < 0 || v >= categories) {
      throw DataError("category index " + std::to_string(v) + " outside 0.." +
                      std::to_string(categories - 1));
    }
  }
  if (!category_names_.empty() && category_names_.size() != static_cast<std::size_t>(categories)) {
    throw DataError("category name count does not match K");
  }
  if (!rater_names_.empty() && rater_names_.size() != static_cast<std::size_t>(raters)) {
    throw DataError("rater name count does not match R");
  }
  if (!subject_ids_.empty() && subject_ids_.size() != static_cast<std::size_t>(subjects_)) {
    throw DataError("subject id count does not match n");
  }
}

RatingMatrix ingest_long(std::span<const RatingRecord> records, const IngestOptions& options) {
  Indexer subjects({}, "subject");
  Indexer raters(options.rater_order, "rater");
  Indexer categories(options.category_order, "category");

  std::vector<std::tuple<int, int, int>> triples;
  triples.reserve(records.size());
  for (const auto& rec : records) {
    triples.emplace_back(subjects(rec.subject), raters(rec.rater), categories(rec.category));
  }
  const int n = static_cast<int>(subjects.names().size());
  const int R = static_cast<int>(raters.names().size());
  const int K = static_cast<int>(categories.names().size());
  require_shape(K, R);

  constexpr int kUnset = -1;
  std::vector<int> labels(static_cast<std::size_t>(n) * R, kUnset);
  for (const auto& [s, r, c] : triples) {
    int& slot = labels[static_cast<std::size_t>(s) * R + r];
    if (slot != kUnset) {
      throw DataError("duplicate rating for subject '" + subjects.names()[s] + "' by rater '" +
                      raters.names()[r] + "'");
    }
    slot = c;
  }
  for (int s = 0; s < n; ++s) {
    for (int r = 0; r < R; ++r) {
      if (labels[static_cast<std::size_t>(s) * R + r] == kUnset) {
        throw DataError("missing rating for subject '" + subjects.names()[s] + "' by rater '" +
                        raters.names()[r] + "'");
      }
    }
  }
  return RatingMatrix(K, R, std::move(labels), categories.names(), raters.names(),
                      subjects.names());
}

JointCountTable::JointCountTable(int categories, int raters, std::map<Profile, double> cells,
                                 std::vector<std::string> category_names)
    : categories_(categories),
      raters_(raters),
      cells_(std::move(cells)),
      category_names_(std::move(category_names)) {
  require_shape(categories, raters);
  if (!category_names_.empty() && category_names_.size() != static_cast<std::size_t>(categories)) {
    throw DataError("category name count does not match K");
  }
  for (const auto& [profile, count] : cells_) {
    if (profile.size() != static_cast<std::size_t>(raters)) {
      throw DataError("profile length does not match the number of raters");
    }
    for (int c : profile) {
      if (c < 0 || c >= categories) throw DataError("profile category out of range");
    }
    if (!(count >= 0.0) || !std::isfinite(count)) {
      throw DataError("cell counts must be finite and nonnegative");
    }
    total_ += count;
  }
  if (!(total_ > 0.0)) throw DataError("table has no observations");
}

double JointCountTable::count(const Profile& profile) const {
  auto it = cells_.find(profile);
  return it == cells_.end() ? 0.0 : it->second;
}

std::size_t JointCountTable::dense_size() const {
  std::size_t size = 1;
  for (int r = 0; r < raters_; ++r) {
    if (size > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(categories_)) {
      return std::numeric_limits<std::size_t>::max();
    }
    size *= static_cast<std::size_t>(categories_);
  }
  return size;
}

void require_dense_bound(const JointCountTable& t, std::size_t max_cells) {
  if (t.dense_size() > max_cells) {
    throw DataError("K^R = " + std::to_string(t.dense_size()) +
                    " cells exceeds the dense-iteration bound of " + std::to_string(max_cells));
  }
}

JointCountTable joint_counts(const RatingMatrix& m) {
  std::map<Profile, double> cells;
  Profile profile(static_cast<std::size_t>(m.raters()));
  for (int s = 0; s < m.subjects(); ++s) {
    auto row = m.row(s);
    profile.assign(row.begin(), row.end());
    cells[profile] += 1.0;
  }
  return JointCountTable(m.categories(), m.raters(), std::move(cells), m.category_names());
}

AgreementSummary summarize(const JointCountTable& table) {
  const int K = table.categories();
  const int R = table.raters();
  AgreementSummary s;
  s.categories = K;
  s.raters = R;
  s.n = table.total();
  s.p_agree = Eigen::VectorXd::Zero(K);
  s.t = Eigen::MatrixXd::Zero(K, R);
  s.rater_count_histogram = Eigen::MatrixXd::Zero(K, R + 1);

  Eigen::MatrixXd disagreements = Eigen::MatrixXd::Zero(K, R);
  std::vector<int> hits(static_cast<std::size_t>(K));
  for (const auto& [profile, count] : table.cells()) {
    if (count == 0.0) continue;
    std::fill(hits.begin(), hits.end(), 0);
    for (int r = 0; r < R; ++r) {
      s.t(profile[r], r) += count;
      ++hits[profile[r]];
    }
    for (int i = 0; i < K; ++i) s.rater_count_histogram(i, hits[i]) += count;
    if (hits[profile[0]] == R) {
      s.p_agree(profile[0]) += count;
    } else {
      for (int r = 0; r < R; ++r) disagreements(profile[r], r) += count;
    }
  }
  // The zero-count column is implied by the totals.
  for (int i = 0; i < K; ++i) {
    double used = 0.0;
    for (int w = 1; w <= R; ++w) used += s.rater_count_histogram(i, w);
    s.rater_count_histogram(i, 0) = s.n - used;
  }

  s.R_dot = s.t.rowwise().sum();
  s.p_agree /= s.n;
  s.t /= s.n;
  // Accumulated separately from t so that "nobody disagreed" is an exact zero.
  s.d = disagreements / s.n;
  s.p_total = s.p_agree.sum();
  s.D_total = 1.0 - s.p_total;
  s.D_cat = s.d.rowwise().sum();
  s.N_cat = R * s.p_agree + s.D_cat;
  return s;
}

JointCountTable collapse_category(const JointCountTable& t, int category) {
  if (category < 0 || category >= t.categories()) {
    throw DataError("category index " + std::to_string(category) + " out of range");
  }
  std::map<Profile, double> cells;
  Profile collapsed(static_cast<std::size_t>(t.raters()));
  for (const auto& [profile, count] : t.cells()) {
    for (int r = 0; r < t.raters(); ++r) collapsed[r] = profile[r] == category ? 0 : 1;
    cells[collapsed] += count;
  }
  std::vector<std::string> names;
  if (!t.category_names().empty()) {
    const auto& name = t.category_names()[category];
    names = {name, "not " + name};
  }
  return JointCountTable(2, t.raters(), std::move(cells), std::move(names));
}

JointCountTable drop_rater(const JointCountTable& t, int rater) {
  if (t.raters() < 3) throw DataError("dropping a rater would leave fewer than 2 raters");
  if (rater < 0 || rater >= t.raters()) {
    throw DataError("rater index " + std::to_string(rater) + " out of range");
  }
  std::map<Profile, double> cells;
  Profile reduced;
  for (const auto& [profile, count] : t.cells()) {
    reduced.clear();
    for (int r = 0; r < t.raters(); ++r) {
      if (r != rater) reduced.push_back(profile[r]);
    }
    cells[reduced] += count;
  }
  return JointCountTable(t.categories(), t.raters() - 1, std::move(cells), t.category_names());
}

void for_each_profile(int categories, int raters,
                      const std::function<void(const Profile&)>& visit) {
  Profile profile(static_cast<std::size_t>(raters), 0);
  while (true) {
    visit(profile);
    int r = raters - 1;
    while (r >= 0 && ++profile[r] == categories) profile[r--] = 0;
    if (r < 0) return;
  }
}

JointCountTable smooth(const JointCountTable& t, double increment, std::size_t max_cells) {
  if (!(increment > 0.0) || !std::isfinite(increment)) {
    throw DataError("smoothing increment must be positive");
  }
  require_dense_bound(t, max_cells);
  std::map<Profile, double> cells;
  for_each_profile(t.categories(), t.raters(), [&](const Profile& p) {
    cells.emplace_hint(cells.end(), p, t.count(p) + increment);
  });
  return JointCountTable(t.categories(), t.raters(), std::move(cells), t.category_names());
}

AgreementSummary smooth_summary(const AgreementSummary& s, double increment) {
  if (!(increment > 0.0) || !std::isfinite(increment)) {
    throw DataError("smoothing increment must be positive");
  }
  const int K = s.categories;
  const int R = s.raters;
  const double per_rater = increment * std::pow(static_cast<double>(K), R - 1);
  const double added = increment * std::pow(static_cast<double>(K), R);

  AgreementSummary out = s;
  out.n = s.n + added;
  const Eigen::VectorXd agree = s.n * s.p_agree.array() + increment;
  const Eigen::MatrixXd disagree = (s.n * s.d.array() + (per_rater - increment)).matrix();
  out.p_agree = agree / out.n;
  out.d = disagree / out.n;
  out.t = out.d.colwise() + out.p_agree;
  out.p_total = out.p_agree.sum();
  out.D_total = 1.0 - out.p_total;
  out.D_cat = out.d.rowwise().sum();
  out.N_cat = R * out.p_agree + out.D_cat;
  // Profiles with exactly w raters on category i: C(R, w) (K-1)^(R-w).
  double binom = 1.0;
  for (int w = 0; w <= R; ++w) {
    if (w > 0) binom = binom * (R - w + 1) / w;
    out.rater_count_histogram.col(w).array() +=
        increment * binom * std::pow(static_cast<double>(K - 1), R - w);
  }
  out.R_dot = s.R_dot.array() + R * per_rater;
  return out;
}

}  // namespace concordia
