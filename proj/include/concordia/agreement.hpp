#pragma once

// Core data model: raw ratings, the joint K^R count table, and the sufficient
// statistics (agreements, per-rater disagreements, marginals, rater-count
// histogram) that every agreement estimator consumes.
//
// Category and rater indices are 0-based throughout the C++ API. File formats
// and reports use 1-based category indices.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace concordia {

// One rating profile: the category chosen by each rater, indexed by rater.
using Profile = std::vector<int>;

// Dense sweeps over all K^R profiles (smoothing, goodness of fit) refuse to
// run above this many cells unless the caller raises the bound.
inline constexpr std::size_t kDefaultMaxDenseCells = 10'000'000;

class RatingMatrix {
 public:
  // `labels` is row-major: labels[s * raters + r] is the category of subject s
  // as rated by rater r.
  RatingMatrix(int categories, int raters, std::vector<int> labels,
               std::vector<std::string> category_names = {},
               std::vector<std::string> rater_names = {},
               std::vector<std::string> subject_ids = {});

  int subjects() const { return subjects_; }
  int raters() const { return raters_; }
  int categories() const { return categories_; }

  int label(int subject, int rater) const {
    return labels_[static_cast<std::size_t>(subject) * raters_ + rater];
  }
  std::span<const int> row(int subject) const {
    return {labels_.data() + static_cast<std::size_t>(subject) * raters_,
            static_cast<std::size_t>(raters_)};
  }

  const std::vector<std::string>& category_names() const { return category_names_; }
  const std::vector<std::string>& rater_names() const { return rater_names_; }
  const std::vector<std::string>& subject_ids() const { return subject_ids_; }

 private:
  int subjects_ = 0;
  int raters_ = 0;
  int categories_ = 0;
  std::vector<int> labels_;
  std::vector<std::string> category_names_;
  std::vector<std::string> rater_names_;
  std::vector<std::string> subject_ids_;
};

struct RatingRecord {
  std::string subject;
  std::string rater;
  std::string category;
};

struct IngestOptions {
  // Explicit orderings. Empty means "order of first appearance".
  std::vector<std::string> category_order;
  std::vector<std::string> rater_order;
};

RatingMatrix ingest_long(std::span<const RatingRecord> records,
                         const IngestOptions& options = {});

// Sparse multinomial cell data {x_{i1..iR}}. Counts are real so that smoothed
// tables share the representation; zero cells may or may not be stored.
class JointCountTable {
 public:
  JointCountTable(int categories, int raters, std::map<Profile, double> cells,
                  std::vector<std::string> category_names = {});

  int categories() const { return categories_; }
  int raters() const { return raters_; }
  double total() const { return total_; }
  const std::map<Profile, double>& cells() const { return cells_; }
  double count(const Profile& profile) const;
  const std::vector<std::string>& category_names() const { return category_names_; }

  // K^R, saturating at SIZE_MAX.
  std::size_t dense_size() const;

 private:
  int categories_ = 0;
  int raters_ = 0;
  double total_ = 0.0;
  std::map<Profile, double> cells_;
  std::vector<std::string> category_names_;
};

struct AgreementSummary {
  int categories = 0;
  int raters = 0;
  double n = 0.0;
  Eigen::VectorXd p_agree;   // unanimous agreement proportion per category
  Eigen::MatrixXd d;         // K x R disagreement proportions, t - p_agree
  Eigen::MatrixXd t;         // K x R marginal response proportions
  double p_total = 0.0;      // sum of p_agree
  double D_total = 0.0;      // 1 - p_total
  Eigen::VectorXd D_cat;     // row sums of d
  Eigen::VectorXd N_cat;     // R * p_agree + D_cat
  // K x (R+1): entry (i, w) is the (real) number of subjects for which exactly
  // w raters chose category i.
  Eigen::MatrixXd rater_count_histogram;
  Eigen::VectorXd R_dot;     // total responses per category over all raters
};

JointCountTable joint_counts(const RatingMatrix& m);
AgreementSummary summarize(const JointCountTable& t);

// K = 2 table with category 0 = "is i" and category 1 = "not i".
JointCountTable collapse_category(const JointCountTable& t, int category);

// Marginalizes rater `rater` out of the table. Requires R >= 3.
JointCountTable drop_rater(const JointCountTable& t, int rater);

// Adds `increment` to every one of the K^R cells.
JointCountTable smooth(const JointCountTable& t, double increment = 0.5,
                       std::size_t max_cells = kDefaultMaxDenseCells);

// The summary of smooth(t, increment) computed from the summary of t alone:
// every category gains one unanimous cell and K^(R-1) cells per rater.
AgreementSummary smooth_summary(const AgreementSummary& s, double increment = 0.5);

// Visits every profile in lexicographic order (rater 0 most significant).
void for_each_profile(int categories, int raters,
                      const std::function<void(const Profile&)>& visit);

// Throws DataError if K^R exceeds `max_cells`.
void require_dense_bound(const JointCountTable& t, std::size_t max_cells);

}  // namespace concordia
