#pragma once

// Builds the analysis report for one table: the kappa family, the delta
// fit with its inference, and the optional per-category and drop-one-rater
// breakdowns. The document is JSON; render_table prints the same content
// for a terminal.

#include "concordia/agreement.hpp"
#include "concordia/delta_fit.hpp"
#include "concordia/inference.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace concordia {

inline constexpr int kReportSchema = 1;

enum class Measure { raw, cohen, fleiss, hubert_r_wise, hubert_pairwise, delta };

// Parses a comma-separated list such as "raw,fleiss,delta" or "all". `all`
// expands to every measure that applies to R raters (cohen needs R = 2).
std::vector<Measure> parse_measures(std::string_view list, int raters);
std::string_view measure_name(Measure m);

struct AnalyzeRequest {
  std::vector<Measure> measures;
  bool standard_errors = false;
  bool goodness_of_fit = false;
  std::optional<double> ci_level;
  Sidedness sidedness = Sidedness::two_sided;
  // Significance level for the goodness-of-fit verdict.
  double alpha = 0.05;
  bool drop_rater_sweep = false;
  bool collapsed_kappa = false;
  int bootstrap_replicates = 0;
  bool parametric_bootstrap = false;
  std::uint64_t seed = 1;
  bool force_smoothing = false;
  std::size_t max_cells = kDefaultMaxDenseCells;
};

nlohmann::ordered_json analyze(const JointCountTable& t, const AnalyzeRequest& request);

// Human-readable rendering of an analyze() document.
std::string render_table(const nlohmann::ordered_json& report, int precision = 4);

}  // namespace concordia
