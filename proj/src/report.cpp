#include "concordia/report.hpp"

#include "concordia/binary_delta.hpp"
#include "concordia/errors.hpp"
#include "concordia/kappa.hpp"
#include "concordia/model_tools.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace concordia {

using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

ordered_json count_value(double v) {
  if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long long>(v);
  return v;
}

ordered_json finite(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

template <typename Vec>
ordered_json array_of(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite(v(i)));
  return a;
}

template <typename T>
ordered_json array_of(const std::vector<std::optional<T>>& v) {
  ordered_json a = ordered_json::array();
  for (const auto& x : v) a.push_back(opt(x));
  return a;
}

ordered_json rows_of(const Eigen::MatrixXd& m) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(array_of(m.row(i)));
  return a;
}

std::string_view branch_name(RootBranch b) {
  switch (b) {
    case RootBranch::low: return "low";
    case RootBranch::high: return "high";
    default: return "none";
  }
}

std::string_view sidedness_name(Sidedness s) {
  switch (s) {
    case Sidedness::lower: return "lower";
    case Sidedness::upper: return "upper";
    default: return "two_sided";
  }
}

ordered_json kappa_json(const KappaResult& k) {
  ordered_json j;
  j["value"] = opt(k.value);
  j["observed_index"] = k.observed_index;
  j["expected_index"] = opt(k.expected_index);
  if (!k.defined()) j["undefined_reason"] = k.undefined_reason;
  return j;
}

ordered_json bound_json(const Bound& b) {
  ordered_json j;
  j["estimate"] = b.estimate;
  j["se"] = opt(b.se);
  j["lower"] = opt(b.lower);
  j["upper"] = opt(b.upper);
  return j;
}

ordered_json fit_json(const DeltaFit& f) {
  ordered_json j;
  j["B"] = f.B;
  j["Delta"] = f.delta_total;
  j["alpha"] = array_of(f.alpha);
  j["consistency"] = array_of(f.consistency);
  j["pi"] = rows_of(f.pi);
  j["lambda"] = array_of(f.lambda);
  j["I_pi"] = f.I_pi;
  ordered_json branch = ordered_json::array();
  for (RootBranch b : f.diagnostics.branch) branch.push_back(branch_name(b));
  j["branch"] = branch;
  j["g_residual"] = f.diagnostics.g_residual;
  j["candidates"] = f.diagnostics.candidates.size();
  j["smoothing_applied"] = f.diagnostics.smoothing_applied;
  j["perfect_agreement"] = f.diagnostics.perfect_agreement;
  j["degenerate"] = f.diagnostics.degenerate;
  j["fitted_n"] = f.summary.n;
  return j;
}

ordered_json gof_json(const GofResult& g, double alpha) {
  ordered_json j;
  j["chi_square"] = finite(g.chi_square);
  j["df"] = g.df;
  j["p_value"] = opt(g.p_value);
  if (g.p_value) j["reject"] = *g.p_value < alpha;
  j["alpha"] = alpha;
  j["cells"] = g.cells;
  j["cells_expected_lt_1"] = g.cells_expected_lt_1;
  j["cells_expected_le_5"] = g.cells_expected_le_5;
  j["reliability_warning"] = g.reliability_warning;
  j["incompatible"] = g.incompatible;
  return j;
}

ordered_json bootstrap_json(const BootstrapResult& b, const AnalyzeRequest& req) {
  ordered_json j;
  j["kind"] = req.parametric_bootstrap ? "parametric" : "nonparametric";
  j["replicates"] = b.replicates;
  j["degenerate"] = b.degenerate;
  j["seed"] = req.seed;
  j["se_delta"] = b.se_delta;
  j["se_alpha"] = array_of(b.se_alpha);
  j["se_consistency"] = array_of(b.se_consistency);
  return j;
}

BootstrapResult run_bootstrap(const JointCountTable& t, const AnalyzeRequest& req,
                              const FitOptions& fit) {
  BootstrapOptions bo;
  bo.replicates = req.bootstrap_replicates;
  bo.seed = req.seed;
  bo.kind = req.parametric_bootstrap ? BootstrapKind::parametric : BootstrapKind::nonparametric;
  bo.fit = fit;
  return bootstrap_se(t, bo);
}

ordered_json delta_general(const JointCountTable& t, const AnalyzeRequest& req,
                           const FitOptions& fopts, std::vector<std::string>& warnings) {
  const DeltaFit fit = fit_delta(t, fopts);
  ordered_json j;
  j["model"] = "multi_rater";
  j["fit"] = fit_json(fit);
  if (fit.diagnostics.degenerate) {
    warnings.push_back("no interior maximum on the raw table; fitted on the +0.5 smoothed table");
  }

  std::optional<InferenceReport> var;
  if (req.standard_errors || req.ci_level) {
    VarianceOptions vo;
    vo.force_smoothing = req.force_smoothing;
    vo.fit = fopts;
    var = estimate_variances(fit, vo);
    ordered_json se;
    se["n"] = var->n;
    se["smoothing_applied"] = var->smoothing_applied;
    se["delta"] = opt(var->se_delta);
    se["alpha"] = array_of(var->se_alpha);
    se["consistency"] = array_of(var->se_consistency);
    se["X"] = var->X_total;
    se["X_category"] = array_of(var->X_cat);
    j["se"] = se;
    if (var->smoothing_applied) {
      warnings.push_back("standard errors computed on the +0.5 smoothed table (n = " +
                         short_number(var->n) + ")");
    }
    for (const auto& w : var->warnings) warnings.push_back(w);
  }
  if (req.ci_level) {
    const ConfidenceBounds cb = confidence_bounds(*var, fit, *req.ci_level, req.sidedness);
    ordered_json ci;
    ci["level"] = cb.level;
    ci["sidedness"] = sidedness_name(cb.sidedness);
    ci["z"] = cb.z;
    ci["delta"] = bound_json(cb.delta);
    ordered_json alpha = ordered_json::array();
    for (const Bound& b : cb.alpha) alpha.push_back(bound_json(b));
    ci["alpha"] = alpha;
    ordered_json cons = ordered_json::array();
    for (const auto& b : cb.consistency) cons.push_back(b ? bound_json(*b) : ordered_json());
    ci["consistency"] = cons;
    j["ci"] = ci;
  }
  if (req.goodness_of_fit) {
    try {
      const GofResult g = goodness_of_fit(fit, t, req.max_cells);
      j["gof"] = gof_json(g, req.alpha);
      if (g.reliability_warning) {
        warnings.push_back("goodness of fit: " + std::to_string(g.cells_expected_le_5) +
                           " cells have expected count <= 5");
      }
    } catch (const SaturatedModelError& e) {
      j["gof"] = {{"available", false}, {"reason", e.what()}};
    }
  }
  if (req.bootstrap_replicates > 0) j["bootstrap"] = bootstrap_json(run_bootstrap(t, req, fopts), req);
  return j;
}

ordered_json delta_binary(const JointCountTable& t, const AnalyzeRequest& req,
                          const FitOptions& fopts, std::vector<std::string>& warnings) {
  const BinaryDeltaFit b = fit_binary(t, fopts);
  ordered_json j;
  j["model"] = "binary_dummy";
  j["Delta"] = b.delta_star;
  j["alpha"] = {b.alpha_star[0], b.alpha_star[1]};
  j["consistency"] = {b.consistency_star[0], b.consistency_star[1]};
  j["p3_dot"] = b.p3_dot;
  j["X3"] = b.X3;
  j["inner"] = fit_json(b.inner);
  warnings.push_back("two raters and two categories: fitted with an empty dummy category and "
                     "+0.5 per cell (n = " + short_number(b.inner.summary.n) + ")");
  if (req.standard_errors || req.ci_level) {
    ordered_json se;
    se["n"] = b.inner.summary.n;
    se["smoothing_applied"] = true;
    se["delta"] = opt(b.se_delta_star);
    se["alpha"] = {opt(b.se_alpha_star[0]), opt(b.se_alpha_star[1])};
    se["consistency"] = {opt(b.se_consistency_star[0]), opt(b.se_consistency_star[1])};
    j["se"] = se;
    for (const auto& w : b.warnings) warnings.push_back(w);
  }
  if (req.ci_level) {
    const double level = *req.ci_level;
    const double z = critical_value(level, req.sidedness);
    ordered_json ci;
    ci["level"] = level;
    ci["sidedness"] = sidedness_name(req.sidedness);
    ci["z"] = z;
    ci["delta"] = bound_json(wald_bound(b.delta_star, b.se_delta_star, z, req.sidedness));
    ordered_json alpha = ordered_json::array();
    ordered_json cons = ordered_json::array();
    for (int i = 0; i < 2; ++i) {
      alpha.push_back(bound_json(wald_bound(b.alpha_star[i], b.se_alpha_star[i], z, req.sidedness)));
      cons.push_back(
          bound_json(wald_bound(b.consistency_star[i], b.se_consistency_star[i], z, req.sidedness)));
    }
    ci["alpha"] = alpha;
    ci["consistency"] = cons;
    j["ci"] = ci;
  }
  if (req.goodness_of_fit) {
    j["gof"] = {{"available", false},
                {"reason", "no degrees of freedom left for two raters and two categories"}};
  }
  if (req.bootstrap_replicates > 0) j["bootstrap"] = bootstrap_json(run_bootstrap(t, req, fopts), req);
  return j;
}

ordered_json drop_rater_json(const JointCountTable& t, const FitOptions& fopts) {
  if (t.raters() < 3) throw DataError("the drop-rater sweep needs at least three raters");
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < t.raters(); ++r) {
    const JointCountTable sub = drop_rater(t, r);
    ordered_json row;
    row["dropped_rater"] = r + 1;
    if (sub.categories() == 2 && sub.raters() == 2) {
      const BinaryDeltaFit b = fit_binary(sub, fopts);
      row["model"] = "binary_dummy";
      row["Delta"] = b.delta_star;
      row["alpha"] = {b.alpha_star[0], b.alpha_star[1]};
      row["consistency"] = {b.consistency_star[0], b.consistency_star[1]};
    } else {
      const DeltaFit f = fit_delta(sub, fopts);
      row["model"] = "multi_rater";
      row["Delta"] = f.delta_total;
      row["alpha"] = array_of(f.alpha);
      row["consistency"] = array_of(f.consistency);
      row["smoothing_applied"] = f.diagnostics.smoothing_applied;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<Measure> parse_measures(std::string_view list, int raters) {
  std::vector<Measure> out;
  auto add = [&](Measure m) {
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  };
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    std::string_view item = list.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "all") {
      add(Measure::raw);
      if (raters == 2) add(Measure::cohen);
      add(Measure::hubert_r_wise);
      add(Measure::hubert_pairwise);
      add(Measure::fleiss);
      add(Measure::delta);
    } else if (item == "raw") {
      add(Measure::raw);
    } else if (item == "cohen") {
      if (raters != 2) {
        throw DataError("cohen needs exactly two raters, the table has " + std::to_string(raters));
      }
      add(Measure::cohen);
    } else if (item == "fleiss") {
      add(Measure::fleiss);
    } else if (item == "hubert-r") {
      add(Measure::hubert_r_wise);
    } else if (item == "hubert-pairwise") {
      add(Measure::hubert_pairwise);
    } else if (item == "delta") {
      add(Measure::delta);
    } else {
      throw DataError("unknown measure '" + std::string(item) + "'");
    }
    start = comma + 1;
  }
  return out;
}

std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::raw: return "raw";
    case Measure::cohen: return "cohen";
    case Measure::fleiss: return "fleiss";
    case Measure::hubert_r_wise: return "hubert_r_wise";
    case Measure::hubert_pairwise: return "hubert_pairwise";
    case Measure::delta: return "delta";
  }
  return "unknown";
}

ordered_json analyze(const JointCountTable& t, const AnalyzeRequest& req) {
  const AgreementSummary s = summarize(t);
  std::vector<std::string> warnings;
  ordered_json doc;
  doc["schema"] = kReportSchema;
  ordered_json input;
  input["categories"] = t.categories();
  input["raters"] = t.raters();
  input["subjects"] = count_value(t.total());
  if (!t.category_names().empty()) input["category_names"] = t.category_names();
  doc["input"] = input;

  FitOptions fopts;
  fopts.force_smoothing = req.force_smoothing;
  fopts.max_cells = req.max_cells;

  ordered_json kappas;
  for (Measure m : req.measures) {
    switch (m) {
      case Measure::raw: kappas["raw"] = kappa_json(raw_agreement(s)); break;
      case Measure::cohen: kappas["cohen"] = kappa_json(cohen_kappa(s)); break;
      case Measure::fleiss: kappas["fleiss"] = kappa_json(fleiss_kappa(s)); break;
      case Measure::hubert_r_wise:
        kappas["hubert_r_wise"] = kappa_json(hubert_r_wise_kappa(s));
        break;
      case Measure::hubert_pairwise:
        kappas["hubert_pairwise"] = kappa_json(hubert_pairwise_kappa(s));
        break;
      case Measure::delta: break;
    }
  }
  if (!kappas.empty()) doc["measures"] = kappas;

  const bool want_delta =
      std::find(req.measures.begin(), req.measures.end(), Measure::delta) != req.measures.end();
  if (want_delta) {
    const bool binary = t.categories() == 2 && t.raters() == 2;
    if (req.force_smoothing && !binary) warnings.push_back("+0.5 smoothing forced");
    doc["delta"] = binary ? delta_binary(t, req, fopts, warnings)
                          : delta_general(t, req, fopts, warnings);
  }

  if (req.collapsed_kappa) {
    const KappaKind kind = t.raters() == 2 ? KappaKind::cohen : KappaKind::hubert_r_wise;
    ordered_json per;
    per["kind"] = to_string(kind);
    ordered_json values = ordered_json::array();
    for (int i = 0; i < t.categories(); ++i) {
      values.push_back(opt(per_category_kappa(t, i, kind).value));
    }
    per["values"] = values;
    doc["collapsed_kappa"] = per;
  }
  if (req.drop_rater_sweep) doc["drop_rater_sweep"] = drop_rater_json(t, fopts);
  doc["warnings"] = warnings;
  return doc;
}

namespace {

std::string num(const ordered_json& v, int precision) {
  if (v.is_null()) return "n/a";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v.get<double>();
  return os.str();
}

void line(std::ostringstream& os, const std::string& label, const std::vector<std::string>& cells) {
  os << std::left << std::setw(22) << label;
  for (const auto& c : cells) os << std::right << std::setw(11) << c;
  os << '\n';
}

std::vector<std::string> nums(const ordered_json& arr, int precision) {
  std::vector<std::string> out;
  for (const auto& v : arr) out.push_back(num(v, precision));
  return out;
}

void render_delta(std::ostringstream& os, const ordered_json& d, int precision, int K, int R) {
  const bool binary = d["model"] == "binary_dummy";
  const ordered_json& f = binary ? d["inner"] : d["fit"];
  const ordered_json& top = binary ? d : f;
  os << "\nDelta model" << (binary ? " (dummy category)" : "") << '\n';
  std::vector<std::string> head;
  for (int i = 0; i < K; ++i) head.push_back("cat " + std::to_string(i + 1));
  head.push_back("overall");
  line(os, "", head);

  auto with_total = [&](const ordered_json& arr, const ordered_json& total) {
    auto cells = nums(arr, precision);
    cells.push_back(num(total, precision));
    return cells;
  };
  line(os, "alpha", with_total(top["alpha"], top["Delta"]));
  if (!binary) {
    for (int r = 0; r < R; ++r) {
      std::vector<std::string> cells;
      for (int i = 0; i < K; ++i) cells.push_back(num(f["pi"][i][r], precision));
      line(os, "pi rater " + std::to_string(r + 1), cells);
    }
  }
  line(os, "consistency", nums(top["consistency"], precision));
  if (d.contains("se")) {
    const ordered_json& se = d["se"];
    line(os, "SE alpha", with_total(se["alpha"], se["delta"]));
    line(os, "SE consistency", nums(se["consistency"], precision));
  }
  if (d.contains("ci")) {
    const ordered_json& ci = d["ci"];
    std::ostringstream label;
    label << num(ci["level"], 2) << ' ' << ci["sidedness"].get<std::string>();
    const std::string side = ci["sidedness"].get<std::string>();
    line(os, "CI Delta " + label.str(),
         {side == "upper" ? "-inf" : num(ci["delta"]["lower"], precision),
          side == "lower" ? "inf" : num(ci["delta"]["upper"], precision)});
  }
  if (d.contains("gof")) {
    const ordered_json& g = d["gof"];
    if (g.contains("available")) {
      os << "goodness of fit: " << g["reason"].get<std::string>() << '\n';
    } else {
      os << "chi-square " << num(g["chi_square"], precision) << ", df " << num(g["df"], 0)
         << ", p " << num(g["p_value"], precision) << "; expected < 1 in "
         << g["cells_expected_lt_1"].get<int>() << " cells, <= 5 in "
         << g["cells_expected_le_5"].get<int>() << " of " << g["cells"].get<int>() << '\n';
    }
  }
  if (d.contains("bootstrap")) {
    const ordered_json& b = d["bootstrap"];
    os << "bootstrap (" << b["kind"].get<std::string>() << ", " << b["replicates"].get<int>()
       << " replicates, " << b["degenerate"].get<int>() << " degenerate)\n";
    line(os, "  SE alpha", with_total(b["se_alpha"], b["se_delta"]));
    line(os, "  SE consistency", nums(b["se_consistency"], precision));
  }
}

}  // namespace

std::string render_table(const ordered_json& doc, int precision) {
  std::ostringstream os;
  const ordered_json& in = doc["input"];
  const int K = in["categories"].get<int>();
  const int R = in["raters"].get<int>();
  os << "subjects " << num(in["subjects"], 1)
     << ", raters " << R << ", categories " << K << '\n';
  if (doc.contains("measures")) {
    os << '\n';
    for (const auto& [name, k] : doc["measures"].items()) {
      line(os, name, {num(k["value"], precision)});
    }
  }
  if (doc.contains("delta")) render_delta(os, doc["delta"], precision, K, R);
  if (doc.contains("collapsed_kappa")) {
    const ordered_json& c = doc["collapsed_kappa"];
    os << '\n';
    line(os, "collapsed " + c["kind"].get<std::string>(), nums(c["values"], precision));
  }
  if (doc.contains("drop_rater_sweep")) {
    os << "\nwithout rater         overall  consistency per category\n";
    for (const auto& row : doc["drop_rater_sweep"]) {
      std::vector<std::string> cells{num(row["Delta"], precision)};
      for (const auto& v : row["consistency"]) cells.push_back(num(v, precision));
      line(os, std::to_string(row["dropped_rater"].get<int>()), cells);
    }
  }
  for (const auto& w : doc["warnings"]) os << "note: " << w.get<std::string>() << '\n';
  return os.str();
}

}  // namespace concordia
