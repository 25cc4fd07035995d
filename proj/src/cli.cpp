#include "concordia/cli.hpp"

#include "concordia/csv_input.hpp"
#include "concordia/errors.hpp"
#include "concordia/model_tools.hpp"
#include "concordia/report.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace concordia {

namespace {

struct AnalyzeArgs {
  std::string input;
  std::string format = "auto";
  std::string measures = "all";
  bool se = false;
  bool gof = false;
  std::optional<double> ci;
  bool one_sided = false;
  double alpha = 0.05;
  bool drop_rater_sweep = false;
  bool collapsed_kappa = false;
  std::string output = "json";
  int precision = 4;
  std::uint64_t seed = 1;
  int bootstrap = 0;
  bool parametric = false;
  bool smooth = false;
  bool force_general = false;
  int categories = 0;
  std::vector<std::string> category_order;
};

struct SimulateArgs {
  std::string params;
  std::string output;
  std::optional<long long> n;
  std::optional<std::uint64_t> seed;
};

std::size_t max_cells_from_env() {
  const char* v = std::getenv("CONCORDIA_MAX_CELLS");
  if (v == nullptr || *v == '\0') return kDefaultMaxDenseCells;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (*end != '\0' || x == 0) {
    throw DataError(std::string("CONCORDIA_MAX_CELLS must be a positive integer, got '") + v + "'");
  }
  return static_cast<std::size_t>(x);
}

InputFormat detect_format(const std::string& path) {
  if (path.size() >= 7 && path.compare(path.size() - 7, 7, ".counts") == 0) {
    return InputFormat::counts;
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file " + path);
  std::string header;
  std::getline(in, header);
  const auto fields = split_csv_line(header);
  if (fields.size() == 3 && fields[0] == "subject" && fields[1] == "rater" &&
      fields[2] == "category") {
    return InputFormat::long_csv;
  }
  if (!fields.empty() && fields[0] == "subject") return InputFormat::wide_csv;
  return InputFormat::counts;
}

int run_analyze(const AnalyzeArgs& a, std::ostream& out) {
  LoadOptions lo;
  lo.format = a.format == "auto" ? detect_format(a.input) : parse_input_format(a.format);
  lo.categories = a.categories;
  lo.ingest.category_order = a.category_order;
  if (lo.format != InputFormat::counts && a.categories > 0 && a.category_order.empty()) {
    for (int i = 1; i <= a.categories; ++i) lo.ingest.category_order.push_back(std::to_string(i));
  }
  const JointCountTable t = load_table(a.input, lo);
  if (a.force_general && t.categories() == 2 && t.raters() == 2) {
    throw DataError(
        "--force-general is not available for two raters and two categories: the general "
        "model has more parameters than free cells");
  }
  if (a.precision < 0 || a.precision > 17) throw DataError("--precision must lie in 0..17");

  AnalyzeRequest req;
  req.measures = parse_measures(a.measures, t.raters());
  req.standard_errors = a.se;
  req.goodness_of_fit = a.gof;
  req.alpha = a.alpha;
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw DataError("--alpha must lie in (0, 1)");
  req.ci_level = a.ci;
  req.sidedness = a.one_sided ? Sidedness::lower : Sidedness::two_sided;
  if (a.one_sided && !a.ci) req.ci_level = 1.0 - a.alpha;
  req.drop_rater_sweep = a.drop_rater_sweep;
  req.collapsed_kappa = a.collapsed_kappa;
  req.bootstrap_replicates = a.bootstrap;
  req.parametric_bootstrap = a.parametric;
  req.seed = a.seed;
  req.force_smoothing = a.smooth;
  req.max_cells = max_cells_from_env();
  if (a.bootstrap != 0 && a.bootstrap < 100) {
    throw DataError("--bootstrap needs at least 100 replicates");
  }

  const nlohmann::ordered_json doc = analyze(t, req);
  if (a.output == "json") {
    out << doc.dump(2) << '\n';
  } else {
    out << render_table(doc, a.precision);
  }
  return kExitOk;
}

NewDeltaParams params_from_json(const nlohmann::json& j) {
  if (!j.contains("alpha") || !j.contains("pi")) {
    throw DataError("parameter file needs 'alpha' and 'pi'");
  }
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  const auto pi = j.at("pi").get<std::vector<std::vector<double>>>();
  const auto K = static_cast<Eigen::Index>(alpha.size());
  const auto R = static_cast<Eigen::Index>(pi.size());
  Eigen::VectorXd a(K);
  for (Eigen::Index i = 0; i < K; ++i) a(i) = alpha[static_cast<std::size_t>(i)];
  Eigen::MatrixXd p(K, R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto& col = pi[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(col.size()) != K) {
      throw DataError("'pi' must hold one distribution over the K categories per rater");
    }
    for (Eigen::Index i = 0; i < K; ++i) p(i, r) = col[static_cast<std::size_t>(i)];
  }
  return make_params(std::move(a), std::move(p));
}

int run_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  std::ifstream in(a.params);
  if (!in) throw DataError("cannot open parameter file " + a.params);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid parameter file: ") + e.what());
  }
  NewDeltaParams p;
  long long n = 0;
  std::uint64_t seed = 1;
  try {
    p = params_from_json(j);
    n = a.n ? *a.n : j.value("n", 0LL);
    seed = a.seed ? *a.seed : j.value("seed", std::uint64_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid parameter file: ") + e.what());
  }
  if (n <= 0 || n > 100'000'000) throw DataError("the number of subjects must lie in 1..1e8");
  const RatingMatrix m = sample_model(p, static_cast<int>(n), seed);

  const AgreementSummary s = summarize(joint_counts(m));
  nlohmann::ordered_json summary;
  summary["schema"] = kReportSchema;
  summary["subjects"] = n;
  summary["seed"] = seed;
  summary["unanimous"] = s.p_total;
  nlohmann::ordered_json marg = nlohmann::ordered_json::array();
  for (int r = 0; r < s.raters; ++r) {
    nlohmann::ordered_json col = nlohmann::ordered_json::array();
    for (int i = 0; i < s.categories; ++i) col.push_back(s.t(i, r));
    marg.push_back(col);
  }
  summary["rater_marginals"] = marg;

  if (a.output.empty()) {
    write_long_csv(out, m);
    err << summary.dump() << '\n';
  } else {
    std::ofstream f(a.output, std::ios::binary);
    if (!f) throw DataError("cannot write " + a.output);
    write_long_csv(f, m);
    out << summary.dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agreement among raters: kappa coefficients and the delta model"};
  app.require_subcommand(1);

  AnalyzeArgs aa;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "Analyze a table of ratings");
  analyze_cmd->add_option("--input", aa.input, "Input file")->required();
  analyze_cmd->add_option("--format", aa.format, "long, wide, counts or auto")
      ->check(CLI::IsMember({"auto", "long", "wide", "counts"}));
  analyze_cmd->add_option("--measures", aa.measures,
                          "raw,cohen,fleiss,hubert-r,hubert-pairwise,delta or all");
  analyze_cmd->add_flag("--se", aa.se, "Standard errors of the delta estimates");
  analyze_cmd->add_flag("--gof", aa.gof, "Chi-square goodness of fit of the delta model");
  analyze_cmd->add_option("--ci", aa.ci, "Confidence level of Wald bounds");
  analyze_cmd->add_flag("--one-sided", aa.one_sided, "Lower one-sided bounds");
  analyze_cmd->add_option("--alpha", aa.alpha, "Significance level (default 0.05)");
  analyze_cmd->add_flag("--drop-rater-sweep", aa.drop_rater_sweep, "Refit leaving out each rater");
  analyze_cmd->add_flag("--collapsed-kappa", aa.collapsed_kappa, "Kappa of each category vs the rest");
  analyze_cmd->add_option("--output", aa.output, "json or table")
      ->check(CLI::IsMember({"json", "table"}));
  analyze_cmd->add_option("--precision", aa.precision, "Decimals in table output");
  analyze_cmd->add_option("--seed", aa.seed, "Bootstrap seed");
  analyze_cmd->add_option("--bootstrap", aa.bootstrap, "Bootstrap replicates");
  analyze_cmd->add_flag("--parametric", aa.parametric, "Resample from the fitted model");
  analyze_cmd->add_flag("--smooth", aa.smooth, "Add 0.5 to every cell before fitting");
  analyze_cmd->add_flag("--force-general", aa.force_general,
                        "Refuse the dummy-category route (rejected for 2 x 2 tables)");
  analyze_cmd->add_option("--categories", aa.categories, "Number of categories");
  analyze_cmd->add_option("--category-order", aa.category_order, "Category labels in order")
      ->delimiter(',');

  SimulateArgs sa;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Sample ratings from the delta model");
  simulate_cmd->add_option("--params", sa.params, "JSON parameter file")->required();
  simulate_cmd->add_option("--output", sa.output, "Output CSV (stdout when omitted)");
  simulate_cmd->add_option("--n", sa.n, "Number of subjects");
  simulate_cmd->add_option("--seed", sa.seed, "Random seed");

  std::vector<const char*> argv{"concordia"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitDataError;
  }

  try {
    if (analyze_cmd->parsed()) return run_analyze(aa, out);
    return run_simulate(sa, out, err);
  } catch (const DegenerateFitError& e) {
    err << "error: " << e.what() << '\n';
    if (!e.diagnostics().empty()) err << e.diagnostics() << '\n';
    return kExitDegenerate;
  } catch (const SingularVarianceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const UnreliableBootstrapError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace concordia
