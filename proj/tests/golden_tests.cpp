#include "fixtures.hpp"

#include "concordia/report.hpp"

#include "doctest.h"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#ifndef CONCORDIA_GOLDEN_DIR
#error "CONCORDIA_GOLDEN_DIR must point at tests/golden"
#endif

using namespace concordia;
using nlohmann::ordered_json;

namespace {

// Numbers may drift by this much across compilers and platforms.
constexpr double kRelTol = 1e-9;
constexpr double kAbsTol = 1e-12;

bool updating() {
  const char* v = std::getenv("CONCORDIA_UPDATE_GOLDEN");
  return v != nullptr && std::string(v) == "1";
}

AnalyzeRequest golden_request(int raters) {
  AnalyzeRequest req;
  req.measures = parse_measures("all", raters);
  req.standard_errors = true;
  req.goodness_of_fit = true;
  req.ci_level = 0.95;
  req.collapsed_kappa = true;
  req.drop_rater_sweep = raters >= 3;
  return req;
}

// Empty when equal, otherwise the path of the first difference.
std::string compare(const ordered_json& a, const ordered_json& b, const std::string& path) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (std::abs(x - y) <= kAbsTol + kRelTol * std::max(std::abs(x), std::abs(y))) return {};
    return path + ": " + a.dump() + " vs " + b.dump();
  }
  if (a.type() != b.type()) return path + ": type " + a.type_name() + " vs " + b.type_name();
  if (a.is_object()) {
    if (a.size() != b.size()) return path + ": " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " keys";
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
      if (ia.key() != ib.key()) return path + ": key " + ia.key() + " vs " + ib.key();
      if (auto d = compare(ia.value(), ib.value(), path + "." + ia.key()); !d.empty()) return d;
    }
    return {};
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return path + ": length " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (auto d = compare(a[i], b[i], path + "[" + std::to_string(i) + "]"); !d.empty()) return d;
    }
    return {};
  }
  return a == b ? std::string{} : path + ": " + a.dump() + " vs " + b.dump();
}

void check_golden(const std::string& name) {
  const JointCountTable t = testing::load_fixture(name);
  const ordered_json report = analyze(t, golden_request(t.raters()));
  const std::filesystem::path file = std::filesystem::path(CONCORDIA_GOLDEN_DIR) / (name + ".json");
  if (updating()) {
    std::ofstream(file) << report.dump(2) << '\n';
    MESSAGE("wrote " << file.string());
    return;
  }
  std::ifstream in(file);
  REQUIRE_MESSAGE(in.good(), "missing " << file.string() << "; run with CONCORDIA_UPDATE_GOLDEN=1");
  const ordered_json expected = ordered_json::parse(in);
  const std::string diff = compare(report, expected, name);
  CHECK_MESSAGE(diff.empty(), diff);
}

}  // namespace

TEST_CASE("golden report, two raters") { check_golden("table1"); }
TEST_CASE("golden report, three raters") { check_golden("table2"); }
TEST_CASE("golden report, marginal imbalance") { check_golden("table3"); }

TEST_CASE("the comparison itself") {
  const ordered_json a = ordered_json::parse(R"({"x": [1.0, 2.0], "s": "v"})");
  CHECK(compare(a, ordered_json::parse(R"({"x": [1.0000000000001, 2.0], "s": "v"})"), "a").empty());
  CHECK_FALSE(compare(a, ordered_json::parse(R"({"x": [1.001, 2.0], "s": "v"})"), "a").empty());
  CHECK_FALSE(compare(a, ordered_json::parse(R"({"s": "v", "x": [1.0, 2.0]})"), "a").empty());
  CHECK_FALSE(compare(a, ordered_json::parse(R"({"x": [1.0], "s": "v"})"), "a").empty());
}
