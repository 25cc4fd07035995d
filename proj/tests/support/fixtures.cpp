#include "fixtures.hpp"

#include "concordia/csv_input.hpp"

#ifndef CONCORDIA_FIXTURE_DIR
#error "CONCORDIA_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace concordia::testing {

std::filesystem::path fixture_path(const std::string& file) {
  return std::filesystem::path(CONCORDIA_FIXTURE_DIR) / file;
}

JointCountTable load_fixture(const std::string& name) {
  LoadOptions options;
  options.format = InputFormat::counts;
  return load_table(fixture_path(name + ".counts"), options);
}

}  // namespace concordia::testing
