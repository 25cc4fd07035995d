#pragma once

#include "concordia/agreement.hpp"

#include <filesystem>
#include <string>

namespace concordia::testing {

std::filesystem::path fixture_path(const std::string& file);

// Loads tests/fixtures/<name>.counts.
JointCountTable load_fixture(const std::string& name);

}  // namespace concordia::testing
