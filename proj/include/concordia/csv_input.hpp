#pragma once

// Readers for the three accepted input layouts:
//
//   long    header `subject,rater,category`, one rating per line
//   wide    header `subject,r1,...,rR`, one subject per line
//   counts  lines `i1,...,iR,count` with 1-based category indices;
//           blank lines and lines starting with '#' are ignored
//
// All readers reject non-UTF-8 bytes, ragged rows and negative counts with
// DataError, quoting the offending line number.

#include "concordia/agreement.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace concordia {

enum class InputFormat { long_csv, wide_csv, counts };

InputFormat parse_input_format(std::string_view name);

std::vector<std::string> split_csv_line(std::string_view line);
bool is_valid_utf8(std::string_view text);

std::vector<RatingRecord> read_long_csv(std::istream& in);
RatingMatrix read_wide_csv(std::istream& in, const IngestOptions& options = {});

// `categories` = 0 infers K as the largest index seen.
JointCountTable read_counts(std::istream& in, int categories = 0);

struct LoadOptions {
  InputFormat format = InputFormat::counts;
  IngestOptions ingest;
  int categories = 0;
};

JointCountTable load_table(const std::filesystem::path& path, const LoadOptions& options);

void write_long_csv(std::ostream& out, const RatingMatrix& m);
void write_counts(std::ostream& out, const JointCountTable& t);

}  // namespace concordia
