#include "concordia/csv_input.hpp"

#include "concordia/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace concordia {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail_at(std::size_t line_no, const std::string& message) {
  throw DataError("line " + std::to_string(line_no) + ": " + message);
}

// Reads the next line, validating its encoding. Returns false at EOF.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  if (!std::getline(in, line)) return false;
  ++line_no;
  if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (!is_valid_utf8(line)) fail_at(line_no, "input is not valid UTF-8");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

long parse_index(std::string_view field, std::size_t line_no) {
  long v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    fail_at(line_no, "expected an integer category index, got '" + std::string(field) + "'");
  }
  return v;
}

double parse_count(std::string_view field, std::size_t line_no) {
  // std::from_chars for double is not available in every libstdc++ we target.
  std::string text(field);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    fail_at(line_no, "expected a numeric count, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) {
    fail_at(line_no, "expected a numeric count, got '" + text + "'");
  }
  if (v < 0.0) fail_at(line_no, "negative count " + text);
  return v;
}

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "long") return InputFormat::long_csv;
  if (name == "wide") return InputFormat::wide_csv;
  if (name == "counts") return InputFormat::counts;
  throw DataError("unknown input format '" + std::string(name) + "' (expected long|wide|counts)");
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    int extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + static_cast<std::size_t>(extra) >= text.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += static_cast<std::size_t>(extra) + 1;
  }
  return true;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"' && trim(current).empty()) {
      current.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.emplace_back(was_quoted ? current : std::string(trim(current)));
      current.clear();
      was_quoted = false;
    } else {
      current += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  fields.emplace_back(was_quoted ? current : std::string(trim(current)));
  return fields;
}

std::vector<RatingRecord> read_long_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line, line_no) && is_blank(line)) {
  }
  if (in.eof() && is_blank(line)) throw DataError("long CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() != 3 || lower(header[0]) != "subject" || lower(header[1]) != "rater" ||
      lower(header[2]) != "category") {
    fail_at(line_no, "expected header 'subject,rater,category'");
  }
  std::vector<RatingRecord> records;
  while (next_line(in, line, line_no)) {
    if (is_blank(line)) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      fail_at(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) fail_at(line_no, "empty field");
    }
    records.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
  }
  return records;
}

RatingMatrix read_wide_csv(std::istream& in, const IngestOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line, line_no) && is_blank(line)) {
  }
  if (in.eof() && is_blank(line)) throw DataError("wide CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || lower(header[0]) != "subject") {
    fail_at(line_no, "expected header 'subject,r1,...,rR' with at least two raters");
  }
  // The header names the raters; the records path then handles ordering.
  std::vector<RatingRecord> records;
  while (next_line(in, line, line_no)) {
    if (is_blank(line)) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail_at(line_no, "ragged row: expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (fields[k].empty()) fail_at(line_no, "missing rating");
      records.push_back({fields[0], header[k], fields[k]});
    }
  }
  IngestOptions opts = options;
  if (opts.rater_order.empty()) opts.rater_order.assign(header.begin() + 1, header.end());
  return ingest_long(records, opts);
}

JointCountTable read_counts(std::istream& in, int categories) {
  std::string line;
  std::size_t line_no = 0;
  std::map<Profile, double> cells;
  int raters = -1;
  long max_index = 0;
  while (next_line(in, line, line_no)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_csv_line(body);
    if (fields.size() < 3) {
      fail_at(line_no, "expected 'i1,...,iR,count' with at least two raters");
    }
    const int r_here = static_cast<int>(fields.size()) - 1;
    if (raters < 0) {
      raters = r_here;
    } else if (r_here != raters) {
      fail_at(line_no, "ragged row: expected " + std::to_string(raters + 1) + " fields, found " +
                           std::to_string(fields.size()));
    }
    Profile profile(static_cast<std::size_t>(raters));
    for (int r = 0; r < raters; ++r) {
      const long idx = parse_index(fields[r], line_no);
      if (idx < 1) fail_at(line_no, "category indices are 1-based");
      if (categories > 0 && idx > categories) {
        fail_at(line_no, "category index " + std::to_string(idx) + " exceeds K = " +
                             std::to_string(categories));
      }
      max_index = std::max(max_index, idx);
      profile[r] = static_cast<int>(idx - 1);
    }
    const double count = parse_count(fields.back(), line_no);
    auto [it, inserted] = cells.emplace(std::move(profile), count);
    if (!inserted) fail_at(line_no, "duplicate cell");
  }
  if (raters < 0) throw DataError("counts file has no data lines");
  const int K = categories > 0 ? categories : static_cast<int>(max_index);
  return JointCountTable(K, raters, std::move(cells));
}

JointCountTable load_table(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + path.string());
  switch (options.format) {
    case InputFormat::long_csv:
      return joint_counts(ingest_long(read_long_csv(in), options.ingest));
    case InputFormat::wide_csv:
      return joint_counts(read_wide_csv(in, options.ingest));
    case InputFormat::counts:
      return read_counts(in, options.categories);
  }
  throw DataError("unsupported input format");
}

void write_long_csv(std::ostream& out, const RatingMatrix& m) {
  out << "subject,rater,category\n";
  for (int s = 0; s < m.subjects(); ++s) {
    const std::string subject =
        m.subject_ids().empty() ? std::to_string(s + 1) : m.subject_ids()[s];
    for (int r = 0; r < m.raters(); ++r) {
      const std::string rater = m.rater_names().empty() ? "r" + std::to_string(r + 1)
                                                        : m.rater_names()[r];
      const int c = m.label(s, r);
      const std::string category =
          m.category_names().empty() ? std::to_string(c + 1) : m.category_names()[c];
      out << subject << ',' << rater << ',' << category << '\n';
    }
  }
}

void write_counts(std::ostream& out, const JointCountTable& t) {
  for (const auto& [profile, count] : t.cells()) {
    for (int c : profile) out << c + 1 << ',';
    std::ostringstream num;
    num.precision(17);
    num << count;
    out << num.str() << '\n';
  }
}

}  // namespace concordia
