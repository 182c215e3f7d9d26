#include "boundedcp/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "boundedcp/errors.hpp"

namespace boundedcp {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_int(const std::string& field, long long* out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

ReadResult read_series(const std::string& path,
                       std::optional<int> upper_bound) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open '" + path + "' for reading");

  std::vector<int> counts;
  std::vector<int> count_lines;  // source line of each observation
  std::string line;
  int line_no = 0;
  int data_lines = 0;
  bool csv_mode = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const bool has_comma = line.find(',') != std::string::npos;
    if (data_lines == 0) {
      csv_mode = has_comma;
    } else if (has_comma != csv_mode) {
      throw ParseError(line_no, csv_mode
                                    ? "expected 't,count' row, got a bare value"
                                    : "unexpected ',' in single-column input");
    }

    std::string value_field = line;
    if (csv_mode) {
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      if (fields.size() != 2) {
        throw ParseError(line_no, "expected exactly two fields 't,count'");
      }
      long long t_val = 0;
      if (data_lines == 0 && !parse_int(fields[0], &t_val)) {
        // Tolerate a single header row such as "t,count".
        ++data_lines;  // consume the header slot so only one is skipped
        continue;
      }
      value_field = fields[1];
    }

    long long v = 0;
    if (!parse_int(value_field, &v)) {
      throw ParseError(line_no, "cannot parse count '" + trim(value_field) + "'");
    }
    if (v < 0) throw ParseError(line_no, "negative count");
    if (v > 1000000) throw ParseError(line_no, "count exceeds supported range");
    counts.push_back(static_cast<int>(v));
    count_lines.push_back(line_no);
    ++data_lines;
  }

  if (counts.size() < 2) {
    throw ParseError(line_no, "need at least 2 observations, got " +
                                  std::to_string(counts.size()));
  }

  ReadResult out;
  out.series.counts = counts;
  if (upper_bound) {
    if (*upper_bound < 1) throw OutOfDomain("upper bound must be >= 1");
    out.series.upper_bound = *upper_bound;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] > *upper_bound) {
        throw ParseError(count_lines[i],
                         "count " + std::to_string(counts[i]) +
                             " exceeds the stated upper bound " +
                             std::to_string(*upper_bound));
      }
    }
  } else {
    const int maxv = *std::max_element(counts.begin(), counts.end());
    if (maxv < 1) {
      throw ParseError(count_lines.back(),
                       "all counts are zero; cannot infer the upper bound"
                       " — pass it explicitly");
    }
    out.series.upper_bound = maxv;
    out.inferred_bound = true;
    out.warning = "upper bound not given; inferred N=" + std::to_string(maxv) +
                  " from the sample maximum (pass it explicitly if the"
                  " true range is larger)";
  }
  check_series(out.series);
  return out;
}

void write_series(const std::string& path, const BoundedSeries& series,
                  const std::vector<std::string>& header_comments) {
  std::ofstream out(path, std::ios::binary);  // binary → LF on every platform
  if (!out) throw ParseError(0, "cannot open '" + path + "' for writing");
  for (const auto& c : header_comments) out << "# " << c << "\n";
  for (int v : series.counts) out << v << "\n";
  if (!out) throw ParseError(0, "failed while writing '" + path + "'");
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open '" + path + "' for checksum");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return s;
}

}  // namespace boundedcp
