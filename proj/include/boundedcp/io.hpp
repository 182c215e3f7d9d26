#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boundedcp/bar_model.hpp"

namespace boundedcp {

struct ReadResult {
  BoundedSeries series;
  bool inferred_bound = false;
  std::string warning;  // non-empty when the bound was inferred
};

// Reads a count series. Format: one integer per line; '#' starts a comment;
// blank lines are skipped. Two-column "t,count" CSV is auto-detected from
// the first data line (one header line tolerated). When `upper_bound` is
// absent it is inferred as the sample maximum — flagged in the result so
// callers can warn loudly. Throws ParseError with a 1-based line number.
ReadResult read_series(const std::string& path,
                       std::optional<int> upper_bound = {});

// Writes one count per line, preceded by verbatim header lines (each
// emitted as a '#' comment).
void write_series(const std::string& path, const BoundedSeries& series,
                  const std::vector<std::string>& header_comments = {});

// FNV-1a 64-bit digest of a file's bytes; used as the input checksum in
// run manifests. Throws Error when the file cannot be read.
std::uint64_t fnv1a_file(const std::string& path);
std::string hex64(std::uint64_t value);

}  // namespace boundedcp
