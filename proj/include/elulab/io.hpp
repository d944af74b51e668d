#pragma once

// Small I/O helpers shared by the CSV/JSON writers and the CLI: shortest
// round-trip double formatting and atomic file writes (temp + rename) so an
// interrupted run never leaves a truncated artifact behind.

#include <string>

namespace elulab::io {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Write content to path atomically: temp file in the same directory, then
/// rename over the target. Throws IoError on any failure.
void write_file_atomic(const std::string& path, const std::string& content);

/// Read a whole file; throws IoError if it cannot be opened.
std::string read_file(const std::string& path);

} // namespace elulab::io
