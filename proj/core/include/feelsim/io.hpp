#pragma once

#include <string>
#include <vector>

namespace feelsim {

// Shortest decimal form that round-trips a double exactly (17 significant
// digits, C locale, never locale-dependent).
std::string fmt_g17(double v);

// Fixed-precision form for human-facing text output.
std::string fmt_fixed(double v, int digits = 6);

// Writes content to path via a temp file + rename so readers never observe a
// partial file. Creates parent directories. Throws NumericError on IO failure.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);  // throws ConfigError if missing

std::string join_csv_row(const std::vector<std::string>& cells);

}  // namespace feelsim
