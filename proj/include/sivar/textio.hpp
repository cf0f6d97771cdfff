#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sivar::textio {

/// printf-style %.{digits}g in the C locale; "nan"/"inf" spelled out.
std::string format_number(double v, int significant_digits = 9);

/// Rounds through the decimal text representation, so values exported at
/// `significant_digits` compare equal to what a reader will parse back.
double round_significant(double v, int significant_digits = 9);

/// Strict whole-token parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view token, double& out);
bool parse_int(std::string_view token, long long& out);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line);
/// Quotes a field when it contains a comma, quote, or leading/trailing space.
std::string csv_field(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: whole buffer, binary mode.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace sivar::textio
