#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace recomed {

// Medicine identity normalization: trim, collapse internal whitespace runs to
// one space, ASCII-uppercase. Non-ASCII bytes pass through untouched.
std::string normalize_name(std::string_view raw);

std::string_view trim(std::string_view s);

// Splits one delimited line. Fields may be double-quoted; a doubled quote
// inside a quoted field is a literal quote.
std::vector<std::string> split_delimited(std::string_view line, char delim);

// Quotes a field for comma-separated output when needed.
std::string csv_field(std::string_view field);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace recomed
