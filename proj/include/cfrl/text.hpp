#pragma once

// Small shared helpers for the line-oriented text formats (SCM / POMDP
// description files, policies, levels, configs) and for canonical number
// formatting in CSV output.

#include <string>
#include <string_view>
#include <vector>

namespace cfrl {

std::string trim(std::string_view s);

// Splits on commas, trimming each piece; empty input gives an empty list.
std::vector<std::string> split_list(std::string_view s);

// Whitespace-separated tokens.
std::vector<std::string> split_ws(std::string_view s);

// Shortest round-trip decimal form (via to_chars); "nan" / "inf" spelled out.
std::string format_double(double v);

// strtod with full-consumption check; the context string feeds the error.
double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

}  // namespace cfrl
