#pragma once

#include <optional>
#include <string>
#include <vector>

namespace raterlab::csv {

using Row = std::vector<std::string>;

/// Minimal RFC-4180 reader: quoted fields, doubled quotes, LF or CRLF.
std::vector<Row> parse(const std::string& text);

std::string escape(const std::string& field);
std::string join(const Row& row);

/// Shortest round-trip decimal form.
std::string number(double v);
/// Empty string for an unset value.
std::string number(const std::optional<double>& v);

double to_double(const std::string& field, const char* column);
std::optional<double> to_optional_double(const std::string& field, const char* column);

/// Column lookup by header name; throws when missing.
std::size_t column(const Row& header, const std::string& name);

}  // namespace raterlab::csv
