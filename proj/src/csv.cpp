#include "raterlab/csv.hpp"

#include <fmt/format.h>

#include <charconv>

#include "raterlab/error.hpp"

namespace raterlab::csv {

std::vector<Row> parse(const std::string& text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                any = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r':
                break;
            case '\n':
                if (any || !field.empty()) {
                    row.push_back(std::move(field));
                    rows.push_back(std::move(row));
                }
                row.clear();
                field.clear();
                any = false;
                break;
            default:
                field += c;
                any = true;
        }
    }
    if (quoted) throw Error("csv: unterminated quoted field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += escape(row[i]);
    }
    return out;
}

std::string number(double v) { return fmt::format("{}", v); }

std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

double to_double(const std::string& field, const char* col) {
    double v = 0.0;
    const char* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw Error(std::string("csv: column ") + col + ": '" + field + "' is not a number");
    return v;
}

std::optional<double> to_optional_double(const std::string& field, const char* col) {
    if (field.empty()) return std::nullopt;
    return to_double(field, col);
}

std::size_t column(const Row& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw Error("csv: missing column '" + name + "'");
}

}  // namespace raterlab::csv
