#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "benchstitch/error.hpp"

namespace benchstitch::csv {

// Splits one line into fields. Double quotes delimit fields that contain
// commas; "" inside a quoted field is a literal quote.
inline std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError(line_no, "unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, std::size_t line_no, std::string_view column) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && *first == ' ') ++first;
    while (last != first && last[-1] == ' ') --last;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) {
        throw ParseError(line_no, "column '" + std::string(column) + "': not a number: '" + std::string(s) + "'");
    }
    return v;
}

inline bool parse_bool(std::string_view s, std::size_t line_no, std::string_view column) {
    if (s == "true" || s == "TRUE" || s == "True" || s == "1") return true;
    if (s == "false" || s == "FALSE" || s == "False" || s == "0") return false;
    throw ParseError(line_no, "column '" + std::string(column) + "': not a boolean: '" + std::string(s) + "'");
}

// A header-checked table: every required column must be present and no
// unknown column is accepted. Column order is free.
class Reader {
public:
    Reader(std::istream& in, std::vector<std::string> required, std::vector<std::string> optional = {})
        : in_(in) {
        std::string header;
        if (!std::getline(in_, header)) throw SchemaError("empty file: missing header row");
        line_no_ = 1;
        strip_cr(header);
        if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
        const auto names = split_line(header, 1);
        std::set<std::string> known(required.begin(), required.end());
        known.insert(optional.begin(), optional.end());
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (!known.count(names[i])) throw SchemaError("unknown column '" + names[i] + "'");
            if (!index_.emplace(names[i], i).second) throw SchemaError("duplicate column '" + names[i] + "'");
        }
        for (const auto& r : required) {
            if (!index_.count(r)) throw SchemaError("missing required column '" + r + "'");
        }
        width_ = names.size();
    }

    // Returns false at end of input. Blank lines are skipped.
    bool next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            strip_cr(line);
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            fields_ = split_line(line, line_no_);
            if (fields_.size() != width_) {
                throw ParseError(line_no_, "expected " + std::to_string(width_) + " fields, found " +
                                               std::to_string(fields_.size()));
            }
            return true;
        }
        return false;
    }

    bool has(const std::string& column) const { return index_.count(column) != 0; }

    const std::string& get(const std::string& column) const {
        static const std::string empty;
        auto it = index_.find(column);
        return it == index_.end() ? empty : fields_[it->second];
    }

    std::size_t line() const { return line_no_; }

private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }

    std::istream& in_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> fields_;
    std::size_t width_ = 0;
    std::size_t line_no_ = 0;
};

}  // namespace benchstitch::csv
