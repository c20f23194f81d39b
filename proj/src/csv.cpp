#include "invstab/csv.hpp"

#include "invstab/errors.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace invstab {

namespace {

std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string r = "\"";
    for (char c : s) {
        if (c == '"') r += '"';
        r += c;
    }
    r += '"';
    return r;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                in_quotes = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

bool parse_double(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) out_ += ',';
        out_ += quote(header_[i]);
    }
    out_ += '\n';
}

void CsvTable::separator() {
    if (col_ >= header_.size()) throw NumericError("csv row has more cells than the header");
    if (col_ > 0) out_ += ',';
    ++col_;
}

CsvTable& CsvTable::cell(double v) {
    separator();
    out_ += format_double(v);
    return *this;
}

CsvTable& CsvTable::cell(long long v) {
    separator();
    out_ += std::to_string(v);
    return *this;
}

CsvTable& CsvTable::cell(std::string_view text) {
    separator();
    out_ += quote(text);
    return *this;
}

void CsvTable::end_row() {
    while (col_ < header_.size()) separator();
    out_ += '\n';
    col_ = 0;
    ++rows_;
}

CsvData read_csv(const std::string& text) {
    CsvData d;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            d.header = split_line(line);
            first = false;
        } else {
            d.rows.push_back(split_line(line));
        }
    }
    return d;
}

}  // namespace invstab
