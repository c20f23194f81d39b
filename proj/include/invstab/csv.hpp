#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace invstab {

/// Shortest-stable text for a double: 17 significant digits, '.' decimal,
/// "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);

/// Parses a full token as a double; false on trailing text or overflow.
bool parse_double(std::string_view text, double& out);

/// RFC-4180-style table with an LF line terminator.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    CsvTable& cell(double v);
    CsvTable& cell(long long v);
    CsvTable& cell(std::string_view text);
    void end_row();

    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_; }
    const std::string& text() const { return out_; }

private:
    void separator();

    std::vector<std::string> header_;
    std::string out_;
    std::size_t col_ = 0;
    std::size_t rows_ = 0;
};

/// Minimal reader for files written by CsvTable (no embedded newlines).
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvData read_csv(const std::string& text);

}  // namespace invstab
