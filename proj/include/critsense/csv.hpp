// Minimal CSV emission and parsing: comma separated, one header row, '#'-prefixed
// comment lines, doubles at 17 significant digits so values round-trip exactly.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace critsense {

std::string format_double(double value);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header = {});

    void add_comment(const std::string& line);  // embedded newlines become separate comment lines
    void add_row(std::vector<std::string> cells);
    void add_row(const std::vector<double>& values);

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
    std::size_t column(const std::string& name) const;  // throws std::out_of_range

    std::string str() const;

private:
    std::vector<std::string> comments_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

// Writes to a temporary sibling then renames over `path`. The parent directory
// must exist; nothing is left behind on failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace critsense
