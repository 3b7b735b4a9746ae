#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace bfrog {

/// Shortest round-trip representation of a double ("inf", "nan" for specials).
std::string format_double(double v);

/// In-memory CSV table with deterministic number formatting.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    class Row {
    public:
        Row& operator<<(double v);
        Row& operator<<(std::int64_t v);
        Row& operator<<(std::uint64_t v);
        Row& operator<<(int v) { return *this << static_cast<std::int64_t>(v); }
        Row& operator<<(unsigned v) { return *this << static_cast<std::uint64_t>(v); }
        Row& operator<<(std::string_view s);
        Row& operator<<(const char* s) { return *this << std::string_view(s); }
        Row& operator<<(bool b) { return *this << std::string_view(b ? "true" : "false"); }

    private:
        friend class CsvTable;
        explicit Row(std::vector<std::string>& cells) : cells_(cells) {}
        std::vector<std::string>& cells_;
    };

    Row row();
    std::size_t rows() const noexcept { return rows_.size(); }
    const std::vector<std::string>& header() const noexcept { return header_; }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes content to a sibling temp file, then renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Parses a CSV produced by CsvTable (no quoted separators) into header + rows.
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(std::string_view name) const;
};
CsvData read_csv(const std::filesystem::path& path);

}  // namespace bfrog
