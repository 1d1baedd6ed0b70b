#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phaselab::io {

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based, per row

    std::size_t column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;
};

/// Comma-separated, `.` decimals, header on the first line. Blank lines are
/// skipped. Throws MalformedRow with the source name and line number.
CsvTable read_csv(std::istream& is, std::string_view source, std::span<const std::string_view> expected_header = {});
CsvTable read_csv_file(const std::filesystem::path& path, std::span<const std::string_view> expected_header = {});

/// Strict decimal parse of one field.
double parse_number(std::string_view field, std::string_view source, std::size_t line);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Writes `content` byte for byte (no newline translation).
void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 640;
    int height = 420;
};

/// Minimal SVG line plot: axes, ticks, one polyline per series, legend.
std::string svg_line_plot(const PlotSpec& spec, std::span<const Series> series);

}  // namespace phaselab::io
