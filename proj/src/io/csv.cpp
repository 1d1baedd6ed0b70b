#include "phaselab/io.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace phaselab::io {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw MalformedRow(fmt::format("{}:1: missing column '{}'", source, name));
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    return parse_number(rows.at(row).at(col), source, line_numbers.at(row));
}

double parse_number(std::string_view field, std::string_view source, std::size_t line) {
    const std::string_view f = trim(field);
    double v = 0.0;
    const auto* begin = f.data();
    const auto* end = f.data() + f.size();
    if (!f.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (f.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw MalformedRow(fmt::format("{}:{}: '{}' is not a number", source, line, f));
    }
    return v;
}

CsvTable read_csv(std::istream& is, std::string_view source, std::span<const std::string_view> expected_header) {
    CsvTable t;
    t.source = std::string(source);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            if (lineno == 1 && fields.front().rfind("\xEF\xBB\xBF", 0) == 0) fields.front().erase(0, 3);
            t.header = std::move(fields);
            have_header = true;
            if (!expected_header.empty()) {
                bool match = t.header.size() == expected_header.size();
                for (std::size_t i = 0; match && i < t.header.size(); ++i) match = t.header[i] == expected_header[i];
                if (!match) {
                    std::string want;
                    for (auto h : expected_header) want += (want.empty() ? "" : ",") + std::string(h);
                    throw MalformedRow(fmt::format("{}:{}: expected header '{}'", source, lineno, want));
                }
            }
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw MalformedRow(fmt::format("{}:{}: expected {} fields, found {}", source, lineno, t.header.size(),
                                           fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw MalformedRow(fmt::format("{}:1: empty file", source));
    return t;
}

CsvTable read_csv_file(const std::filesystem::path& path, std::span<const std::string_view> expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument(fmt::format("cannot open {}", path.string()));
    return read_csv(in, path.string(), expected_header);
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument(fmt::format("cannot write {}", path.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InvalidArgument(fmt::format("write to {} failed", path.string()));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace phaselab::io
