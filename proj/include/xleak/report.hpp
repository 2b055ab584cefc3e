#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "xleak/hardening.hpp"

namespace xleak {

std::string format_double(double v);  // shortest round-trip form, "inf"/"-inf"/"nan" spelled out

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Minimal RFC 4180 reader (quoted fields, doubled quotes); first row is the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};
CsvTable read_csv_table(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Scatter of every trial in (MLS, signed delta-S) with front members joined,
// the selected trial ringed and the ideal point (0,0) drawn as a star.
std::string pareto_svg(const SearchResult& result, const std::string& title);

struct BarDatum {
    std::string label;
    double value = 0.0;
};
std::string bar_svg(const std::vector<BarDatum>& bars, const std::string& title, const std::string& unit);

// Structural check: balanced, properly nested tags, a single <svg> root.
bool svg_well_formed(const std::string& svg);

// Timing and manifest files hold wall-clock data and are excluded from the
// byte-identity guarantee.
bool is_nondeterministic_output(const std::filesystem::path& relative);

// File inventory of a run directory: relative path, size and SHA-256, sorted.
nlohmann::json file_inventory(const std::filesystem::path& dir);

}  // namespace xleak
