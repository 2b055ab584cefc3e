#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "xleak/explain.hpp"

namespace xleak {

// A batch of attribution maps with free-form metadata (provenance).
struct AttributionSet {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<AttributionMap> maps;
};

// Binary "XATT": magic, u16 version, meta JSON, u32 count, then per map
// u8 method, i32 class, i8 label, f64 wall time, params JSON, u8 rank,
// u64 dims, f64 values. All little-endian.
void write_attributions(std::ostream& os, const AttributionSet& set);
AttributionSet read_attributions(std::istream& is);
void save_attributions(const std::filesystem::path& path, const AttributionSet& set);
AttributionSet load_attributions(const std::filesystem::path& path);

// CSV with columns index,method,class_index,label,v0..v{n-1}. Wall times are
// left out so the file is reproducible byte for byte.
void export_attributions_csv(const std::filesystem::path& path, const AttributionSet& set);

}  // namespace xleak
