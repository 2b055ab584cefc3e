#include "xleak/attribution_io.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

#include "binary_io.hpp"
#include "xleak/error.hpp"

namespace xleak {

using namespace detail;

namespace {
constexpr std::uint16_t kAttributionVersion = 1;
}

void write_attributions(std::ostream& os, const AttributionSet& set) {
    os.write("XATT", 4);
    put_le<std::uint16_t>(os, kAttributionVersion);
    put_bytes(os, set.meta.dump());
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(set.maps.size()));
    for (const auto& m : set.maps) {
        put_le<std::uint8_t>(os, static_cast<std::uint8_t>(m.method));
        put_le<std::int32_t>(os, m.class_index);
        put_le<std::int8_t>(os, m.label);
        put_le<double>(os, m.wall_time_seconds);
        put_bytes(os, m.params.to_json().dump());
        put_le<std::uint8_t>(os, static_cast<std::uint8_t>(m.values.rank()));
        for (auto d : m.values.shape) put_le<std::uint64_t>(os, d);
        for (double v : m.values.data) put_le<double>(os, v);
    }
    if (!os) fail(ErrorKind::io, "failed writing attribution stream");
}

AttributionSet read_attributions(std::istream& is) {
    expect_magic(is, "XATT");
    const auto version = get_le<std::uint16_t>(is);
    require(version == kAttributionVersion, ErrorKind::parse,
            "unsupported XATT version " + std::to_string(version));
    AttributionSet set;
    try {
        set.meta = nlohmann::json::parse(get_bytes(is));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, std::string("bad XATT metadata: ") + e.what());
    }
    const auto count = get_le<std::uint32_t>(is);
    set.maps.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        AttributionMap m;
        const auto tag = get_le<std::uint8_t>(is);
        require(tag < all_explainers().size(), ErrorKind::parse, "bad explainer tag " + std::to_string(tag));
        m.method = static_cast<ExplainerKind>(tag);
        m.class_index = get_le<std::int32_t>(is);
        m.label = get_le<std::int8_t>(is);
        m.wall_time_seconds = get_le<double>(is);
        try {
            m.params = ExplainerParams::from_json(nlohmann::json::parse(get_bytes(is)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::parse, std::string("bad XATT params: ") + e.what());
        }
        const auto rank = get_le<std::uint8_t>(is);
        Shape shape;
        for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(get_le<std::uint64_t>(is)));
        std::vector<double> values(shape_size(shape));
        for (double& v : values) v = get_le<double>(is);
        m.values = Tensor(std::move(shape), std::move(values));
        set.maps.push_back(std::move(m));
    }
    return set;
}

void save_attributions(const std::filesystem::path& path, const AttributionSet& set) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    write_attributions(os, set);
}

AttributionSet load_attributions(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorKind::io, "cannot open " + path.string());
    return read_attributions(is);
}

void export_attributions_csv(const std::filesystem::path& path, const AttributionSet& set) {
    std::ofstream os(path);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    const std::size_t width = set.maps.empty() ? 0 : set.maps.front().values.size();
    os << "index,method,class_index,label";
    for (std::size_t i = 0; i < width; ++i) os << ",v" << i;
    os << '\n';
    char buf[32];
    for (std::size_t r = 0; r < set.maps.size(); ++r) {
        const auto& m = set.maps[r];
        require(m.values.size() == width, ErrorKind::invalid_argument, "attribution sizes differ within one set");
        os << r << ',' << explainer_name(m.method) << ',' << m.class_index << ',' << int(m.label);
        for (double v : m.values.data) {
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            os << ',' << std::string_view(buf, res.ptr);
        }
        os << '\n';
    }
}

}  // namespace xleak
