#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <regex>

#include "xleak/error.hpp"
#include "xleak/report.hpp"

using namespace xleak;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "xleak_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t i = text.find(needle); i != std::string::npos; i = text.find(needle, i + 1)) ++n;
    return n;
}

SearchResult toy_search() {
    SearchResult r;
    r.baseline = {0.4, 0.7, 0.6, 1.0};
    const double pts[][2] = {{0.3, 1.2}, {0.1, 1.5}, {0.35, 1.3}, {0.0, 2.0}, {0.2, 0.9}};
    for (std::size_t i = 0; i < 5; ++i) {
        TrialRecord t;
        t.trial = i;
        t.mls = pts[i][0];
        t.utility = pts[i][1];
        const auto d = delta_s(1.0, t.utility);
        t.delta_s_percent = d.percent;
        t.direction = d.direction;
        t.theta = {{"i", i}};
        r.trials.push_back(t);
    }
    r.front = pareto_front(r.trials);
    r.best = select_best(r.trials);
    return r;
}

}  // namespace

TEST(FormatDouble, ShortestRoundTripAndSpelledInfinities) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-2.0), "-2");
    EXPECT_EQ(format_double(kInf), "inf");
    EXPECT_EQ(format_double(-kInf), "-inf");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(CsvTableTest, QuotedFieldsAndDoubledQuotes) {
    const auto d = fresh_dir("csv");
    write_text(d / "t.csv", "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n1,2\n");
    const auto t = read_csv_table(d / "t.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "x,y");
    EXPECT_EQ(t.rows[0][1], "say \"hi\"");
    EXPECT_EQ(t.column("b"), 1u);
    EXPECT_THROW(t.column("zzz"), Error);
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Svg, ParetoPlotHasEveryTrialFrontSelectionAndIdealStar) {
    const auto r = toy_search();
    const std::string svg = pareto_svg(r, "saliency");
    EXPECT_TRUE(svg_well_formed(svg));
    EXPECT_EQ(count_of(svg, "class=\"trial\""), r.trials.size());
    EXPECT_EQ(count_of(svg, "class=\"ideal-point\""), 1u);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_NE(svg.find("selected"), std::string::npos);
    EXPECT_NE(svg.find("saliency"), std::string::npos);
}

TEST(Svg, BarChartIsWellFormed) {
    const std::string svg = bar_svg({{"saliency", 0.2}, {"lime<&>", 0.05}}, "Leakage", "MLS");
    EXPECT_TRUE(svg_well_formed(svg));
    EXPECT_EQ(svg.find("lime<&>"), std::string::npos);
}

TEST(Svg, WellFormednessCheckRejectsBrokenNesting) {
    EXPECT_TRUE(svg_well_formed("<svg><g><rect/></g></svg>"));
    EXPECT_FALSE(svg_well_formed("<svg><g></svg>"));
    EXPECT_FALSE(svg_well_formed("<svg></svg><svg></svg>"));
    EXPECT_FALSE(svg_well_formed("<svg><g></g>"));
}

TEST(Inventory, TimingsManifestsAndDumpsAreNondeterministic) {
    EXPECT_TRUE(is_nondeterministic_output("audit_timings.csv"));
    EXPECT_TRUE(is_nondeterministic_output("harden/saliency/trial_timings.csv"));
    EXPECT_TRUE(is_nondeterministic_output("audit.manifest.json"));
    EXPECT_TRUE(is_nondeterministic_output("attributions/saliency/eval_members.xatt"));
    EXPECT_FALSE(is_nondeterministic_output("audit.csv"));
    EXPECT_FALSE(is_nondeterministic_output("harden/saliency/front.json"));
}

TEST(Inventory, SortedWithChecksumsAndWithoutManifests) {
    const auto d = fresh_dir("inventory");
    write_text(d / "b.csv", "x\n");
    write_text(d / "a" / "z.json", "{}");
    write_text(d / "run_timings.csv", "t\n1\n");
    write_text(d / "audit.manifest.json", "{}");
    const auto inv = file_inventory(d);
    ASSERT_EQ(inv.size(), 3u);
    EXPECT_EQ(inv[0].at("path"), "a/z.json");
    EXPECT_EQ(inv[1].at("path"), "b.csv");
    EXPECT_EQ(inv[1].at("sha256"), sha256_hex("x\n"));
    EXPECT_EQ(inv[2].at("deterministic"), false);
}

TEST(Svg, ZeroBaselineSensitivityPlotsFinite) {
    auto r = toy_search();
    r.baseline.utility = 0.0;
    for (auto& t : r.trials) {
        t.delta_s_percent = std::numeric_limits<double>::quiet_NaN();
        t.direction = UtilityDirection::undefined;
        EXPECT_EQ(t.delta_s_loss(), 0.0);
    }
    const std::string svg = pareto_svg(r, "deconvolution");
    EXPECT_TRUE(svg_well_formed(svg));
    EXPECT_EQ(svg.find("nan"), std::string::npos);
    EXPECT_EQ(count_of(svg, "class=\"trial\""), r.trials.size());
    EXPECT_STREQ(direction_name(UtilityDirection::undefined), "undefined");
}
