#include "xleak/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "xleak/error.hpp"

namespace xleak {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    os << text;
    require(bool(os), ErrorKind::io, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorKind::parse, "missing CSV column " + name);
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv_table(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            field.push_back(c);
            any = true;
        }
    }
    require(!quoted, ErrorKind::parse, path.string() + ": unterminated quoted field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorKind::parse, path.string() + ": empty CSV");
    CsvTable t;
    t.header = std::move(rows.front());
    t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    return t;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    require(EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) == 1, ErrorKind::io,
            "SHA-256 computation failed");
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

namespace {

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << v;
    return ss.str();
}

std::string star_points(double cx, double cy, double outer, double inner) {
    std::ostringstream ss;
    for (int i = 0; i < 10; ++i) {
        const double r = i % 2 ? inner : outer;
        const double a = -M_PI / 2 + i * M_PI / 5;
        ss << (i ? " " : "") << num(cx + r * std::cos(a)) << ',' << num(cy + r * std::sin(a));
    }
    return ss.str();
}

}  // namespace

std::string pareto_svg(const SearchResult& result, const std::string& title) {
    constexpr double W = 640, H = 480, L = 70, R = 170, T = 40, B = 60;
    double xmax = 0.0, ymin = 0.0, ymax = 0.0;
    for (const auto& t : result.trials) {
        xmax = std::max(xmax, t.mls);
        ymin = std::min(ymin, t.delta_s_loss());
        ymax = std::max(ymax, t.delta_s_loss());
    }
    xmax = std::max(xmax * 1.1, 0.01);
    const double ypad = std::max(1.0, 0.1 * (ymax - ymin));
    ymin -= ypad;
    ymax += ypad;
    auto px = [&](double x) { return L + x / xmax * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << esc(title) << "</text>\n";
    // Axes with zero lines.
    s << "<g stroke=\"black\" stroke-width=\"1\">\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n";
    s << "</g>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << num(py(0)) << "\" x2=\"" << W - R << "\" y2=\"" << num(py(0))
      << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
    s << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmax * i / 4, yv = ymin + (ymax - ymin) * i / 4;
        s << "<text x=\"" << num(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(xv * 100)
          << "</text>\n";
        s << "<text x=\"" << L - 6 << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">MLS (%)</text>\n";
    s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">Delta S loss (%)</text>\n";
    s << "</g>\n";

    // Front polyline in MLS order.
    std::vector<std::size_t> front = result.front.members;
    std::sort(front.begin(), front.end(),
              [&](std::size_t a, std::size_t b) { return result.trials[a].mls < result.trials[b].mls; });
    if (front.size() > 1) {
        s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < front.size(); ++i) {
            const auto& t = result.trials[front[i]];
            s << (i ? " " : "") << num(px(t.mls)) << ',' << num(py(t.delta_s_loss()));
        }
        s << "\"/>\n";
    }
    s << "<g class=\"trials\">\n";
    for (const auto& t : result.trials) {
        const bool on = std::find(front.begin(), front.end(), t.trial) != front.end();
        s << "<circle class=\"trial\" cx=\"" << num(px(t.mls)) << "\" cy=\"" << num(py(t.delta_s_loss()))
          << "\" r=\"4\" fill=\"" << (on ? "#1f77b4" : "#aaaaaa") << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
    }
    s << "</g>\n";
    const auto& best = result.trials[result.best];
    s << "<circle cx=\"" << num(px(best.mls)) << "\" cy=\"" << num(py(best.delta_s_loss()))
      << "\" r=\"8\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";
    s << "<polygon class=\"ideal-point\" points=\"" << star_points(px(0), py(0), 9, 4)
      << "\" fill=\"red\" stroke=\"darkred\"/>\n";

    // Legend.
    const double lx = W - R + 15;
    s << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<circle cx=\"" << lx << "\" cy=\"" << T + 10 << "\" r=\"4\" fill=\"#aaaaaa\" stroke=\"black\"/>\n";
    s << "<text x=\"" << lx + 10 << "\" y=\"" << T + 14 << "\">trial</text>\n";
    s << "<circle cx=\"" << lx << "\" cy=\"" << T + 30 << "\" r=\"4\" fill=\"#1f77b4\" stroke=\"black\"/>\n";
    s << "<text x=\"" << lx + 10 << "\" y=\"" << T + 34 << "\">Pareto front</text>\n";
    s << "<circle cx=\"" << lx << "\" cy=\"" << T + 50 << "\" r=\"7\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << lx + 10 << "\" y=\"" << T + 54 << "\">selected</text>\n";
    s << "<polygon points=\"" << star_points(lx, T + 70, 7, 3) << "\" fill=\"red\"/>\n";
    s << "<text x=\"" << lx + 10 << "\" y=\"" << T + 74 << "\">ideal (0,0)</text>\n";
    s << "</g>\n</svg>\n";
    return s.str();
}

std::string bar_svg(const std::vector<BarDatum>& bars, const std::string& title, const std::string& unit) {
    constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 110;
    double vmax = 0.0;
    for (const auto& b : bars) vmax = std::max(vmax, b.value);
    if (vmax <= 0.0) vmax = 1.0;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << esc(title) << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    s << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    const double slot = bars.empty() ? 0.0 : (W - L - R) / double(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double h = bars[i].value / vmax * (H - T - B);
        const double x = L + slot * double(i) + slot * 0.15;
        s << "<rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(H - B - h) << "\" width=\"" << num(slot * 0.7)
          << "\" height=\"" << num(h) << "\" fill=\"#1f77b4\"/>\n";
        const double cx = x + slot * 0.35;
        s << "<text x=\"" << num(cx) << "\" y=\"" << H - B + 12 << "\" text-anchor=\"end\" transform=\"rotate(-45 "
          << num(cx) << ' ' << H - B + 12 << ")\">" << esc(bars[i].label) << "</text>\n";
    }
    s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << esc(unit) << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << esc(format_double(vmax))
      << "</text>\n";
    s << "</g>\n</svg>\n";
    return s.str();
}

bool svg_well_formed(const std::string& svg) {
    std::vector<std::string> stack;
    std::size_t roots = 0;
    std::size_t i = 0;
    while ((i = svg.find('<', i)) != std::string::npos) {
        const std::size_t end = svg.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = svg.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;
        if (tag[0] == '/') {
            const std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
            continue;
        }
        const bool self_closing = tag.back() == '/';
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
        if (name.empty()) return false;
        // Attribute quotes must balance.
        if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
        if (stack.empty()) {
            if (name != "svg" || ++roots > 1) return false;
        }
        if (!self_closing) stack.push_back(name);
    }
    return stack.empty() && roots == 1;
}

bool is_nondeterministic_output(const std::filesystem::path& relative) {
    const std::string name = relative.filename().string();
    return name.find("timings") != std::string::npos || name.ends_with("manifest.json") ||
           relative.extension() == ".xatt";
}

json file_inventory(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), dir));
    std::sort(files.begin(), files.end());
    json inv = json::array();
    for (const auto& rel : files) {
        if (rel.filename().string().ends_with("manifest.json")) continue;
        const auto full = dir / rel;
        json e{{"path", rel.generic_string()}, {"bytes", std::filesystem::file_size(full)}};
        if (is_nondeterministic_output(rel))
            e["deterministic"] = false;
        else
            e["sha256"] = sha256_file(full);
        inv.push_back(e);
    }
    return inv;
}

}  // namespace xleak
