#include "xleak/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xleak/error.hpp"

namespace xleak {

namespace {

struct Spatial {
    std::size_t channels = 1;
    std::size_t h = 1;
    std::size_t w = 1;
};

Spatial spatial_dims(const Shape& s) {
    switch (s.size()) {
        case 1: return {1, 1, s[0]};
        case 2: return {1, s[0], s[1]};
        case 3: return {s[0], s[1], s[2]};
        default: fail(ErrorKind::input_shape, "segmentation needs a rank 1-3 input, got " + shape_str(s));
    }
}

}  // namespace

std::vector<std::vector<std::size_t>> Segmentation::members() const {
    std::vector<std::vector<std::size_t>> out(count);
    for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]].push_back(i);
    return out;
}

std::size_t spatial_cells(const Shape& input_shape) {
    const auto sp = spatial_dims(input_shape);
    return sp.h * sp.w;
}

Segmentation segment_grid(const Shape& input_shape, std::size_t n_segments, double compactness) {
    const auto sp = spatial_dims(input_shape);
    const std::size_t coords = shape_size(input_shape);
    require(n_segments >= 1, ErrorKind::invalid_argument, "n_segments must be >= 1");
    require(n_segments <= coords, ErrorKind::invalid_argument,
            "n_segments " + std::to_string(n_segments) + " exceeds the " + std::to_string(coords) +
                " input coordinates");
    require(compactness >= 0.0, ErrorKind::invalid_argument, "compactness must be >= 0");

    std::size_t best_r = 1, best_c = 1, best_area = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t r = 1; r <= sp.h; ++r) {
        const std::size_t c = std::min(sp.w, n_segments / r);
        if (c == 0) break;
        const double aspect = (double(sp.h) / double(r)) / (double(sp.w) / double(c));
        const double cost = compactness * std::abs(std::log(aspect)) + std::log(double(r));
        const std::size_t area = r * c;
        if (area > best_area || (area == best_area && cost < best_cost)) {
            best_r = r;
            best_c = c;
            best_area = area;
            best_cost = cost;
        }
    }

    Segmentation seg;
    seg.input_shape = input_shape;
    seg.rows = best_r;
    seg.cols = best_c;
    seg.count = best_r * best_c;
    seg.ids.resize(coords);
    // Row i of the grid starts at floor(i*H/r).
    std::vector<std::size_t> row_of(sp.h), col_of(sp.w);
    for (std::size_t y = 0; y < sp.h; ++y) row_of[y] = (y * best_r) / sp.h;
    for (std::size_t x = 0; x < sp.w; ++x) col_of[x] = (x * best_c) / sp.w;
    std::size_t i = 0;
    for (std::size_t ch = 0; ch < sp.channels; ++ch)
        for (std::size_t y = 0; y < sp.h; ++y)
            for (std::size_t x = 0; x < sp.w; ++x) seg.ids[i++] = row_of[y] * best_c + col_of[x];
    return seg;
}

Segmentation segment_grid_clamped(const Shape& input_shape, std::size_t n_segments, double compactness) {
    const std::size_t cells = spatial_cells(input_shape);
    return segment_grid(input_shape, std::clamp<std::size_t>(n_segments, 1, cells), compactness);
}

Tensor broadcast_segments(const Segmentation& seg, const std::vector<double>& segment_values) {
    require(segment_values.size() == seg.count, ErrorKind::invalid_argument, "one value per segment expected");
    Tensor out(seg.input_shape);
    for (std::size_t i = 0; i < seg.ids.size(); ++i) out[i] = segment_values[seg.ids[i]];
    return out;
}

Tensor mask_segments(const Segmentation& seg, const Tensor& x, const std::vector<bool>& keep, double fill) {
    Tensor out = x;
    for (std::size_t i = 0; i < seg.ids.size(); ++i)
        if (!keep[seg.ids[i]]) out[i] = fill;
    return out;
}

}  // namespace xleak
