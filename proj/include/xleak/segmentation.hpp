#pragma once

#include <cstddef>
#include <vector>

#include "xleak/tensor.hpp"

namespace xleak {

// Axis-aligned grid segmentation. Rank-1 inputs are cut into contiguous runs;
// rank-2 (H,W) and rank-3 (C,H,W) inputs are cut into an r x c grid over the
// spatial dims, shared by every channel.
struct Segmentation {
    Shape input_shape;
    std::vector<std::size_t> ids;  // one per input coordinate, row-major
    std::size_t count = 0;
    std::size_t rows = 1;
    std::size_t cols = 1;

    // Coordinates belonging to each segment, in increasing order.
    std::vector<std::vector<std::size_t>> members() const;
};

// Number of grid cells available: H*W for spatial inputs, d for flat ones.
std::size_t spatial_cells(const Shape& input_shape);

// Picks the factorisation r x c (r <= H, c <= W) with the largest r*c not
// exceeding n_segments. Among equal products the cost
// compactness * |ln(cell aspect)| + ln(r) is minimised: high compactness
// favours square cells, low compactness allows elongated (column) strips.
Segmentation segment_grid(const Shape& input_shape, std::size_t n_segments, double compactness);

// Same, with n_segments clamped to [1, spatial_cells(input_shape)].
Segmentation segment_grid_clamped(const Shape& input_shape, std::size_t n_segments, double compactness);

// Per-segment values broadcast onto the input coordinates.
Tensor broadcast_segments(const Segmentation& seg, const std::vector<double>& segment_values);

// Copy of x where coordinates of segments with keep[s] == false hold `fill`.
Tensor mask_segments(const Segmentation& seg, const Tensor& x, const std::vector<bool>& keep, double fill);

}  // namespace xleak
