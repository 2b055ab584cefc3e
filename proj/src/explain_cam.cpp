#include <algorithm>
#include <cmath>

#include "xleak/error.hpp"
#include "xleak/explain.hpp"

namespace xleak {

Interpolation interpolation_from_name(const std::string& name) {
    if (name == "nearest") return Interpolation::nearest;
    if (name == "bilinear") return Interpolation::bilinear;
    fail(ErrorKind::config, "unknown interpolation_mode '" + name + "'");
}

Tensor upsample(const Tensor& map, std::size_t out_h, std::size_t out_w, Interpolation interpolation) {
    require(map.rank() == 2, ErrorKind::input_shape, "upsample expects a (h,w) map");
    const std::size_t h = map.shape[0], w = map.shape[1];
    Tensor out({out_h, out_w});
    const double sy = double(h) / double(out_h), sx = double(w) / double(out_w);
    for (std::size_t i = 0; i < out_h; ++i) {
        for (std::size_t j = 0; j < out_w; ++j) {
            double v;
            if (interpolation == Interpolation::nearest) {
                const auto y = std::min(h - 1, static_cast<std::size_t>(std::floor(double(i) * sy)));
                const auto x = std::min(w - 1, static_cast<std::size_t>(std::floor(double(j) * sx)));
                v = map.data[y * w + x];
            } else {
                // Half-pixel centres (align_corners = false), clamped at the border.
                const double fy = std::clamp((double(i) + 0.5) * sy - 0.5, 0.0, double(h - 1));
                const double fx = std::clamp((double(j) + 0.5) * sx - 0.5, 0.0, double(w - 1));
                const auto y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
                const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
                const double ty = fy - double(y0), tx = fx - double(x0);
                const double top = map.data[y0 * w + x0] * (1 - tx) + map.data[y0 * w + x1] * tx;
                const double bot = map.data[y1 * w + x0] * (1 - tx) + map.data[y1 * w + x1] * tx;
                v = top * (1 - ty) + bot * ty;
            }
            out.data[i * out_w + j] = v;
        }
    }
    return out;
}

Tensor gradcam(const Model& model, const Tensor& x, std::size_t class_index, std::int64_t layer_index,
               CamVariant variant, Interpolation interpolation, bool attr_to_layer_input, OutputMode mode) {
    const auto convs = conv_layer_indices(model);
    require(!convs.empty(), ErrorKind::unsupported_architecture, "gradcam needs a model with a conv2d layer");
    require(x.rank() == 3, ErrorKind::input_shape, "gradcam needs a (C,H,W) input, got " + shape_str(x.shape));
    std::size_t layer = convs.back();
    if (layer_index >= 0) layer = static_cast<std::size_t>(layer_index);
    const LayerProbe probe = layer_probe(model, x, class_index, layer, attr_to_layer_input, mode);
    const Tensor& A = probe.activation;
    const Tensor& G = probe.gradient;
    const std::size_t K = A.shape[0], h = A.shape[1], w = A.shape[2], hw = h * w;

    Tensor cam({h, w});
    for (std::size_t k = 0; k < K; ++k) {
        const double* a = &A.data[k * hw];
        const double* g = &G.data[k * hw];
        double weight = 0.0;
        if (variant == CamVariant::gradcam) {
            for (std::size_t i = 0; i < hw; ++i) weight += g[i];
            weight /= double(hw);
        } else {
            double a_sum = 0.0;
            for (std::size_t i = 0; i < hw; ++i) a_sum += a[i];
            for (std::size_t i = 0; i < hw; ++i) {
                const double g2 = g[i] * g[i];
                const double denom = 2.0 * g2 + a_sum * g2 * g[i];
                const double alpha = denom != 0.0 ? g2 / denom : 0.0;
                weight += alpha * std::max(g[i], 0.0);
            }
        }
        for (std::size_t i = 0; i < hw; ++i) cam.data[i] += weight * a[i];
    }
    for (double& v : cam.data) v = std::max(v, 0.0);

    const std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
    const Tensor up = upsample(cam, H, W, interpolation);
    Tensor out(x.shape);
    for (std::size_t c = 0; c < C; ++c) std::copy(up.data.begin(), up.data.end(), out.data.begin() + c * H * W);
    // Bilinear mixing of nonnegative values stays nonnegative; guard -0.0.
    for (double& v : out.data) v = std::max(v, 0.0);
    return out;
}

}  // namespace xleak
