#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xleak/nn.hpp"
#include "xleak/rng.hpp"
#include "xleak/tensor.hpp"

namespace xleak::testing {

// Single bias-free dense layer with weight rows W.
inline Model linear_model(const std::vector<std::vector<double>>& w) {
    const std::size_t out = w.size(), in = w.front().size();
    Model m({in}, {LayerSpec::dense(in, out)});
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) m.layer(0).weights[o * in + i] = w[o][i];
    return m;
}

// The reference linear model w = [1, -2, 0.5] and input x = [2, 1, 4].
inline Model ref_linear() { return linear_model({{1.0, -2.0, 0.5}}); }
inline Tensor ref_x() { return Tensor::vector({2.0, 1.0, 4.0}); }
inline std::vector<double> ref_wx() { return {2.0, -2.0, 2.0}; }

inline Model random_mlp(std::uint64_t seed, std::size_t in, std::size_t hidden, std::size_t out,
                        std::size_t depth = 2) {
    std::vector<LayerSpec> specs;
    std::size_t prev = in;
    for (std::size_t k = 0; k + 1 < depth; ++k) {
        specs.push_back(LayerSpec::dense(prev, hidden));
        specs.push_back(LayerSpec::relu());
        prev = hidden;
    }
    specs.push_back(LayerSpec::dense(prev, out));
    Model m({in}, specs);
    Rng rng = make_rng(seed, 99);
    m.init_uniform(rng);
    return m;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    Rng rng = make_rng(seed, 123);
    for (auto& v : t.data) v = uniform(rng, lo, hi);
    return t;
}

// Smallest |pre-activation| feeding any relu layer at x.
inline double kink_margin(const Model& m, const Tensor& x) {
    const auto fr = forward(m, x);
    double margin = INFINITY;
    for (std::size_t l = 0; l < m.num_layers(); ++l)
        if (m.layer(l).spec.kind == LayerKind::relu)
            for (double v : fr.trace.input_of(l).data) margin = std::min(margin, std::fabs(v));
    return margin;
}

// Relative error with a 1e-8 floor so exact zeros (dead units) compare as equal.
inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

}  // namespace xleak::testing
