#include <cmath>
#include <numbers>

#include "xleak/error.hpp"
#include "xleak/explain.hpp"

namespace xleak {

namespace {

void check_same_shape(const Tensor& x, const Tensor& baseline) {
    require(x.shape == baseline.shape, ErrorKind::input_shape,
            "baseline shape " + shape_str(baseline.shape) + " does not match input " + shape_str(x.shape));
}

// Gauss-Legendre nodes and weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (double(i) + 0.75) / (double(n) + 0.5));
        double dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * double(j) - 1.0) * z * p1 - (double(j) - 1.0) * p2) / double(j);
            }
            dp = double(n) * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-15) break;
        }
        if (n % 2 == 1 && i == half - 1) z = 0.0;
        // dp at the middle node of odd n must be recomputed at exactly 0.
        if (z == 0.0) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * double(j) - 1.0) * z * p1 - (double(j) - 1.0) * p2) / double(j);
            }
            dp = double(n) * (z * p0 - p1) / (z * z - 1.0);
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

}  // namespace

ScoreFn model_score(const Model& model, std::size_t class_index, OutputMode mode) {
    require(class_index < model.num_classes(), ErrorKind::class_out_of_range,
            "class index " + std::to_string(class_index) + " out of range");
    return [&model, class_index, mode](const Tensor& x) {
        return class_score(predict(model, x), class_index, mode);
    };
}

ClassifyFn model_classifier(const Model& model) {
    return [&model](const Tensor& x) { return predict_class(model, x); };
}

Tensor grad_explain(const Model& model, const Tensor& x, std::size_t class_index, ReluRule rule,
                    bool multiply_by_input, bool absolute, OutputMode mode) {
    Tensor g = input_gradient(model, x, class_index, rule, mode);
    if (multiply_by_input)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
    if (absolute)
        for (double& v : g.data) v = std::abs(v);
    return g;
}

Tensor noise_aggregate(const Model& model, const Tensor& x, std::size_t class_index, const NoiseConfig& cfg,
                       OutputMode mode) {
    require(cfg.n >= 1, ErrorKind::invalid_argument, "noise tunnel needs at least one sample");
    require(cfg.stdevs >= 0.0, ErrorKind::invalid_argument, "stdevs must be >= 0");
    const Dataset* ref = cfg.reference;
    if (cfg.draw_baseline_from_distrib)
        require(ref != nullptr && ref->size() > 0 && ref->feature_count() == x.size(), ErrorKind::invalid_argument,
                "draw_baseline_from_distrib needs a reference dataset matching the input size");

    Rng rng = make_rng(cfg.seed, 0x5a);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t d = x.size();
    std::vector<double> mean(d, 0.0), m2(d, 0.0);
    for (std::size_t k = 0; k < cfg.n; ++k) {
        Tensor base = x;
        if (cfg.draw_baseline_from_distrib) {
            const auto j = std::uniform_int_distribution<std::size_t>(0, ref->size() - 1)(rng);
            const auto row = ref->row(j);
            std::copy(row.begin(), row.end(), base.data.begin());
        }
        for (double& v : base.data) v += cfg.stdevs * gauss(rng);
        const Tensor g = input_gradient(model, base, class_index, ReluRule::standard, mode);
        // Welford update keeps the variance exactly 0 for identical samples.
        for (std::size_t i = 0; i < d; ++i) {
            const double v = cfg.aggregator == NoiseAggregator::mean_abs_grad ? std::abs(g[i]) : g[i];
            const double delta = v - mean[i];
            mean[i] += delta / double(k + 1);
            m2[i] += delta * (v - mean[i]);
        }
    }
    Tensor out(x.shape);
    for (std::size_t i = 0; i < d; ++i)
        out[i] = cfg.aggregator == NoiseAggregator::mean_abs_grad ? mean[i] : m2[i] / double(cfg.n);
    return out;
}

IgMethod ig_method_from_name(const std::string& name) {
    for (auto m : {IgMethod::riemann_left, IgMethod::riemann_right, IgMethod::riemann_middle,
                   IgMethod::riemann_trapezoid, IgMethod::gausslegendre})
        if (name == ig_method_name(m)) return m;
    fail(ErrorKind::config, "unknown integration method '" + name + "'");
}

const char* ig_method_name(IgMethod m) {
    switch (m) {
        case IgMethod::riemann_left: return "riemann_left";
        case IgMethod::riemann_right: return "riemann_right";
        case IgMethod::riemann_middle: return "riemann_middle";
        case IgMethod::riemann_trapezoid: return "riemann_trapezoid";
        case IgMethod::gausslegendre: return "gausslegendre";
    }
    return "?";
}

Quadrature path_quadrature(IgMethod method, std::size_t n) {
    require(n >= 1, ErrorKind::invalid_argument, "n_steps must be >= 1");
    Quadrature q;
    const double h = 1.0 / double(n);
    switch (method) {
        case IgMethod::riemann_left:
            for (std::size_t k = 0; k < n; ++k) q.alphas.push_back(double(k) * h);
            q.weights.assign(n, h);
            break;
        case IgMethod::riemann_right:
            for (std::size_t k = 1; k <= n; ++k) q.alphas.push_back(double(k) * h);
            q.weights.assign(n, h);
            break;
        case IgMethod::riemann_middle:
            for (std::size_t k = 0; k < n; ++k) q.alphas.push_back((double(k) + 0.5) * h);
            q.weights.assign(n, h);
            break;
        case IgMethod::riemann_trapezoid:
            for (std::size_t k = 0; k <= n; ++k) q.alphas.push_back(double(k) * h);
            q.weights.assign(n + 1, h);
            q.weights.front() = q.weights.back() = 0.5 * h;
            break;
        case IgMethod::gausslegendre: {
            std::vector<double> nodes, w;
            gauss_legendre(n, nodes, w);
            for (std::size_t k = 0; k < n; ++k) {
                q.alphas.push_back(0.5 * (nodes[k] + 1.0));
                q.weights.push_back(0.5 * w[k]);
            }
            break;
        }
    }
    return q;
}

Tensor integrated_gradients(const Model& model, const Tensor& x, std::size_t class_index, const Tensor& baseline,
                            std::size_t n_steps, IgMethod method, bool multiply_by_inputs, OutputMode mode) {
    check_same_shape(x, baseline);
    const Quadrature q = path_quadrature(method, n_steps);
    const Tensor diff = x - baseline;
    Tensor avg(x.shape);
    for (std::size_t k = 0; k < q.alphas.size(); ++k) {
        const Tensor point = baseline + q.alphas[k] * diff;
        const Tensor g = input_gradient(model, point, class_index, ReluRule::standard, mode);
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += q.weights[k] * g[i];
    }
    return multiply_by_inputs ? diff * avg : avg;
}

Tensor deeplift(const Model& model, const Tensor& x, const Tensor& baseline, std::size_t class_index,
                OutputMode mode) {
    check_same_shape(x, baseline);
    require(class_index < model.num_classes(), ErrorKind::class_out_of_range,
            "class index " + std::to_string(class_index) + " out of range");
    const ForwardResult fx = forward(model, x);
    const ForwardResult fb = forward(model, baseline);

    // Multipliers of the class score w.r.t. the logits; their dot product with
    // the logit difference must equal the score difference.
    const Tensor dz = fx.logits - fb.logits;
    Tensor seed(fx.logits.shape);
    if (mode == OutputMode::logit) {
        seed[class_index] = 1.0;
    } else {
        const double dp = class_score(fx.logits, class_index, mode) - class_score(fb.logits, class_index, mode);
        seed = class_score_seed(fx.logits, class_index, mode);
        double dot = 0.0, nz = 0.0;
        for (std::size_t j = 0; j < dz.size(); ++j) {
            dot += seed[j] * dz[j];
            nz += dz[j] * dz[j];
        }
        if (std::abs(dot) > 1e-12) {
            seed = (dp / dot) * seed;
        } else if (nz > 0.0) {
            seed = (dp / nz) * dz;
        }
    }

    const ReluBackward rescale = [&fb](std::size_t layer, const Tensor& pre, std::vector<double>& g) {
        const Tensor& pre_b = fb.trace.input_of(layer);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double d_in = pre[i] - pre_b[i];
            if (std::abs(d_in) > 1e-10) {
                const double d_out = std::max(pre[i], 0.0) - std::max(pre_b[i], 0.0);
                g[i] *= d_out / d_in;
            } else if (!(pre[i] > 0.0)) {
                g[i] = 0.0;
            }
        }
    };
    const Tensor m = backpropagate(model, fx.trace, seed, 0, rescale);
    return m * (x - baseline);
}

}  // namespace xleak
