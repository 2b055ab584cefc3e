#include "xleak/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "xleak/error.hpp"

namespace xleak {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
        case LayerKind::avgpool2d: return "avgpool2d";
    }
    return "?";
}

const char* relu_rule_name(ReluRule rule) {
    switch (rule) {
        case ReluRule::standard: return "standard";
        case ReluRule::deconv: return "deconv";
        case ReluRule::guided: return "guided";
    }
    return "?";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_features = in;
    s.out_features = out;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::avgpool2d(std::size_t window) {
    LayerSpec s;
    s.kind = LayerKind::avgpool2d;
    s.kernel = window;
    s.stride = window;
    return s;
}

std::size_t Layer::fan_in() const {
    switch (spec.kind) {
        case LayerKind::dense: return spec.in_features;
        case LayerKind::conv2d: return spec.in_channels * spec.kernel * spec.kernel;
        default: return 0;
    }
}

namespace {

Shape infer_output_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
    const std::string where = "layer " + std::to_string(index) + " (" + layer_kind_name(spec.kind) + ")";
    switch (spec.kind) {
        case LayerKind::dense:
            require(in.size() == 1 && in[0] == spec.in_features && spec.out_features > 0,
                    ErrorKind::input_shape,
                    where + " expects (" + std::to_string(spec.in_features) + "), got " + shape_str(in));
            return {spec.out_features};
        case LayerKind::conv2d: {
            require(in.size() == 3, ErrorKind::input_shape, where + " requires a rank-3 (C,H,W) input, got " +
                                                                shape_str(in));
            require(in[0] == spec.in_channels, ErrorKind::input_shape,
                    where + " expects " + std::to_string(spec.in_channels) + " channels, got " + shape_str(in));
            require(spec.kernel > 0 && spec.stride > 0 && spec.out_channels > 0, ErrorKind::invalid_argument,
                    where + " has degenerate dims");
            const std::size_t h = in[1] + 2 * spec.padding;
            const std::size_t w = in[2] + 2 * spec.padding;
            require(h >= spec.kernel && w >= spec.kernel, ErrorKind::input_shape,
                    where + " kernel larger than padded input " + shape_str(in));
            return {spec.out_channels, (h - spec.kernel) / spec.stride + 1, (w - spec.kernel) / spec.stride + 1};
        }
        case LayerKind::relu:
            return in;
        case LayerKind::flatten:
            return {shape_size(in)};
        case LayerKind::avgpool2d:
            require(in.size() == 3, ErrorKind::input_shape, where + " requires a rank-3 input, got " + shape_str(in));
            require(spec.kernel > 0 && in[1] >= spec.kernel && in[2] >= spec.kernel, ErrorKind::input_shape,
                    where + " window does not fit " + shape_str(in));
            return {in[0], in[1] / spec.kernel, in[2] / spec.kernel};
    }
    fail(ErrorKind::invalid_argument, where + " has unknown kind");
}

}  // namespace

Model::Model(Shape input_shape, const std::vector<LayerSpec>& specs) : input_shape_(std::move(input_shape)) {
    require(!input_shape_.empty() && shape_size(input_shape_) > 0, ErrorKind::input_shape, "empty model input shape");
    require(!specs.empty(), ErrorKind::invalid_argument, "model needs at least one layer");
    Shape current = input_shape_;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Layer layer;
        layer.spec = specs[i];
        layer.in_shape = current;
        layer.out_shape = infer_output_shape(specs[i], current, i);
        if (specs[i].kind == LayerKind::dense) {
            layer.weights.assign(specs[i].in_features * specs[i].out_features, 0.0);
            layer.bias.assign(specs[i].out_features, 0.0);
        } else if (specs[i].kind == LayerKind::conv2d) {
            layer.weights.assign(specs[i].out_channels * specs[i].in_channels * specs[i].kernel * specs[i].kernel, 0.0);
            layer.bias.assign(specs[i].out_channels, 0.0);
        }
        current = layer.out_shape;
        layers_.push_back(std::move(layer));
    }
    require(current.size() == 1, ErrorKind::input_shape, "model output must be a class-score vector, got " +
                                                             shape_str(current));
}

const Shape& Model::output_shape() const {
    require(!layers_.empty(), ErrorKind::invalid_argument, "empty model");
    return layers_.back().out_shape;
}

std::vector<LayerSpec> Model::specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

double Model::parameter_l2_norm() const {
    double s = 0.0;
    for (const auto& l : layers_) {
        for (double w : l.weights) s += w * w;
        for (double b : l.bias) s += b * b;
    }
    return std::sqrt(s);
}

bool Model::parameters_finite() const {
    for (const auto& l : layers_) {
        if (!std::all_of(l.weights.begin(), l.weights.end(), [](double v) { return std::isfinite(v); })) return false;
        if (!std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); })) return false;
    }
    return true;
}

void Model::init_uniform(Rng& rng) {
    for (auto& l : layers_) {
        if (!l.spec.has_params()) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.fan_in()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : l.weights) w = dist(rng);
        for (double& b : l.bias) b = dist(rng);
    }
}

namespace {

Tensor layer_forward(const Layer& layer, const Tensor& x) {
    const LayerSpec& s = layer.spec;
    switch (s.kind) {
        case LayerKind::dense: {
            Tensor y(layer.out_shape);
            for (std::size_t o = 0; o < s.out_features; ++o) {
                const double* w = &layer.weights[o * s.in_features];
                double acc = layer.bias[o];
                for (std::size_t i = 0; i < s.in_features; ++i) acc += w[i] * x.data[i];
                y.data[o] = acc;
            }
            return y;
        }
        case LayerKind::conv2d: {
            Tensor y(layer.out_shape);
            const std::size_t in_h = x.shape[1], in_w = x.shape[2];
            const std::size_t out_h = y.shape[1], out_w = y.shape[2];
            const std::size_t k = s.kernel;
            for (std::size_t o = 0; o < s.out_channels; ++o) {
                for (std::size_t i = 0; i < out_h; ++i) {
                    for (std::size_t j = 0; j < out_w; ++j) {
                        double acc = layer.bias[o];
                        for (std::size_t c = 0; c < s.in_channels; ++c) {
                            for (std::size_t u = 0; u < k; ++u) {
                                const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i * s.stride + u) -
                                                         static_cast<std::ptrdiff_t>(s.padding);
                                if (r < 0 || r >= static_cast<std::ptrdiff_t>(in_h)) continue;
                                for (std::size_t v = 0; v < k; ++v) {
                                    const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(j * s.stride + v) -
                                                             static_cast<std::ptrdiff_t>(s.padding);
                                    if (q < 0 || q >= static_cast<std::ptrdiff_t>(in_w)) continue;
                                    acc += layer.weights[((o * s.in_channels + c) * k + u) * k + v] *
                                           x.at(c, static_cast<std::size_t>(r), static_cast<std::size_t>(q));
                                }
                            }
                        }
                        y.at(o, i, j) = acc;
                    }
                }
            }
            return y;
        }
        case LayerKind::relu: {
            Tensor y = x;
            for (double& v : y.data) v = v > 0.0 ? v : 0.0;
            return y;
        }
        case LayerKind::flatten:
            return x.reshaped(layer.out_shape);
        case LayerKind::avgpool2d: {
            Tensor y(layer.out_shape);
            const std::size_t k = s.kernel;
            const double inv = 1.0 / static_cast<double>(k * k);
            for (std::size_t c = 0; c < y.shape[0]; ++c)
                for (std::size_t i = 0; i < y.shape[1]; ++i)
                    for (std::size_t j = 0; j < y.shape[2]; ++j) {
                        double acc = 0.0;
                        for (std::size_t u = 0; u < k; ++u)
                            for (std::size_t v = 0; v < k; ++v) acc += x.at(c, i * k + u, j * k + v);
                        y.at(c, i, j) = acc * inv;
                    }
            return y;
        }
    }
    fail(ErrorKind::invalid_argument, "unknown layer kind");
}

// Gradient w.r.t. the layer input given the gradient w.r.t. its output.
// Parameter gradients are accumulated when wg/bg are non-null.
Tensor layer_backward(const Layer& layer, const Tensor& x, const Tensor& gy, std::vector<double>* wg,
                      std::vector<double>* bg) {
    const LayerSpec& s = layer.spec;
    switch (s.kind) {
        case LayerKind::dense: {
            Tensor gx(layer.in_shape);
            for (std::size_t o = 0; o < s.out_features; ++o) {
                const double g = gy.data[o];
                if (g == 0.0) continue;
                const double* w = &layer.weights[o * s.in_features];
                for (std::size_t i = 0; i < s.in_features; ++i) gx.data[i] += w[i] * g;
                if (wg) {
                    double* dw = &(*wg)[o * s.in_features];
                    for (std::size_t i = 0; i < s.in_features; ++i) dw[i] += x.data[i] * g;
                }
                if (bg) (*bg)[o] += g;
            }
            return gx;
        }
        case LayerKind::conv2d: {
            Tensor gx(layer.in_shape);
            const std::size_t in_h = x.shape[1], in_w = x.shape[2];
            const std::size_t out_h = gy.shape[1], out_w = gy.shape[2];
            const std::size_t k = s.kernel;
            for (std::size_t o = 0; o < s.out_channels; ++o) {
                for (std::size_t i = 0; i < out_h; ++i) {
                    for (std::size_t j = 0; j < out_w; ++j) {
                        const double g = gy.at(o, i, j);
                        if (g == 0.0) continue;
                        if (bg) (*bg)[o] += g;
                        for (std::size_t c = 0; c < s.in_channels; ++c) {
                            for (std::size_t u = 0; u < k; ++u) {
                                const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i * s.stride + u) -
                                                         static_cast<std::ptrdiff_t>(s.padding);
                                if (r < 0 || r >= static_cast<std::ptrdiff_t>(in_h)) continue;
                                for (std::size_t v = 0; v < k; ++v) {
                                    const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(j * s.stride + v) -
                                                             static_cast<std::ptrdiff_t>(s.padding);
                                    if (q < 0 || q >= static_cast<std::ptrdiff_t>(in_w)) continue;
                                    const std::size_t widx = ((o * s.in_channels + c) * k + u) * k + v;
                                    const auto ru = static_cast<std::size_t>(r);
                                    const auto qu = static_cast<std::size_t>(q);
                                    gx.at(c, ru, qu) += layer.weights[widx] * g;
                                    if (wg) (*wg)[widx] += x.at(c, ru, qu) * g;
                                }
                            }
                        }
                    }
                }
            }
            return gx;
        }
        case LayerKind::relu:
            return gy;  // handled by the ReluBackward hook
        case LayerKind::flatten:
            return gy.reshaped(layer.in_shape);
        case LayerKind::avgpool2d: {
            Tensor gx(layer.in_shape);
            const std::size_t k = s.kernel;
            const double inv = 1.0 / static_cast<double>(k * k);
            for (std::size_t c = 0; c < gy.shape[0]; ++c)
                for (std::size_t i = 0; i < gy.shape[1]; ++i)
                    for (std::size_t j = 0; j < gy.shape[2]; ++j) {
                        const double g = gy.at(c, i, j) * inv;
                        for (std::size_t u = 0; u < k; ++u)
                            for (std::size_t v = 0; v < k; ++v) gx.at(c, i * k + u, j * k + v) += g;
                    }
            return gx;
        }
    }
    fail(ErrorKind::invalid_argument, "unknown layer kind");
}

void check_input(const Model& model, const Tensor& x) {
    require(x.shape == model.input_shape(), ErrorKind::input_shape,
            "input shape " + shape_str(x.shape) + " does not match model input " + shape_str(model.input_shape()));
}

void check_class(const Model& model, std::size_t class_index) {
    require(class_index < model.num_classes(), ErrorKind::class_out_of_range,
            "class index " + std::to_string(class_index) + " out of range for " +
                std::to_string(model.num_classes()) + " classes");
}

}  // namespace

ForwardResult forward(const Model& model, const Tensor& x) {
    check_input(model, x);
    ForwardResult r;
    r.trace.input = x;
    r.trace.outputs.reserve(model.num_layers());
    const Tensor* current = &x;
    for (const auto& layer : model.layers()) {
        r.trace.outputs.push_back(layer_forward(layer, *current));
        current = &r.trace.outputs.back();
    }
    r.logits = r.trace.outputs.back();
    return r;
}

Tensor predict(const Model& model, const Tensor& x) {
    check_input(model, x);
    Tensor current = x;
    for (const auto& layer : model.layers()) current = layer_forward(layer, current);
    return current;
}

std::size_t predict_class(const Model& model, const Tensor& x) {
    return argmax(predict(model, x).values());
}

double class_score(const Tensor& logits, std::size_t class_index, OutputMode mode) {
    if (mode == OutputMode::logit) return logits.data.at(class_index);
    return softmax(logits).data.at(class_index);
}

Tensor class_score_seed(const Tensor& logits, std::size_t class_index, OutputMode mode) {
    Tensor seed(logits.shape);
    if (mode == OutputMode::logit) {
        seed.data.at(class_index) = 1.0;
        return seed;
    }
    const Tensor p = softmax(logits);
    const double pc = p.data.at(class_index);
    for (std::size_t j = 0; j < p.size(); ++j) seed.data[j] = pc * ((j == class_index ? 1.0 : 0.0) - p.data[j]);
    return seed;
}

ReluBackward relu_backward(ReluRule rule) {
    switch (rule) {
        case ReluRule::standard:
            return [](std::size_t, const Tensor& pre, std::vector<double>& g) {
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (!(pre.data[i] > 0.0)) g[i] = 0.0;
            };
        case ReluRule::deconv:
            return [](std::size_t, const Tensor&, std::vector<double>& g) {
                for (double& v : g) v = v > 0.0 ? v : 0.0;
            };
        case ReluRule::guided:
            return [](std::size_t, const Tensor& pre, std::vector<double>& g) {
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (!(pre.data[i] > 0.0) || !(g[i] > 0.0)) g[i] = 0.0;
            };
    }
    fail(ErrorKind::invalid_argument, "unknown relu rule");
}

ParamGradients::ParamGradients(const Model& model) {
    for (const auto& l : model.layers()) {
        weights.emplace_back(l.weights.size(), 0.0);
        bias.emplace_back(l.bias.size(), 0.0);
    }
}

Tensor backpropagate(const Model& model, const ActivationTrace& trace, Tensor grad_out, std::size_t first_layer,
                     const ReluBackward& relu, ParamGradients* params) {
    require(first_layer <= model.num_layers(), ErrorKind::invalid_argument, "first_layer beyond model depth");
    Tensor g = std::move(grad_out);
    for (std::size_t i = model.num_layers(); i-- > first_layer;) {
        const Layer& layer = model.layer(i);
        const Tensor& in = trace.input_of(i);
        if (layer.spec.kind == LayerKind::relu) {
            relu(i, in, g.data);
            continue;
        }
        std::vector<double>* wg = params ? &params->weights[i] : nullptr;
        std::vector<double>* bg = params ? &params->bias[i] : nullptr;
        g = layer_backward(layer, in, g, wg, bg);
    }
    return g;
}

Tensor input_gradient(const Model& model, const Tensor& x, std::size_t class_index, ReluRule rule, OutputMode mode) {
    check_class(model, class_index);
    const ForwardResult fr = forward(model, x);
    return backpropagate(model, fr.trace, class_score_seed(fr.logits, class_index, mode), 0, relu_backward(rule));
}

LossGradient param_gradient(const Model& model, std::span<const Tensor> batch, std::span<const int> labels, Loss loss) {
    require(batch.size() == labels.size() && !batch.empty(), ErrorKind::invalid_argument,
            "param_gradient needs a non-empty batch with one label per sample");
    LossGradient out{0.0, ParamGradients(model)};
    const auto relu = relu_backward(ReluRule::standard);
    const std::size_t classes = model.num_classes();
    for (std::size_t n = 0; n < batch.size(); ++n) {
        require(labels[n] >= 0 && static_cast<std::size_t>(labels[n]) < classes, ErrorKind::class_out_of_range,
                "label " + std::to_string(labels[n]) + " out of range");
        const auto y = static_cast<std::size_t>(labels[n]);
        const ForwardResult fr = forward(model, batch[n]);
        Tensor seed(fr.logits.shape);
        if (loss == Loss::cross_entropy) {
            const Tensor p = softmax(fr.logits);
            out.loss -= std::log(std::max(p.data[y], 1e-300));
            for (std::size_t j = 0; j < classes; ++j) seed.data[j] = p.data[j] - (j == y ? 1.0 : 0.0);
        } else {
            for (std::size_t j = 0; j < classes; ++j) {
                const double r = fr.logits.data[j] - (j == y ? 1.0 : 0.0);
                out.loss += 0.5 * r * r;
                seed.data[j] = r;
            }
        }
        backpropagate(model, fr.trace, std::move(seed), 0, relu, &out.grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (auto& w : out.grads.weights)
        for (double& v : w) v *= inv;
    for (auto& b : out.grads.bias)
        for (double& v : b) v *= inv;
    return out;
}

std::vector<std::size_t> conv_layer_indices(const Model& model) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < model.num_layers(); ++i)
        if (model.layer(i).spec.kind == LayerKind::conv2d) idx.push_back(i);
    return idx;
}

LayerProbe layer_probe(const Model& model, const Tensor& x, std::size_t class_index, std::size_t layer_index,
                       bool layer_input, OutputMode mode) {
    require(layer_index < model.num_layers() && model.layer(layer_index).spec.kind == LayerKind::conv2d,
            ErrorKind::unsupported_layer,
            "layer " + std::to_string(layer_index) + " is not a conv2d layer");
    check_class(model, class_index);
    const ForwardResult fr = forward(model, x);
    const std::size_t first = layer_input ? layer_index : layer_index + 1;
    LayerProbe probe;
    probe.activation = fr.trace.input_of(first);
    probe.gradient = backpropagate(model, fr.trace, class_score_seed(fr.logits, class_index, mode), first,
                                   relu_backward(ReluRule::standard));
    return probe;
}

namespace {

constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint64_t> spec_dims(const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::dense: return {s.in_features, s.out_features};
        case LayerKind::conv2d: return {s.in_channels, s.out_channels, s.kernel, s.stride, s.padding};
        case LayerKind::avgpool2d: return {s.kernel};
        case LayerKind::relu:
        case LayerKind::flatten: return {};
    }
    return {};
}

LayerSpec spec_from(std::uint8_t tag, const std::vector<std::uint64_t>& d) {
    auto need = [&](std::size_t n) {
        require(d.size() == n, ErrorKind::parse, "layer tag " + std::to_string(tag) + " has wrong dim count");
    };
    switch (static_cast<LayerKind>(tag)) {
        case LayerKind::dense: need(2); return LayerSpec::dense(d[0], d[1]);
        case LayerKind::conv2d: need(5); return LayerSpec::conv2d(d[0], d[1], d[2], d[3], d[4]);
        case LayerKind::relu: need(0); return LayerSpec::relu();
        case LayerKind::flatten: need(0); return LayerSpec::flatten();
        case LayerKind::avgpool2d: need(1); return LayerSpec::avgpool2d(d[0]);
    }
    fail(ErrorKind::parse, "unknown layer tag " + std::to_string(tag));
}

}  // namespace

void write_model(std::ostream& os, const Model& model) {
    using detail::put_le;
    os.write("XLK1", 4);
    put_le<std::uint16_t>(os, kModelFormatVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.input_shape().size()));
    for (auto d : model.input_shape()) put_le<std::uint64_t>(os, d);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.num_layers()));
    for (const auto& l : model.layers()) {
        put_le<std::uint8_t>(os, static_cast<std::uint8_t>(l.spec.kind));
        const auto dims = spec_dims(l.spec);
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
        for (auto d : dims) put_le<std::uint64_t>(os, d);
        put_le<std::uint64_t>(os, l.weights.size() + l.bias.size());
        for (double w : l.weights) put_le<double>(os, w);
        for (double b : l.bias) put_le<double>(os, b);
    }
}

Model read_model(std::istream& is) {
    using detail::get_le;
    detail::expect_magic(is, "XLK1");
    const auto version = get_le<std::uint16_t>(is);
    require(version == kModelFormatVersion, ErrorKind::parse, "unsupported model format version " +
                                                                  std::to_string(version));
    Shape input(get_le<std::uint32_t>(is));
    for (auto& d : input) d = get_le<std::uint64_t>(is);
    const auto count = get_le<std::uint32_t>(is);
    std::vector<LayerSpec> specs;
    std::vector<std::vector<double>> params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto tag = get_le<std::uint8_t>(is);
        std::vector<std::uint64_t> dims(get_le<std::uint32_t>(is));
        for (auto& d : dims) d = get_le<std::uint64_t>(is);
        specs.push_back(spec_from(tag, dims));
        std::vector<double> p(get_le<std::uint64_t>(is));
        for (double& v : p) v = get_le<double>(is);
        params.push_back(std::move(p));
    }
    Model model(input, specs);
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        Layer& l = model.layer(i);
        require(params[i].size() == l.weights.size() + l.bias.size(), ErrorKind::parse,
                "layer " + std::to_string(i) + " parameter count mismatch");
        std::copy_n(params[i].begin(), l.weights.size(), l.weights.begin());
        std::copy(params[i].begin() + static_cast<std::ptrdiff_t>(l.weights.size()), params[i].end(), l.bias.begin());
    }
    return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::io, "cannot write " + path.string());
    write_model(os, model);
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorKind::io, "cannot open " + path.string());
    return read_model(is);
}

}  // namespace xleak

namespace xleak {

Tensor as_model_input(const Model& model, const Tensor& x) {
    if (x.shape == model.input_shape()) return x;
    require(x.size() == shape_size(model.input_shape()), ErrorKind::input_shape,
            "input shape " + shape_str(x.shape) + " does not match model input " + shape_str(model.input_shape()));
    return x.reshaped(model.input_shape());
}

}  // namespace xleak
