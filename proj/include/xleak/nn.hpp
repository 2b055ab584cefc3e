#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xleak/rng.hpp"
#include "xleak/tensor.hpp"

namespace xleak {

enum class LayerKind : std::uint8_t { dense = 0, conv2d = 1, relu = 2, flatten = 3, avgpool2d = 4 };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    // dense
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    // conv2d (kernel is also the avgpool window; pooling stride equals its window)
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride = 1, std::size_t padding = 0);
    static LayerSpec relu();
    static LayerSpec flatten();
    static LayerSpec avgpool2d(std::size_t window);

    bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
    bool operator==(const LayerSpec&) const = default;
};

struct Layer {
    LayerSpec spec;
    Shape in_shape;
    Shape out_shape;
    std::vector<double> weights;  // dense: [out][in]; conv2d: [out][in][k][k]
    std::vector<double> bias;

    std::size_t fan_in() const;
    bool operator==(const Layer&) const = default;
};

// A feed-forward network over the five supported layer kinds. Construction
// validates that consecutive layers compose and allocates zeroed parameters.
class Model {
public:
    Model() = default;
    Model(Shape input_shape, const std::vector<LayerSpec>& specs);

    const Shape& input_shape() const noexcept { return input_shape_; }
    const Shape& output_shape() const;
    std::size_t num_classes() const { return shape_size(output_shape()); }
    std::size_t num_layers() const noexcept { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }
    Layer& layer(std::size_t i) { return layers_.at(i); }
    std::span<const Layer> layers() const noexcept { return layers_; }
    std::vector<LayerSpec> specs() const;

    std::size_t parameter_count() const;
    double parameter_l2_norm() const;
    bool parameters_finite() const;

    // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
    void init_uniform(Rng& rng);

    bool operator==(const Model&) const = default;

private:
    Shape input_shape_;
    std::vector<Layer> layers_;
};

struct ActivationTrace {
    Tensor input;
    std::vector<Tensor> outputs;  // one per layer

    const Tensor& input_of(std::size_t layer) const { return layer == 0 ? input : outputs[layer - 1]; }
};

struct ForwardResult {
    Tensor logits;
    ActivationTrace trace;
};

ForwardResult forward(const Model& model, const Tensor& x);
Tensor predict(const Model& model, const Tensor& x);
std::size_t predict_class(const Model& model, const Tensor& x);

// Which scalar of the network an explanation differentiates or perturbs.
enum class OutputMode { logit, probability };

double class_score(const Tensor& logits, std::size_t class_index, OutputMode mode);
// d score / d logits for one class.
Tensor class_score_seed(const Tensor& logits, std::size_t class_index, OutputMode mode);

enum class ReluRule { standard, deconv, guided };

const char* relu_rule_name(ReluRule rule);

// Invoked at every relu layer during a backward sweep; rewrites the incoming
// gradient (w.r.t. the relu output) into the gradient w.r.t. its input.
using ReluBackward =
    std::function<void(std::size_t layer, const Tensor& pre_activation, std::vector<double>& grad)>;

ReluBackward relu_backward(ReluRule rule);

struct ParamGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    ParamGradients() = default;
    explicit ParamGradients(const Model& model);
};

// Propagates grad_out (w.r.t. the network output) back through layers
// [first_layer, L) and returns the gradient w.r.t. the input of first_layer.
// Parameter gradients are accumulated into `params` when given.
Tensor backpropagate(const Model& model, const ActivationTrace& trace, Tensor grad_out,
                     std::size_t first_layer, const ReluBackward& relu, ParamGradients* params = nullptr);

Tensor input_gradient(const Model& model, const Tensor& x, std::size_t class_index,
                      ReluRule rule = ReluRule::standard, OutputMode mode = OutputMode::logit);

enum class Loss { cross_entropy, squared_error };

struct LossGradient {
    double loss = 0.0;
    ParamGradients grads;
};

// Mean loss and mean parameter gradients over a batch. Squared error is taken
// against the one-hot label vector: 0.5 * ||logits - onehot||^2.
LossGradient param_gradient(const Model& model, std::span<const Tensor> batch,
                            std::span<const int> labels, Loss loss = Loss::cross_entropy);

struct LayerProbe {
    Tensor activation;  // A^k
    Tensor gradient;    // d score / d A^k
};

// Activation and class-score gradient at a conv2d layer. With layer_input the
// probe is taken at the conv layer's input instead of its output.
LayerProbe layer_probe(const Model& model, const Tensor& x, std::size_t class_index,
                       std::size_t layer_index, bool layer_input = false,
                       OutputMode mode = OutputMode::logit);

std::vector<std::size_t> conv_layer_indices(const Model& model);

// Binary persistence ("XLK1").
void write_model(std::ostream& os, const Model& model);
Model read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace xleak

namespace xleak {

// Views x with the model's input shape when the element counts agree, so a
// flat sample can feed a conv model and vice versa.
Tensor as_model_input(const Model& model, const Tensor& x);

}  // namespace xleak
