#include <chrono>

#include "xleak/error.hpp"
#include "xleak/explain.hpp"

namespace xleak {

namespace {

Shape tuple_shape(const std::vector<std::int64_t>& t) {
    Shape s;
    for (auto v : t) s.push_back(static_cast<std::size_t>(v));
    return s;
}

Segmentation params_segmentation(const Tensor& x, const ExplainerParams& p) {
    return segment_grid_clamped(x.shape, static_cast<std::size_t>(p.get_int("n_segments")),
                                double(p.get_int("compactness")));
}

Tensor run_explainer(const Model& model, const Tensor& x, std::size_t c, ExplainerKind kind,
                     const ExplainerParams& p, const ExplainContext& ctx) {
    const OutputMode mode = ctx.mode;
    switch (kind) {
        case ExplainerKind::saliency: return grad_explain(model, x, c, ReluRule::standard, false, true, mode);
        case ExplainerKind::deconvolution: return grad_explain(model, x, c, ReluRule::deconv, false, false, mode);
        case ExplainerKind::guided_backprop: return grad_explain(model, x, c, ReluRule::guided, false, false, mode);
        case ExplainerKind::input_x_gradient:
            return grad_explain(model, x, c, ReluRule::standard, true, false, mode);
        case ExplainerKind::smoothgrad:
        case ExplainerKind::vargrad: {
            NoiseConfig nc;
            nc.n = static_cast<std::size_t>(p.get_int("nt_samples"));
            nc.stdevs = p.get_real("stdevs");
            nc.aggregator =
                kind == ExplainerKind::smoothgrad ? NoiseAggregator::mean_abs_grad : NoiseAggregator::variance_grad;
            nc.draw_baseline_from_distrib = p.get_bool("draw_baseline_from_distrib");
            nc.reference = ctx.reference;
            nc.seed = ctx.seed;
            return noise_aggregate(model, x, c, nc, mode);
        }
        case ExplainerKind::integrated_gradients:
            return integrated_gradients(model, x, c, Tensor(x.shape), static_cast<std::size_t>(p.get_int("n_steps")),
                                        ig_method_from_name(p.get_string("method")), p.get_bool("multiply_by_inputs"),
                                        mode);
        case ExplainerKind::deeplift: return deeplift(model, x, Tensor(x.shape), c, mode);
        case ExplainerKind::occlusion: {
            Shape window = tuple_shape(p.get_tuple("sliding_window_shapes"));
            if (window.empty()) window = default_occlusion_window(x.shape);
            Shape strides = tuple_shape(p.get_tuple("strides"));
            if (strides.empty()) strides = window;
            return occlusion(model_score(model, c, mode), x, window, strides, p.get_real("baseline_value"));
        }
        case ExplainerKind::kernel_shap:
            return kernel_shap(model_score(model, c, mode), x, params_segmentation(x, p),
                               static_cast<std::size_t>(p.get_int("n_samples")), p.get_real("baseline_value"),
                               ctx.seed)
                .map;
        case ExplainerKind::lime: {
            LimeConfig lc;
            lc.n_samples = static_cast<std::size_t>(p.get_int("n_samples"));
            lc.kernel_width = p.get_real("kernel_width");
            lc.ridge_lambda = p.get_real("ridge_lambda");
            lc.baseline_value = p.get_real("baseline_value");
            lc.seed = ctx.seed;
            return lime(model_score(model, c, mode), x, params_segmentation(x, p), lc).map;
        }
        case ExplainerKind::gradcam:
        case ExplainerKind::gradcam_pp:
            return gradcam(model, x, c, p.get_int("layer_index"),
                           kind == ExplainerKind::gradcam ? CamVariant::gradcam : CamVariant::gradcam_pp,
                           interpolation_from_name(p.get_string("interpolation_mode")),
                           p.get_bool("attr_to_layer_input"), mode);
        case ExplainerKind::anchors: {
            AnchorConfig ac;
            ac.threshold = p.get_real("threshold");
            ac.tau = p.get_real("tau");
            ac.delta = p.get_real("delta");
            ac.beam_size = static_cast<std::size_t>(p.get_int("beam_size"));
            ac.p_sample = p.get_real("p_sample");
            ac.coverage_samples = static_cast<std::size_t>(p.get_int("coverage_samples"));
            ac.batch_size = static_cast<std::size_t>(p.get_int("batch_size"));
            ac.max_batches = static_cast<std::size_t>(p.get_int("max_batches"));
            ac.baseline_value = p.get_real("baseline_value");
            ac.seed = ctx.seed;
            // Every segmentation_fn choice maps onto the grid segmenter.
            return anchors(model_classifier(model), x, params_segmentation(x, p), ac).mask;
        }
        case ExplainerKind::protodash: {
            const Dataset& ref = *ctx.reference;
            const std::size_t pred = predict_class(model, x);
            std::vector<std::vector<double>> targets{penultimate_embedding(model, x)};
            const auto pool = static_cast<std::size_t>(p.get_int("target_pool"));
            for (std::size_t i = 0; i < ref.size() && targets.size() <= pool; ++i) {
                const Tensor r = as_model_input(model, ref.sample(i));
                if (predict_class(model, r) == pred) targets.push_back(penultimate_embedding(model, r));
            }
            const std::size_t n_cand = std::min<std::size_t>(ref.size(), static_cast<std::size_t>(p.get_int("candidates")));
            std::vector<std::vector<double>> cands;
            for (std::size_t i = 0; i < n_cand; ++i)
                cands.push_back(penultimate_embedding(model, as_model_input(model, ref.sample(i))));
            const auto res = protodash(targets, cands, static_cast<std::size_t>(p.get_int("m")), p.get_real("sigma"),
                                       p.get_string("kernel") == "gaussian" ? ProtoKernel::gaussian
                                                                            : ProtoKernel::linear);
            return Tensor({n_cand}, res.candidate_weights);
        }
    }
    fail(ErrorKind::invalid_argument, "unknown explainer");
}

}  // namespace

std::optional<std::string> incompatibility(const Model& model, ExplainerKind kind, const ExplainContext& ctx) {
    if ((kind == ExplainerKind::gradcam || kind == ExplainerKind::gradcam_pp) && conv_layer_indices(model).empty())
        return std::string(explainer_name(kind)) + " needs a model with a conv2d layer";
    if (kind == ExplainerKind::protodash && (ctx.reference == nullptr || ctx.reference->size() == 0))
        return std::string("protodash needs a reference sample pool");
    return std::nullopt;
}

AttributionMap explain(const Model& model, const Tensor& x, ExplainerKind kind, const ExplainerParams& params,
                       const ExplainContext& ctx) {
    if (auto why = incompatibility(model, kind, ctx)) {
        const bool arch = kind == ExplainerKind::gradcam || kind == ExplainerKind::gradcam_pp;
        fail(arch ? ErrorKind::unsupported_architecture : ErrorKind::invalid_argument, *why);
    }
    AttributionMap out;
    out.method = kind;
    out.params = resolve_params(kind, params);
    const auto start = std::chrono::steady_clock::now();

    const Tensor xm = as_model_input(model, x);
    const std::size_t c = ctx.class_index ? *ctx.class_index : predict_class(model, xm);
    require(c < model.num_classes(), ErrorKind::class_out_of_range,
            "class index " + std::to_string(c) + " out of range");
    Tensor values = run_explainer(model, xm, c, kind, out.params, ctx);
    if (kind != ExplainerKind::protodash) values = values.reshaped(x.shape);
    require(all_finite(values), ErrorKind::invalid_argument,
            std::string(explainer_name(kind)) + " produced non-finite attributions");

    out.values = std::move(values);
    out.class_index = static_cast<std::int32_t>(c);
    out.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace xleak
