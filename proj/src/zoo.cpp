#include "xleak/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "xleak/error.hpp"
#include "xleak/rng.hpp"

namespace xleak {

using nlohmann::json;

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorKind::invalid_argument, "epochs must be >= 1");
    require(learning_rate > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    require(weight_decay >= 0.0, ErrorKind::invalid_argument, "weight decay must be nonnegative");
    require(batch_size >= 1, ErrorKind::invalid_argument, "batch size must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.schedule == LrSchedule::constant || cfg.epochs <= 1) return cfg.learning_rate;
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
    return 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<std::string> architecture_names() { return {"linear", "mlp_a", "mlp_b", "tiny_cnn"}; }

Shape architecture_input_shape(const std::string& name, const Shape& sample_shape) {
    if (name != "tiny_cnn") return {shape_size(sample_shape)};
    if (sample_shape.size() == 3) return sample_shape;
    const std::size_t d = shape_size(sample_shape);
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    require(side * side == d && side >= 2, ErrorKind::unsupported_architecture,
            "tiny_cnn needs (C,H,W) samples or a square feature count, got " + shape_str(sample_shape));
    return {1, side, side};
}

std::vector<LayerSpec> architecture(const std::string& name, const Shape& sample_shape, std::size_t num_classes) {
    const Shape in = architecture_input_shape(name, sample_shape);
    if (name == "linear") return {LayerSpec::dense(in[0], num_classes)};
    if (name == "mlp_a")
        return {LayerSpec::dense(in[0], 64), LayerSpec::relu(), LayerSpec::dense(64, 32), LayerSpec::relu(),
                LayerSpec::dense(32, num_classes)};
    if (name == "mlp_b") return {LayerSpec::dense(in[0], 128), LayerSpec::relu(), LayerSpec::dense(128, num_classes)};
    if (name == "tiny_cnn") {
        const std::size_t pooled = 8 * (in[1] / 2) * (in[2] / 2);
        return {LayerSpec::conv2d(in[0], 8, 3, 1, 1), LayerSpec::relu(), LayerSpec::avgpool2d(2), LayerSpec::flatten(),
                LayerSpec::dense(pooled, num_classes)};
    }
    fail(ErrorKind::config, "unknown architecture '" + name + "'");
}

double accuracy(const Model& model, const Dataset& data) {
    require(data.feature_count() == shape_size(model.input_shape()), ErrorKind::input_shape,
            "dataset samples " + shape_str(data.sample_shape) + " do not fit model input " +
                shape_str(model.input_shape()));
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor x = as_model_input(model, data.sample(i));
        if (static_cast<int>(predict_class(model, x)) == data.y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainedModel train(const std::vector<LayerSpec>& arch, const Dataset& data, const Dataset& test, const TrainConfig& cfg,
                   const std::string& arch_name) {
    cfg.validate();
    require(data.size() > 0, ErrorKind::invalid_argument, "empty training set");
    Shape input = arch.front().kind == LayerKind::conv2d ? architecture_input_shape("tiny_cnn", data.sample_shape)
                                                         : Shape{data.feature_count()};
    TrainedModel tm;
    tm.model = Model(input, arch);
    tm.architecture = arch_name;
    tm.config = cfg;
    Rng rng = make_rng(cfg.seed, 21);
    tm.model.init_uniform(rng);

    std::vector<Tensor> xs;
    xs.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) xs.push_back(as_model_input(tm.model, data.sample(i)));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Tensor> batch;
    std::vector<int> labels;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            labels.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(xs[order[k]]);
                labels.push_back(data.y[order[k]]);
            }
            const LossGradient lg = param_gradient(tm.model, batch, labels, Loss::cross_entropy);
            if (!std::isfinite(lg.loss))
                fail(ErrorKind::training_diverged, "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
            loss_sum += lg.loss * static_cast<double>(end - start);
            for (std::size_t li = 0; li < tm.model.num_layers(); ++li) {
                Layer& layer = tm.model.layer(li);
                for (std::size_t p = 0; p < layer.weights.size(); ++p)
                    layer.weights[p] -= lr * (lg.grads.weights[li][p] + cfg.weight_decay * layer.weights[p]);
                for (std::size_t p = 0; p < layer.bias.size(); ++p)
                    layer.bias[p] -= lr * (lg.grads.bias[li][p] + cfg.weight_decay * layer.bias[p]);
            }
        }
        if (!tm.model.parameters_finite())
            fail(ErrorKind::training_diverged, "training diverged (non-finite parameters) at epoch " + std::to_string(epoch));
        EpochLog entry;
        entry.epoch = epoch;
        entry.learning_rate = lr;
        entry.loss = loss_sum / static_cast<double>(data.size());
        entry.train_accuracy = accuracy(tm.model, data);
        entry.test_accuracy = test.size() ? accuracy(tm.model, test) : 0.0;
        tm.log.push_back(entry);
        tm.epochs_run = epoch + 1;
        if (cfg.target_test_accuracy && test.size() && entry.test_accuracy >= *cfg.target_test_accuracy) break;
    }
    tm.train_accuracy = tm.log.back().train_accuracy;
    tm.test_accuracy = tm.log.back().test_accuracy;
    return tm;
}

TrainedModel train(const std::string& arch_name, const Dataset& data, const Dataset& test, const TrainConfig& cfg) {
    return train(architecture(arch_name, data.sample_shape, data.num_classes), data, test, cfg, arch_name);
}

json train_config_to_json(const TrainConfig& cfg) {
    json j{{"epochs", cfg.epochs},
           {"learning_rate", cfg.learning_rate},
           {"weight_decay", cfg.weight_decay},
           {"schedule", cfg.schedule == LrSchedule::constant ? "constant" : "cosine_annealing"},
           {"batch_size", cfg.batch_size},
           {"seed", cfg.seed}};
    j["target_test_accuracy"] = cfg.target_test_accuracy ? json(*cfg.target_test_accuracy) : json(nullptr);
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    const std::string sched = j.value("schedule", "cosine_annealing");
    require(sched == "constant" || sched == "cosine_annealing", ErrorKind::config, "unknown schedule " + sched);
    cfg.schedule = sched == "constant" ? LrSchedule::constant : LrSchedule::cosine_annealing;
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("target_test_accuracy") && !j["target_test_accuracy"].is_null())
        cfg.target_test_accuracy = j["target_test_accuracy"].get<double>();
    return cfg;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::io, "cannot write " + path.string());
    os << "epoch,lr,loss,train_acc,test_acc\n";
    os.precision(17);
    for (const auto& e : log)
        os << e.epoch << ',' << e.learning_rate << ',' << e.loss << ',' << e.train_accuracy << ',' << e.test_accuracy
           << '\n';
}

void save_trained_model(const std::filesystem::path& stem, const TrainedModel& tm) {
    auto bin = stem;
    bin += ".xlk";
    save_model(bin, tm.model);
    json meta{{"architecture", tm.architecture},
              {"config", train_config_to_json(tm.config)},
              {"train_accuracy", tm.train_accuracy},
              {"test_accuracy", tm.test_accuracy},
              {"epochs_run", tm.epochs_run},
              {"seed", tm.config.seed},
              {"parameters", tm.model.parameter_count()}};
    auto side = stem;
    side += ".json";
    std::ofstream os(side);
    require(static_cast<bool>(os), ErrorKind::io, "cannot write " + side.string());
    os << meta.dump(2) << '\n';
}

TrainedModel load_trained_model(const std::filesystem::path& stem) {
    auto bin = stem;
    bin += ".xlk";
    auto side = stem;
    side += ".json";
    TrainedModel tm;
    tm.model = load_model(bin);
    std::ifstream is(side);
    require(static_cast<bool>(is), ErrorKind::io, "cannot open " + side.string());
    json meta;
    try {
        meta = json::parse(is);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, side.string() + ": " + e.what());
    }
    tm.architecture = meta.value("architecture", "custom");
    tm.config = train_config_from_json(meta.at("config"));
    tm.train_accuracy = meta.value("train_accuracy", 0.0);
    tm.test_accuracy = meta.value("test_accuracy", 0.0);
    tm.epochs_run = meta.value("epochs_run", std::size_t{0});
    return tm;
}

}  // namespace xleak
