#include "xleak/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xleak/error.hpp"

namespace xleak {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::input_shape: return "input-shape";
        case ErrorKind::class_out_of_range: return "class-out-of-range";
        case ErrorKind::unsupported_layer: return "unsupported-layer";
        case ErrorKind::unsupported_architecture: return "unsupported-architecture";
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::parse: return "parse";
        case ErrorKind::io: return "io";
        case ErrorKind::config: return "config";
        case ErrorKind::training_diverged: return "training-diverged";
        case ErrorKind::singular_design: return "singular-design";
        case ErrorKind::undefined_baseline: return "undefined-baseline";
    }
    return "unknown";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    require(shape_size(shape) == data.size(), ErrorKind::input_shape,
            "tensor shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                " values");
}

Tensor Tensor::vector(std::vector<double> values) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return vector(std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape s) const {
    return Tensor(std::move(s), data);
}

bool all_finite(const Tensor& t) {
    return std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double sum(const Tensor& t) {
    return std::accumulate(t.data.begin(), t.data.end(), 0.0);
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

template <typename Op>
Tensor zip(const Tensor& a, const Tensor& b, Op op) {
    require(a.size() == b.size(), ErrorKind::input_shape,
            "elementwise op on mismatched shapes " + shape_str(a.shape) + " and " + shape_str(b.shape));
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = op(a.data[i], b.data[i]);
    return out;
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) { return zip(a, b, std::plus<>()); }
Tensor operator-(const Tensor& a, const Tensor& b) { return zip(a, b, std::minus<>()); }
Tensor operator*(const Tensor& a, const Tensor& b) { return zip(a, b, std::multiplies<>()); }

Tensor operator*(double s, const Tensor& a) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

Tensor softmax(const Tensor& logits) {
    Tensor out(logits.shape);
    const double m = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.data[i] = std::exp(logits.data[i] - m);
        z += out.data[i];
    }
    for (double& v : out.data) v /= z;
    return out;
}

}  // namespace xleak
