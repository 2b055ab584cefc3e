#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace xleak {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. The carrier for inputs, activations,
// gradients and attributions.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> values);

    static Tensor vector(std::vector<double> values);
    static Tensor vector(std::initializer_list<double> values);

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    bool empty() const noexcept { return data.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // (c, h, w) access for rank-3 tensors.
    double& at(std::size_t c, std::size_t h, std::size_t w) {
        return data[(c * shape[1] + h) * shape[2] + w];
    }
    double at(std::size_t c, std::size_t h, std::size_t w) const {
        return data[(c * shape[1] + h) * shape[2] + w];
    }

    std::span<const double> values() const noexcept { return data; }

    Tensor reshaped(Shape s) const;
    bool operator==(const Tensor&) const = default;
};

bool all_finite(const Tensor& t);
std::size_t argmax(std::span<const double> v);
double sum(const Tensor& t);
double l2_norm(std::span<const double> v);
double l2_distance(std::span<const double> a, std::span<const double> b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);  // elementwise
Tensor operator*(double s, const Tensor& a);

Tensor softmax(const Tensor& logits);

}  // namespace xleak
