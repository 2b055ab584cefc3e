#include <algorithm>
#include <cmath>

#include "xleak/error.hpp"
#include "xleak/explain.hpp"

namespace xleak {

namespace {

double kernel_value(const std::vector<double>& a, const std::vector<double>& b, double sigma, ProtoKernel kernel) {
    if (kernel == ProtoKernel::linear) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }
    const double d = l2_distance(a, b);
    return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

}  // namespace

ProtoDashResult protodash(const std::vector<std::vector<double>>& targets,
                          const std::vector<std::vector<double>>& candidates, std::size_t m, double sigma,
                          ProtoKernel kernel) {
    require(!candidates.empty(), ErrorKind::invalid_argument, "protodash needs a non-empty candidate set");
    require(!targets.empty(), ErrorKind::invalid_argument, "protodash needs at least one target");
    require(m >= 1, ErrorKind::invalid_argument, "protodash needs m >= 1");
    require(kernel == ProtoKernel::linear || sigma > 0.0, ErrorKind::invalid_argument, "sigma must be positive");
    const std::size_t dim = candidates.front().size();
    for (const auto& v : candidates)
        require(v.size() == dim, ErrorKind::input_shape, "candidate embeddings differ in size");
    for (const auto& v : targets) require(v.size() == dim, ErrorKind::input_shape, "target embedding size mismatch");

    const std::size_t n = candidates.size();
    std::vector<double> mu(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (const auto& t : targets) mu[j] += kernel_value(candidates[j], t, sigma, kernel);
        mu[j] /= double(targets.size());
    }
    std::vector<double> diag(n);
    for (std::size_t j = 0; j < n; ++j) diag[j] = kernel_value(candidates[j], candidates[j], sigma, kernel);

    ProtoDashResult res;
    std::vector<std::vector<double>> k_rows;  // K[s, :] for each picked s
    std::vector<double> w;                    // weights of picked prototypes
    auto gradient = [&](std::size_t j) {
        double g = mu[j];
        for (std::size_t s = 0; s < w.size(); ++s) g -= k_rows[s][j] * w[s];
        return g;
    };
    auto objective = [&]() {
        double f = 0.0;
        for (std::size_t s = 0; s < w.size(); ++s) {
            f += w[s] * mu[res.prototypes[s]];
            for (std::size_t t = 0; t < w.size(); ++t) f -= 0.5 * w[s] * w[t] * k_rows[s][res.prototypes[t]];
        }
        return f;
    };

    std::vector<bool> picked(n, false);
    while (res.prototypes.size() < std::min(m, n)) {
        // Gain of adding j alone at its optimal nonnegative weight.
        std::size_t best = n;
        double best_gain = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (picked[j] || diag[j] <= 0.0) continue;
            const double g = std::max(gradient(j), 0.0);
            const double gain = g * g / diag[j];
            if (gain > best_gain) {
                best_gain = gain;
                best = j;
            }
        }
        if (best == n) break;
        picked[best] = true;
        res.prototypes.push_back(best);
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) row[j] = kernel_value(candidates[best], candidates[j], sigma, kernel);
        k_rows.push_back(std::move(row));
        w.push_back(0.0);

        // Nonnegative refit by warm-started coordinate descent; each update
        // is exact on its coordinate so the objective never decreases.
        for (int sweep = 0; sweep < 500; ++sweep) {
            double change = 0.0;
            for (std::size_t s = 0; s < w.size(); ++s) {
                const std::size_t j = res.prototypes[s];
                const double g = gradient(j);
                const double next = std::max(0.0, w[s] + g / diag[j]);
                change = std::max(change, std::abs(next - w[s]));
                w[s] = next;
            }
            if (change < 1e-12) break;
        }
        res.objective.push_back(objective());
    }
    res.weights = w;
    res.candidate_weights.assign(n, 0.0);
    for (std::size_t s = 0; s < w.size(); ++s) res.candidate_weights[res.prototypes[s]] = w[s];
    return res;
}

std::vector<double> penultimate_embedding(const Model& model, const Tensor& x) {
    const ForwardResult fr = forward(model, x);
    const Tensor& e = fr.trace.input_of(model.num_layers() - 1);
    return e.data;
}

}  // namespace xleak
