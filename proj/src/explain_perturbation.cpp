#include <Eigen/Dense>

#include <algorithm>
#include <numeric>

#include "xleak/error.hpp"
#include "xleak/explain.hpp"

namespace xleak {

Shape default_occlusion_window(const Shape& input_shape) {
    Shape w(input_shape.size(), 1);
    if (input_shape.size() == 3) w[0] = input_shape[0];
    return w;
}

Tensor occlusion(const ScoreFn& score, const Tensor& x, const Shape& window, const Shape& strides,
                 double baseline_value) {
    const std::size_t rank = x.rank();
    require(window.size() == rank && strides.size() == rank, ErrorKind::invalid_argument,
            "occlusion window and strides need one entry per input dimension (" + std::to_string(rank) + ")");
    Shape positions(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        require(window[d] >= 1 && strides[d] >= 1, ErrorKind::invalid_argument,
                "occlusion window and strides must be positive");
        require(window[d] <= x.shape[d], ErrorKind::invalid_argument,
                "occlusion window " + shape_str(window) + " larger than input " + shape_str(x.shape));
        positions[d] = (x.shape[d] - window[d]) / strides[d] + 1;
    }
    Shape row_stride(rank, 1);
    for (std::size_t d = rank; d-- > 1;) row_stride[d - 1] = row_stride[d] * x.shape[d];

    const double full = score(x);
    std::vector<double> total(x.size(), 0.0);
    std::vector<std::size_t> hits(x.size(), 0);
    std::vector<std::size_t> covered;
    Shape pos(rank, 0);
    const std::size_t n_windows = shape_size(positions);
    for (std::size_t wi = 0; wi < n_windows; ++wi) {
        // Enumerate window cells as a small odometer over the window extent.
        covered.clear();
        Shape off(rank, 0);
        const std::size_t cells = shape_size(window);
        for (std::size_t ci = 0; ci < cells; ++ci) {
            std::size_t flat = 0;
            for (std::size_t d = 0; d < rank; ++d) flat += (pos[d] * strides[d] + off[d]) * row_stride[d];
            covered.push_back(flat);
            for (std::size_t d = rank; d-- > 0;) {
                if (++off[d] < window[d]) break;
                off[d] = 0;
            }
        }
        Tensor occluded = x;
        for (auto i : covered) occluded[i] = baseline_value;
        const double diff = full - score(occluded);
        for (auto i : covered) {
            total[i] += diff;
            ++hits[i];
        }
        for (std::size_t d = rank; d-- > 0;) {
            if (++pos[d] < positions[d]) break;
            pos[d] = 0;
        }
    }
    Tensor out(x.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = hits[i] ? total[i] / double(hits[i]) : 0.0;
    return out;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

// Weighted least squares for phi subject to sum(phi) == total, with the last
// coefficient eliminated. Rows are coalitions, y holds f(z) - f(empty).
std::vector<double> constrained_wls(const std::vector<std::vector<bool>>& coalitions, const std::vector<double>& y,
                                    const std::vector<double>& w, std::size_t k, double total) {
    if (k == 1) return {total};
    const auto m = static_cast<Eigen::Index>(k - 1);
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd a(m);
    for (std::size_t r = 0; r < coalitions.size(); ++r) {
        const auto& z = coalitions[r];
        const double zl = z[k - 1] ? 1.0 : 0.0;
        for (Eigen::Index i = 0; i < m; ++i) a[i] = (z[static_cast<std::size_t>(i)] ? 1.0 : 0.0) - zl;
        const double t = y[r] - zl * total;
        ata.noalias() += w[r] * a * a.transpose();
        atb.noalias() += (w[r] * t) * a;
    }
    Eigen::VectorXd sol;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 1e-12 * ata.diagonal().maxCoeff())
        sol = ldlt.solve(atb);
    else
        sol = ata.completeOrthogonalDecomposition().solve(atb);
    std::vector<double> phi(k);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        phi[static_cast<std::size_t>(i)] = sol[i];
        acc += sol[i];
    }
    phi[k - 1] = total - acc;
    return phi;
}

}  // namespace

SegmentAttribution kernel_shap(const ScoreFn& score, const Tensor& x, const Segmentation& seg,
                               std::size_t n_samples, double baseline_value, std::uint64_t seed) {
    require(seg.ids.size() == x.size(), ErrorKind::input_shape, "segmentation does not match the input");
    const std::size_t k = seg.count;
    const double f_full = score(x);
    const double f_empty = score(mask_segments(seg, x, std::vector<bool>(k, false), baseline_value));
    const double total = f_full - f_empty;

    std::vector<std::vector<bool>> coalitions;
    std::vector<double> weights;
    if (k <= kExactShapMaxSegments) {
        for (std::uint32_t bits = 1; bits + 1 < (1u << k); ++bits) {
            std::vector<bool> z(k);
            std::size_t s = 0;
            for (std::size_t i = 0; i < k; ++i) s += (z[i] = (bits >> i) & 1u);
            coalitions.push_back(std::move(z));
            weights.push_back(double(k - 1) / (binomial(k, s) * double(s) * double(k - s)));
        }
    } else {
        if (n_samples == 0) n_samples = 2 * k + 2048;
        require(n_samples >= k + 2, ErrorKind::invalid_argument,
                "kernel_shap needs at least " + std::to_string(k + 2) + " samples for " + std::to_string(k) +
                    " segments");
        Rng rng = make_rng(seed, 0x5ba9);
        std::vector<double> size_w;
        for (std::size_t s = 1; s < k; ++s) size_w.push_back(double(k - 1) / (double(s) * double(k - s)));
        std::discrete_distribution<std::size_t> pick_size(size_w.begin(), size_w.end());
        std::vector<std::size_t> order(k);
        // Coalitions are drawn in complementary pairs.
        while (coalitions.size() < n_samples) {
            const std::size_t s = pick_size(rng) + 1;
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<bool> z(k, false);
            for (std::size_t i = 0; i < s; ++i) z[order[i]] = true;
            std::vector<bool> comp(k);
            for (std::size_t i = 0; i < k; ++i) comp[i] = !z[i];
            coalitions.push_back(std::move(z));
            weights.push_back(1.0);
            if (coalitions.size() < n_samples) {
                coalitions.push_back(std::move(comp));
                weights.push_back(1.0);
            }
        }
    }

    std::vector<double> y(coalitions.size());
    for (std::size_t r = 0; r < coalitions.size(); ++r)
        y[r] = score(mask_segments(seg, x, coalitions[r], baseline_value)) - f_empty;

    SegmentAttribution out;
    out.segment_values = constrained_wls(coalitions, y, weights, k, total);
    out.map = broadcast_segments(seg, out.segment_values);
    return out;
}

}  // namespace xleak
