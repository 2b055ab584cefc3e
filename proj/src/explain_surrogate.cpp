#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xleak/error.hpp"
#include "xleak/explain.hpp"

namespace xleak {

namespace {

// Cosine distance between a binary mask and the all-ones mask.
double cosine_to_ones(const std::vector<bool>& z) {
    const auto on = static_cast<double>(std::count(z.begin(), z.end(), true));
    if (on == 0.0) return 1.0;
    return 1.0 - on / (std::sqrt(on) * std::sqrt(double(z.size())));
}

}  // namespace

SegmentAttribution lime(const ScoreFn& score, const Tensor& x, const Segmentation& seg, const LimeConfig& cfg) {
    require(seg.ids.size() == x.size(), ErrorKind::input_shape, "segmentation does not match the input");
    require(cfg.kernel_width > 0.0, ErrorKind::invalid_argument, "kernel_width must be positive");
    require(cfg.ridge_lambda >= 0.0, ErrorKind::invalid_argument, "ridge_lambda must be >= 0");
    const std::size_t k = seg.count;
    require(cfg.n_samples >= k + 2, ErrorKind::singular_design,
            "lime needs at least " + std::to_string(k + 2) + " samples for " + std::to_string(k) + " segments");

    std::vector<std::vector<bool>> masks;
    masks.emplace_back(k, true);
    const bool enumerate = k < 63 && cfg.n_samples >= (std::uint64_t{1} << k);
    if (enumerate) {
        const std::uint64_t all = (std::uint64_t{1} << k) - 1;
        for (std::uint64_t bits = 0; bits < all; ++bits) {
            std::vector<bool> z(k);
            for (std::size_t i = 0; i < k; ++i) z[i] = (bits >> i) & 1u;
            masks.push_back(std::move(z));
        }
    } else {
        Rng rng = make_rng(cfg.seed, 0x11e);
        std::vector<std::size_t> order(k);
        std::uniform_int_distribution<std::size_t> n_off(1, k);
        while (masks.size() < cfg.n_samples) {
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            std::vector<bool> z(k, true);
            const std::size_t off = n_off(rng);
            for (std::size_t i = 0; i < off; ++i) z[order[i]] = false;
            masks.push_back(std::move(z));
        }
    }

    const auto n = static_cast<Eigen::Index>(masks.size());
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd Z(n, kk);
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& z = masks[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < kk; ++c) Z(r, c) = z[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
        y[r] = score(mask_segments(seg, x, z, cfg.baseline_value));
        const double d = cosine_to_ones(z);
        w[r] = std::exp(-(d * d) / (cfg.kernel_width * cfg.kernel_width));
    }

    // Unpenalised intercept: centre by the weighted means, then ridge.
    const double wsum = w.sum();
    require(wsum > 0.0, ErrorKind::singular_design, "all lime sample weights vanished");
    const Eigen::RowVectorXd zmean = (w.asDiagonal() * Z).colwise().sum() / wsum;
    const double ymean = w.dot(y) / wsum;
    const Eigen::MatrixXd Zc = Z.rowwise() - zmean;
    const Eigen::VectorXd yc = y.array() - ymean;
    Eigen::MatrixXd A = Zc.transpose() * w.asDiagonal() * Zc;
    const Eigen::VectorXd b = Zc.transpose() * w.asDiagonal() * yc;
    A.diagonal().array() += cfg.ridge_lambda;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    require(qr.rank() == kk, ErrorKind::singular_design,
            "weighted lime design is singular (rank " + std::to_string(qr.rank()) + " of " + std::to_string(k) +
                "); raise n_samples or ridge_lambda");
    const Eigen::VectorXd coef = qr.solve(b);

    SegmentAttribution out;
    out.segment_values.assign(coef.data(), coef.data() + coef.size());
    out.map = broadcast_segments(seg, out.segment_values);
    return out;
}

namespace {

struct PrecisionEstimate {
    double mean = 0.0;
    double bound = 0.0;  // Hoeffding half-width
    std::size_t draws = 0;
};

class AnchorSearch {
public:
    AnchorSearch(const ClassifyFn& classify, const Tensor& x, const Segmentation& seg, const AnchorConfig& cfg)
        : classify_(classify), x_(x), seg_(seg), cfg_(cfg), target_(classify(x)),
          rng_(make_rng(cfg.seed, 0xa2c)) {
        Rng cov_rng = make_rng(cfg.seed, 0xc0e);
        std::bernoulli_distribution masked(cfg.p_sample);
        coverage_masks_.resize(cfg.coverage_samples);
        for (auto& m : coverage_masks_) {
            m.resize(seg.count);
            for (std::size_t s = 0; s < seg.count; ++s) m[s] = masked(cov_rng);
        }
    }

    double coverage(const std::vector<std::size_t>& anchor) const {
        if (coverage_masks_.empty()) return 1.0;
        std::size_t hit = 0;
        for (const auto& m : coverage_masks_) {
            bool ok = true;
            for (auto s : anchor) ok = ok && !m[s];
            hit += ok;
        }
        return double(hit) / double(coverage_masks_.size());
    }

    PrecisionEstimate precision(const std::vector<std::size_t>& anchor) {
        std::vector<bool> fixed(seg_.count, false);
        for (auto s : anchor) fixed[s] = true;
        std::bernoulli_distribution masked(cfg_.p_sample);
        const std::size_t cap = std::max<std::size_t>(1, std::min(cfg_.max_batches * cfg_.batch_size, cfg_.coverage_samples));
        PrecisionEstimate est;
        std::size_t agree = 0;
        std::vector<bool> keep(seg_.count);
        while (est.draws < cap) {
            for (std::size_t b = 0; b < cfg_.batch_size && est.draws < cap; ++b, ++est.draws) {
                for (std::size_t s = 0; s < seg_.count; ++s) keep[s] = fixed[s] || !masked(rng_);
                agree += classify_(mask_segments(seg_, x_, keep, cfg_.baseline_value)) == target_;
            }
            est.mean = double(agree) / double(est.draws);
            est.bound = std::sqrt(std::log(2.0 / cfg_.delta) / (2.0 * double(est.draws)));
            if (accepted(est) || est.mean + est.bound < cfg_.threshold) break;
        }
        return est;
    }

    bool accepted(const PrecisionEstimate& e) const {
        return e.mean >= cfg_.threshold && e.mean - e.bound >= cfg_.threshold - cfg_.tau;
    }

    std::size_t target() const { return target_; }

private:
    const ClassifyFn& classify_;
    const Tensor& x_;
    const Segmentation& seg_;
    const AnchorConfig& cfg_;
    std::size_t target_;
    Rng rng_;
    std::vector<std::vector<bool>> coverage_masks_;
};

}  // namespace

AnchorResult anchors(const ClassifyFn& classify, const Tensor& x, const Segmentation& seg, const AnchorConfig& cfg) {
    require(seg.ids.size() == x.size(), ErrorKind::input_shape, "segmentation does not match the input");
    require(cfg.threshold >= 0.0 && cfg.threshold <= 1.0 && cfg.tau >= 0.0 && cfg.tau <= 1.0 && cfg.delta > 0.0 &&
                cfg.delta < 1.0 && cfg.p_sample >= 0.0 && cfg.p_sample <= 1.0,
            ErrorKind::invalid_argument, "anchor thresholds out of range");
    require(cfg.beam_size >= 1 && cfg.batch_size >= 1 && cfg.max_batches >= 1, ErrorKind::invalid_argument,
            "beam_size, batch_size and max_batches must be >= 1");

    AnchorSearch search(classify, x, seg, cfg);
    auto finish = [&](std::vector<std::size_t> anchor, double precision, bool found) {
        std::sort(anchor.begin(), anchor.end());
        AnchorResult r;
        r.coverage = search.coverage(anchor);
        r.precision = precision;
        r.found = found;
        std::vector<double> on(seg.count, 0.0);
        for (auto s : anchor) on[s] = 1.0;
        r.mask = broadcast_segments(seg, on);
        r.anchor = std::move(anchor);
        return r;
    };

    const PrecisionEstimate empty = search.precision({});
    if (search.accepted(empty)) return finish({}, empty.mean, true);

    std::vector<std::vector<std::size_t>> beam{{}};
    for (std::size_t size = 1; size <= seg.count; ++size) {
        struct Candidate {
            std::vector<std::size_t> anchor;
            PrecisionEstimate est;
        };
        std::vector<Candidate> cands;
        std::vector<std::vector<std::size_t>> seen;
        for (const auto& base : beam) {
            for (std::size_t s = 0; s < seg.count; ++s) {
                if (std::find(base.begin(), base.end(), s) != base.end()) continue;
                auto a = base;
                a.push_back(s);
                std::sort(a.begin(), a.end());
                if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
                seen.push_back(a);
                cands.push_back({a, search.precision(a)});
            }
        }
        if (cands.empty()) break;

        // Among accepted candidates prefer coverage, then precision, then order.
        const Candidate* best = nullptr;
        double best_cov = -1.0;
        for (const auto& c : cands) {
            if (!search.accepted(c.est)) continue;
            const double cov = search.coverage(c.anchor);
            if (cov > best_cov || (cov == best_cov && c.est.mean > best->est.mean)) {
                best = &c;
                best_cov = cov;
            }
        }
        if (best) return finish(best->anchor, best->est.mean, true);

        std::stable_sort(cands.begin(), cands.end(),
                         [](const Candidate& a, const Candidate& b) { return a.est.mean > b.est.mean; });
        beam.clear();
        for (std::size_t i = 0; i < std::min(cfg.beam_size, cands.size()); ++i) beam.push_back(cands[i].anchor);
    }

    std::vector<std::size_t> all(seg.count);
    std::iota(all.begin(), all.end(), 0);
    return finish(all, 1.0, false);
}

}  // namespace xleak
