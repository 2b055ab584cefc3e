#include "xleak/roc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "xleak/error.hpp"

namespace xleak {

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), ErrorKind::invalid_argument, "one label per score expected");
    RocCurve roc;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        require(labels[i] == 0 || labels[i] == 1, ErrorKind::invalid_argument, "labels must be 0 or 1");
        require(std::isfinite(scores[i]), ErrorKind::invalid_argument, "scores must be finite");
        (labels[i] ? roc.positives : roc.negatives) += 1;
    }
    require(roc.positives > 0 && roc.negatives > 0, ErrorKind::invalid_argument,
            "ROC needs at least one member and one non-member");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const double P = double(roc.positives), N = double(roc.negatives);
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0, 0, 0.0, 0.0});
    std::uint64_t fp = 0, tp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] ? tp : fp) += 1;
        roc.points.push_back({t, fp, tp, double(fp) / N, double(tp) / P});
    }
    return roc;
}

double auc(const RocCurve& roc) {
    std::uint64_t twice_area = 0;  // in units of 1/(P*N)
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const auto& a = roc.points[i - 1];
        const auto& b = roc.points[i];
        twice_area += (b.fp - a.fp) * (b.tp + a.tp);
    }
    return double(twice_area) / (2.0 * double(roc.positives) * double(roc.negatives));
}

double mls(const RocCurve& roc, double epsilon) {
    require(epsilon >= 0.0 && epsilon < 1.0, ErrorKind::invalid_argument, "epsilon must lie in [0,1)");
    double best = 0.0;
    for (const auto& p : roc.points)
        if (p.fpr <= epsilon) best = std::max(best, p.tpr);
    return best;
}

double balanced_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
    require(scores.size() == labels.size(), ErrorKind::invalid_argument, "one label per score expected");
    std::uint64_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i]) {
            ++pos;
            tp += predicted;
        } else {
            ++neg;
            tn += !predicted;
        }
    }
    require(pos > 0 && neg > 0, ErrorKind::invalid_argument, "balanced accuracy needs both classes");
    return 0.5 * (double(tp) / double(pos) + double(tn) / double(neg));
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc) {
    std::ofstream os(path);
    require(bool(os), ErrorKind::io, "cannot open " + path.string() + " for writing");
    os << "threshold,fpr,tpr\n";
    char buf[32];
    auto put = [&](double v) {
        if (std::isinf(v)) {
            os << (v > 0 ? "inf" : "-inf");
            return;
        }
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        os.write(buf, r.ptr - buf);
    };
    for (const auto& p : roc.points) {
        put(p.threshold);
        os << ',';
        put(p.fpr);
        os << ',';
        put(p.tpr);
        os << '\n';
    }
}

}  // namespace xleak
