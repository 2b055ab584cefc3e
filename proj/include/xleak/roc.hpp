#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace xleak {

struct RocPoint {
    double threshold = 0.0;  // score >= threshold is predicted member; +inf for the origin
    std::uint64_t fp = 0;
    std::uint64_t tp = 0;
    double fpr = 0.0;
    double tpr = 0.0;
};

// One point per distinct score (ties grouped), from (0,0) to (1,1).
struct RocCurve {
    std::vector<RocPoint> points;
    std::uint64_t positives = 0;
    std::uint64_t negatives = 0;
};

// labels: 1 = member (positive), 0 = non-member.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// Trapezoid area, accumulated in integer counts so it equals the pairwise
// statistic (#greater + #ties/2) / (P*N) exactly.
double auc(const RocCurve& roc);

// Largest TPR over curve points whose empirical FPR is <= epsilon.
double mls(const RocCurve& roc, double epsilon);

// Mean of TPR and TNR when score >= threshold predicts member.
double balanced_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

// Columns: threshold,fpr,tpr.
void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc);

}  // namespace xleak
