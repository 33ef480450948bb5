#include "oodratio/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "oodratio/error.hpp"

namespace oodratio {

namespace {

void validate(const LabeledScores& scores) {
    if (scores.in_scores.empty() || scores.ood_scores.empty()) {
        raise(ErrorCode::EmptyClass,
              "metrics need at least one score in each class (got " +
                  std::to_string(scores.in_scores.size()) + " in-distribution, " +
                  std::to_string(scores.ood_scores.size()) + " OOD)");
    }
    for (const double s : scores.in_scores) {
        if (!std::isfinite(s)) {
            raise(ErrorCode::NonFiniteScore, "non-finite in-distribution score");
        }
    }
    for (const double s : scores.ood_scores) {
        if (!std::isfinite(s)) {
            raise(ErrorCode::NonFiniteScore, "non-finite OOD score");
        }
    }
}

// Unique score values in descending order, each with the number of OOD and
// in-distribution samples sitting exactly at that value. All sweeps below
// run on these groups so ties are handled once, identically, everywhere.
struct Group {
    double threshold;
    std::size_t ood_at;
    std::size_t in_at;
};

std::vector<Group> grouped_thresholds(const LabeledScores& scores) {
    std::vector<std::pair<double, bool>> all;  // (score, is_ood)
    all.reserve(scores.in_scores.size() + scores.ood_scores.size());
    for (const double s : scores.in_scores) all.emplace_back(s, false);
    for (const double s : scores.ood_scores) all.emplace_back(s, true);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    std::vector<Group> groups;
    for (std::size_t i = 0; i < all.size();) {
        Group g{all[i].first, 0, 0};
        for (; i < all.size() && all[i].first == g.threshold; ++i) {
            (all[i].second ? g.ood_at : g.in_at) += 1;
        }
        groups.push_back(g);
    }
    return groups;
}

}  // namespace

double auroc(const LabeledScores& scores) {
    validate(scores);
    std::vector<double> in_sorted = scores.in_scores;
    std::sort(in_sorted.begin(), in_sorted.end());
    // Twice the Mann-Whitney U kept in integers: 2 per win, 1 per tie.
    std::uint64_t u2 = 0;
    for (const double s : scores.ood_scores) {
        const auto lo = std::lower_bound(in_sorted.begin(), in_sorted.end(), s);
        const auto hi = std::upper_bound(lo, in_sorted.end(), s);
        const auto wins = static_cast<std::uint64_t>(lo - in_sorted.begin());
        const auto ties = static_cast<std::uint64_t>(hi - lo);
        u2 += 2 * wins + ties;
    }
    return static_cast<double>(u2) /
           (2.0 * static_cast<double>(scores.in_scores.size()) *
            static_cast<double>(scores.ood_scores.size()));
}

double aupr_ood(const LabeledScores& scores) {
    validate(scores);
    const double n_ood = static_cast<double>(scores.ood_scores.size());
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tp_prev = 0;
    double ap = 0.0;
    for (const Group& g : grouped_thresholds(scores)) {
        tp += g.ood_at;
        fp += g.in_at;
        if (tp != tp_prev) {
            const double recall_step =
                static_cast<double>(tp - tp_prev) / n_ood;
            const double precision =
                static_cast<double>(tp) / static_cast<double>(tp + fp);
            ap += recall_step * precision;
            tp_prev = tp;
        }
    }
    return ap;
}

OperatingPoint fpr_at_tpr(const LabeledScores& scores, double target_tpr) {
    validate(scores);
    if (!(target_tpr > 0.0) || target_tpr > 1.0) {
        raise(ErrorCode::ConfigError, "target TPR must lie in (0, 1]");
    }
    const double n_in = static_cast<double>(scores.in_scores.size());
    const double n_ood = static_cast<double>(scores.ood_scores.size());
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const Group& g : grouped_thresholds(scores)) {
        tp += g.ood_at;
        fp += g.in_at;
        if (static_cast<double>(tp) / n_ood >= target_tpr) {
            return {static_cast<double>(fp) / n_in, g.threshold};
        }
    }
    // Unreachable: the final group always reaches TPR = 1 >= target.
    raise(ErrorCode::DataInvariant, "threshold sweep never reached target TPR");
}

std::vector<std::pair<double, double>> roc_points(const LabeledScores& scores) {
    validate(scores);
    const double n_in = static_cast<double>(scores.in_scores.size());
    const double n_ood = static_cast<double>(scores.ood_scores.size());
    std::vector<std::pair<double, double>> points;
    points.emplace_back(0.0, 0.0);
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const Group& g : grouped_thresholds(scores)) {
        tp += g.ood_at;
        fp += g.in_at;
        points.emplace_back(static_cast<double>(fp) / n_in,
                            static_cast<double>(tp) / n_ood);
    }
    return points;
}

MetricsReport compute_metrics(const LabeledScores& scores, CriterionKind kind) {
    MetricsReport report;
    report.criterion = kind;
    report.auroc = auroc(scores);
    report.aupr_ood = aupr_ood(scores);
    const OperatingPoint op = fpr_at_tpr(scores);
    report.fpr95 = op.fpr;
    report.threshold_at_tpr95 = op.threshold;
    report.n_in = scores.in_scores.size();
    report.n_ood = scores.ood_scores.size();
    return report;
}

}  // namespace oodratio
