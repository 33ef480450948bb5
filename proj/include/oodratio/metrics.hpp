#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oodratio/criteria.hpp"

namespace oodratio {

// Scores of an evaluation run split by ground-truth class. Orientation is
// fixed project-wide: larger score = more OOD, and OOD is the positive
// class of every metric.
struct LabeledScores {
    std::vector<double> in_scores;
    std::vector<double> ood_scores;
};

struct MetricsReport {
    CriterionKind criterion;
    double auroc = 0.0;
    double aupr_ood = 0.0;
    double fpr95 = 0.0;
    double threshold_at_tpr95 = 0.0;
    std::size_t n_in = 0;
    std::size_t n_ood = 0;
};

// Mann-Whitney AUROC: (#(ood > in) pairs + 0.5 per tied pair) / (n_ood * n_in).
// Tie-aware and exact; equals the trapezoidal area under roc_points().
double auroc(const LabeledScores& scores);

// Average precision with OOD positive: thresholds sweep descending over
// unique score values (ties grouped), AP = sum (R_i - R_{i-1}) * P_i.
double aupr_ood(const LabeledScores& scores);

struct OperatingPoint {
    double fpr = 0.0;
    double threshold = 0.0;
};

// Largest grouped threshold t (predict OOD iff score >= t) with
// TPR >= target_tpr; returns the FPR there and t itself. No interpolation.
OperatingPoint fpr_at_tpr(const LabeledScores& scores, double target_tpr = 0.95);

// Tie-grouped ROC staircase from (0,0) to (1,1), one point per unique
// threshold.
std::vector<std::pair<double, double>> roc_points(const LabeledScores& scores);

MetricsReport compute_metrics(const LabeledScores& scores, CriterionKind kind);

}  // namespace oodratio
