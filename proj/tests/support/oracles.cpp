#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace testsupport {

namespace {

std::vector<double> unique_descending(const std::vector<double>& in_scores,
                                      const std::vector<double>& ood_scores) {
    std::vector<double> values = in_scores;
    values.insert(values.end(), ood_scores.begin(), ood_scores.end());
    std::sort(values.begin(), values.end(), std::greater<double>());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

std::size_t count_at_least(const std::vector<double>& scores, double threshold) {
    std::size_t n = 0;
    for (const double s : scores) {
        if (s >= threshold) ++n;
    }
    return n;
}

}  // namespace

double auroc_pairwise(const std::vector<double>& in_scores,
                      const std::vector<double>& ood_scores) {
    std::uint64_t credit2 = 0;  // 2 per win, 1 per tie
    for (const double o : ood_scores) {
        for (const double i : in_scores) {
            if (o > i) {
                credit2 += 2;
            } else if (o == i) {
                credit2 += 1;
            }
        }
    }
    return static_cast<double>(credit2) /
           (2.0 * static_cast<double>(in_scores.size()) *
            static_cast<double>(ood_scores.size()));
}

double aupr_exhaustive(const std::vector<double>& in_scores,
                       const std::vector<double>& ood_scores) {
    const double n_ood = static_cast<double>(ood_scores.size());
    double ap = 0.0;
    std::size_t tp_prev = 0;
    for (const double t : unique_descending(in_scores, ood_scores)) {
        const std::size_t tp = count_at_least(ood_scores, t);
        const std::size_t fp = count_at_least(in_scores, t);
        const double recall_step = static_cast<double>(tp - tp_prev) / n_ood;
        const double precision =
            static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += recall_step * precision;
        tp_prev = tp;
    }
    return ap;
}

std::pair<double, double> fpr_exhaustive(const std::vector<double>& in_scores,
                                         const std::vector<double>& ood_scores,
                                         double target_tpr) {
    const double n_in = static_cast<double>(in_scores.size());
    const double n_ood = static_cast<double>(ood_scores.size());
    for (const double t : unique_descending(in_scores, ood_scores)) {
        const std::size_t tp = count_at_least(ood_scores, t);
        if (static_cast<double>(tp) / n_ood >= target_tpr) {
            const std::size_t fp = count_at_least(in_scores, t);
            return {static_cast<double>(fp) / n_in, t};
        }
    }
    return {1.0, 0.0};  // unreachable: the smallest value reaches TPR = 1
}

double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double dx = points[i].first - points[i - 1].first;
        area += dx * 0.5 * (points[i].second + points[i - 1].second);
    }
    return area;
}

namespace {

// Average ranks (1-based), ties sharing the mean of their rank range.
std::vector<double> average_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b];
    });
    std::vector<double> ranks(values.size(), 0.0);
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j + 1);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean_rank;
        i = j;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const double da = ra[i] - mean_a;
        const double db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace testsupport
