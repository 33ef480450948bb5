#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace oodratio {

// Per-token natural-log probabilities for one text under one model, plus
// their sum. Backends agree on this contract: the n-gram scorer emits one
// entry per byte plus EOS; remote scorers emit one entry per server token.
struct ScoredSequence {
    std::vector<double> token_logprobs;
    double total_logprob = 0.0;
    // Leading positions the server omitted logprobs for (first-token echo
    // behavior). Zero for local models.
    int dropped_positions = 0;

    std::size_t token_count() const noexcept { return token_logprobs.size(); }

    static ScoredSequence from_logprobs(std::vector<double> logprobs,
                                        int dropped = 0) {
        ScoredSequence s;
        s.total_logprob =
            std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
        s.token_logprobs = std::move(logprobs);
        s.dropped_positions = dropped;
        return s;
    }
};

}  // namespace oodratio
