#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oodratio/scored.hpp"

namespace oodratio {

struct BackendConfig {
    std::string endpoint;    // absolute http:// URL of the serving endpoint
    std::string model_name;
    std::string api_key;     // empty -> fall back to $OODRATIO_API_KEY
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds retry_backoff{500};  // doubles per retry
    int max_concurrency = 4;
};

struct GenerationConfig {
    int max_new_tokens = 256;
    double temperature = 0.0;  // 0 = greedy
    std::vector<std::string> stop_sequences;
};

// One echoed-scoring response: per-token strings, logprobs (null allowed
// server-side for the first token) and character offsets into the prompt.
struct EchoedTokens {
    std::vector<std::string> tokens;
    std::vector<std::optional<double>> logprobs;
    std::vector<std::size_t> offsets;
};

// Speaks the OpenAI-compatible completions protocol: scoring goes through
// echo=true/max_tokens=0 requests with per-token logprobs, generation
// through plain completions. Produces the same ScoredSequence contract as
// the n-gram models, so everything downstream is backend-agnostic.
class RemoteScorer {
public:
    explicit RemoteScorer(BackendConfig config);

    RemoteScorer(const RemoteScorer&) = delete;
    RemoteScorer& operator=(const RemoteScorer&) = delete;

    ScoredSequence score(const std::string& text) const;

    // Logprobs of full_text restricted to tokens starting at or after
    // len(prefix). The server's offsets must land exactly on the split.
    ScoredSequence score_conditional(const std::string& prefix,
                                     const std::string& full_text) const;

    std::string generate(const GenerationConfig& gen, const std::string& question,
                         const std::string& prompt_template = "{question}") const;

    // Low-level single round trip (with retries), used by the pair-aligned
    // helpers below.
    EchoedTokens fetch_echo(const std::string& text) const;

    const BackendConfig& config() const noexcept { return config_; }
    long long retries_used() const noexcept { return retries_used_.load(); }
    long long dropped_positions() const noexcept { return dropped_positions_.load(); }

private:
    friend std::pair<ScoredSequence, ScoredSequence> score_pair(
        const RemoteScorer&, const RemoteScorer&, const std::string&);
    friend std::pair<ScoredSequence, ScoredSequence> score_conditional_pair(
        const RemoteScorer&, const RemoteScorer&, const std::string&,
        const std::string&);

    ScoredSequence finalize_from(const EchoedTokens& echoed,
                                 std::size_t begin_index, int dropped) const;

    BackendConfig config_;
    std::string host_base_;     // scheme://host:port
    std::string path_prefix_;   // optional path in front of /v1/...
    std::string resolved_key_;  // config key or environment fallback
    mutable std::atomic<long long> retries_used_{0};
    mutable std::atomic<long long> dropped_positions_{0};
};

// Scores the same text under two backends and drops the shared run of
// leading positions whose logprob either server withheld, so a likelihood
// ratio sums over identical positions.
std::pair<ScoredSequence, ScoredSequence> score_pair(const RemoteScorer& base,
                                                     const RemoteScorer& finetuned,
                                                     const std::string& text);

std::pair<ScoredSequence, ScoredSequence> score_conditional_pair(
    const RemoteScorer& base, const RemoteScorer& finetuned,
    const std::string& prefix, const std::string& full_text);

std::string apply_prompt_template(const std::string& prompt_template,
                                  const std::string& question);

}  // namespace oodratio
