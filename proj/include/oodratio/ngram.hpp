#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "oodratio/records.hpp"
#include "oodratio/scored.hpp"

namespace oodratio {

// Byte-level autoregressive n-gram model with additive smoothing. Plays the
// roles of both the broad base model and its in-distribution adaptation, so
// every likelihood in the pipeline is exactly computable.
//
// Symbols: the 256 byte values, EOS (predictable), and BOS (context padding
// only). Conditionals are
//     P(s|c) = (count(c,s) + k) / (context_total(c) + k * 257)
// which stays a proper distribution over the 257 predictable symbols for any
// context, seen or unseen.
class NGramModel {
public:
    using Symbol = std::uint16_t;
    static constexpr Symbol kEos = 256;
    static constexpr Symbol kBos = 257;
    static constexpr int kVocabSize = 257;  // predictable symbols: bytes + EOS

    using Context = std::u16string;  // order-1 symbols, BOS-padded on the left

    // Per-context counts. `uniform` is a pseudo-count shared by all 257
    // predictable symbols; adaptation uses it to carry the smoothed base
    // mass without materializing dense rows. Freshly trained rows have
    // uniform == 0 and integer-valued sparse counts.
    struct Row {
        std::unordered_map<Symbol, double> sparse;
        double sparse_total = 0.0;
        double uniform = 0.0;
    };

    NGramModel() = default;
    NGramModel(int order, double k);

    int order() const noexcept { return order_; }
    double smoothing_k() const noexcept { return k_; }
    std::size_t context_count() const noexcept { return rows_.size(); }
    bool trained() const noexcept { return order_ >= 1; }

    // Count of `symbol` after `context`, including any uniform mass.
    double count(const Context& context, Symbol symbol) const;
    // Total predictable mass after `context` (sums `count` over the vocab).
    double context_total(const Context& context) const;
    // Smoothed conditional probability.
    double probability(const Context& context, Symbol symbol) const;
    double log_probability(const Context& context, Symbol symbol) const;

    void add_observation(const Context& context, Symbol symbol, double weight = 1.0);

    const std::unordered_map<Context, Row>& rows() const noexcept { return rows_; }

    // Contexts in sorted order; the stable enumeration used by persistence
    // and by sampling-based checks.
    std::vector<Context> sorted_contexts() const;

    // BOS-padded context preceding position `pos` of `bytes`.
    Context context_at(const std::string& bytes, std::size_t pos) const;

private:
    friend NGramModel adapt(const NGramModel&, const Dataset&, double);
    friend NGramModel load_model(const std::string&);

    int order_ = 0;
    double k_ = 1.0;
    std::unordered_map<Context, Row> rows_;
};

// Counts every (context, next-byte) pair in the corpus, with BOS padding of
// length order-1 and one terminal EOS per record. Throws EmptyCorpus.
NGramModel train(const Dataset& corpus, int order, double k);

// MAP-style blend: the base model contributes alpha * P_base(s|c) pseudo-
// counts per context (so every context total from the base side equals
// alpha), and the adaptation corpus contributes raw counts on top.
// alpha == 0 degenerates to train(corpus, base.order, base.k) exactly.
NGramModel adapt(const NGramModel& base, const Dataset& in_d_corpus, double alpha);

// One logprob per byte of `text` plus one for EOS.
ScoredSequence score(const NGramModel& model, const std::string& text);

// Scores only the continuation bytes (plus EOS) with contexts that reach
// back into the prefix. score(p + c) == score(p) minus its EOS term plus
// score_conditional(p, c), term for term.
ScoredSequence score_conditional(const NGramModel& model, const std::string& prefix,
                                 const std::string& continuation);

// Greedy argmax continuation of `prefix`; stops at EOS, at max_new_bytes, or
// when the running context has no row at all (nothing informed to emit).
std::string generate_greedy(const NGramModel& model, const std::string& prefix,
                            std::size_t max_new_bytes);

// Versioned JSON count table; load(save(m)) reproduces scores bit-identically.
void save_model(const NGramModel& model, const std::string& path);
NGramModel load_model(const std::string& path);

}  // namespace oodratio
