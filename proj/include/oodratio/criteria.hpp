#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "oodratio/scored.hpp"

namespace oodratio {

// Detection criteria. All values live in log space and share one
// orientation: larger means more out-of-distribution.
enum class CriterionTag {
    LH_Base,      // negated log-likelihood under the base model
    LH_Finetuned, // negated log-likelihood under the finetuned model
    LR,           // log p_base(x) - log p_finetuned(x)
    Sq,           // question-only ratio
    Sa,           // standalone-answer ratio
    Sqa,          // joint question+answer ratio
    SaGivenQ,     // conditional-answer ratio, Sqa - Sq
};

struct CriterionKind {
    CriterionTag tag = CriterionTag::LR;
    bool normalize_by_length = false;

    friend bool operator==(const CriterionKind&, const CriterionKind&) = default;
    friend auto operator<=>(const CriterionKind&, const CriterionKind&) = default;
};

// Short stable names used in score files and report tables, e.g. "lr",
// "s_a_given_q", "lh_base_norm".
std::string to_string(CriterionTag tag);
std::string to_string(const CriterionKind& kind);
CriterionKind parse_criterion(const std::string& name);

bool is_qa_criterion(CriterionTag tag);

struct CriterionScore {
    std::string record_id;
    CriterionKind kind;
    double value = 0.0;
    // Named log-likelihood terms the value was assembled from, enough to
    // recompute it exactly (e.g. "logp_base_q", "logp_ft_a_given_q").
    std::map<std::string, double> components;
};

// log S(x) = log p_base(x) - log p_finetuned(x). Both sequences must
// describe the same tokenization of the same text.
double log_ratio(const ScoredSequence& base_score, const ScoredSequence& ft_score,
                 bool normalize_by_length = false);

// Likelihood-only baseline. Negated by default so that low likelihood
// maps to a high OOD score, matching the shared orientation.
double lh_score(const ScoredSequence& score, bool negate_for_ood = true);

// The six sequences behind the QA criteria: question and answer scored
// standalone, plus the answer scored as a continuation of the question,
// each under both models.
struct QaSequences {
    ScoredSequence base_q, ft_q;
    ScoredSequence base_a, ft_a;
    ScoredSequence base_a_given_q, ft_a_given_q;
};

// Emits Sq, Sa, Sqa and SaGivenQ for one (question, answer) pair.
// answer_byte_len is the answer's length in bytes; an empty answer cannot
// be scored meaningfully and raises MissingAnswer.
std::map<CriterionKind, CriterionScore> qa_criteria(const std::string& record_id,
                                                    const QaSequences& seqs,
                                                    std::size_t answer_byte_len,
                                                    bool normalize_by_length = false);

}  // namespace oodratio
