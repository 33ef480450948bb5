#include "oodratio/criteria.hpp"

#include <cmath>
#include <cstdlib>

#include "oodratio/error.hpp"

namespace oodratio {

std::string to_string(CriterionTag tag) {
    switch (tag) {
        case CriterionTag::LH_Base: return "lh_base";
        case CriterionTag::LH_Finetuned: return "lh_finetuned";
        case CriterionTag::LR: return "lr";
        case CriterionTag::Sq: return "s_q";
        case CriterionTag::Sa: return "s_a";
        case CriterionTag::Sqa: return "s_qa";
        case CriterionTag::SaGivenQ: return "s_a_given_q";
    }
    std::abort();  // unreachable
}

std::string to_string(const CriterionKind& kind) {
    std::string name = to_string(kind.tag);
    if (kind.normalize_by_length) name += "_norm";
    return name;
}

CriterionKind parse_criterion(const std::string& name) {
    CriterionKind kind;
    std::string base = name;
    constexpr const char* kSuffix = "_norm";
    if (base.size() > 5 && base.ends_with(kSuffix)) {
        kind.normalize_by_length = true;
        base.resize(base.size() - 5);
    }
    for (const auto tag : {CriterionTag::LH_Base, CriterionTag::LH_Finetuned,
                           CriterionTag::LR, CriterionTag::Sq, CriterionTag::Sa,
                           CriterionTag::Sqa, CriterionTag::SaGivenQ}) {
        if (to_string(tag) == base) {
            kind.tag = tag;
            return kind;
        }
    }
    raise(ErrorCode::ConfigError, "unknown criterion name \"" + name + "\"");
}

bool is_qa_criterion(CriterionTag tag) {
    return tag == CriterionTag::Sq || tag == CriterionTag::Sa ||
           tag == CriterionTag::Sqa || tag == CriterionTag::SaGivenQ;
}

namespace {

void require_matched(const ScoredSequence& base, const ScoredSequence& ft,
                     const std::string& what) {
    if (base.token_count() != ft.token_count()) {
        raise(ErrorCode::TokenizationMismatch,
              "base and finetuned scores of " + what +
                  " cover different token counts (" +
                  std::to_string(base.token_count()) + " vs " +
                  std::to_string(ft.token_count()) + ")");
    }
}

}  // namespace

double log_ratio(const ScoredSequence& base_score, const ScoredSequence& ft_score,
                 bool normalize_by_length) {
    require_matched(base_score, ft_score, "the sequence");
    double value = base_score.total_logprob - ft_score.total_logprob;
    if (normalize_by_length) {
        value /= static_cast<double>(base_score.token_count());
    }
    return value;
}

double lh_score(const ScoredSequence& score, bool negate_for_ood) {
    return negate_for_ood ? -score.total_logprob : score.total_logprob;
}

std::map<CriterionKind, CriterionScore> qa_criteria(const std::string& record_id,
                                                    const QaSequences& seqs,
                                                    std::size_t answer_byte_len,
                                                    bool normalize_by_length) {
    if (answer_byte_len == 0) {
        raise(ErrorCode::MissingAnswer,
              "record \"" + record_id + "\" has an empty answer");
    }
    require_matched(seqs.base_q, seqs.ft_q, "the question");
    require_matched(seqs.base_a, seqs.ft_a, "the answer");
    require_matched(seqs.base_a_given_q, seqs.ft_a_given_q,
                    "the conditioned answer");

    const double bq = seqs.base_q.total_logprob;
    const double fq = seqs.ft_q.total_logprob;
    const double ba = seqs.base_a.total_logprob;
    const double fa = seqs.ft_a.total_logprob;
    const double baq = seqs.base_a_given_q.total_logprob;
    const double faq = seqs.ft_a_given_q.total_logprob;

    const double s_q = bq - fq;
    const double s_a = ba - fa;
    const double s_qa = (bq + baq) - (fq + faq);
    const double s_a_given_q = s_qa - s_q;

    // S_{a|q} = S_{q,a} / S_q holds by construction; re-derive it from the
    // raw terms as a guard against score bookkeeping bugs upstream.
    if (std::fabs(s_a_given_q - (baq - faq)) > 1e-9) {
        raise(ErrorCode::DataInvariant,
              "conditional-ratio identity violated for record \"" + record_id +
                  "\"");
    }

    const std::map<std::string, double> components = {
        {"logp_base_q", bq},           {"logp_ft_q", fq},
        {"logp_base_a", ba},           {"logp_ft_a", fa},
        {"logp_base_a_given_q", baq},  {"logp_ft_a_given_q", faq},
    };

    const auto make = [&](CriterionTag tag, double raw, int token_count) {
        CriterionScore score;
        score.record_id = record_id;
        score.kind = {tag, normalize_by_length};
        score.value =
            normalize_by_length ? raw / static_cast<double>(token_count) : raw;
        score.components = components;
        return score;
    };

    std::map<CriterionKind, CriterionScore> out;
    out.emplace(CriterionKind{CriterionTag::Sq, normalize_by_length},
                make(CriterionTag::Sq, s_q, seqs.base_q.token_count()));
    out.emplace(CriterionKind{CriterionTag::Sa, normalize_by_length},
                make(CriterionTag::Sa, s_a, seqs.base_a.token_count()));
    out.emplace(CriterionKind{CriterionTag::Sqa, normalize_by_length},
                make(CriterionTag::Sqa, s_qa,
                     seqs.base_q.token_count() + seqs.base_a_given_q.token_count()));
    out.emplace(
        CriterionKind{CriterionTag::SaGivenQ, normalize_by_length},
        make(CriterionTag::SaGivenQ, s_a_given_q,
             seqs.base_a_given_q.token_count()));
    return out;
}

}  // namespace oodratio
