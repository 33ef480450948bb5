#include "oodratio/synth.hpp"

#include <functional>
#include <random>
#include <vector>

#include "oodratio/error.hpp"

namespace oodratio::synth {

namespace {

// Bounded draw without std::uniform_int_distribution: the modulo bias is
// irrelevant for corpus generation and the result is reproducible across
// standard libraries.
std::uint64_t pick(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

const char* pick_word(std::mt19937_64& rng, const std::vector<const char*>& words) {
    return words[pick(rng, words.size())];
}

std::string record_id(const std::string& name, std::size_t index) {
    std::string suffix = std::to_string(index);
    while (suffix.size() < 4) suffix.insert(suffix.begin(), '0');
    return name + "-" + suffix;
}

Dataset assemble(std::size_t count, const std::string& name, Label label,
                 const std::function<TextRecord(std::size_t)>& make) {
    Dataset out;
    out.name = name;
    out.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        TextRecord r = make(i);
        r.id = record_id(name, i);
        r.label = label;
        out.records.push_back(std::move(r));
    }
    return out;
}

const std::vector<const char*> kOps = {"plus", "minus", "times"};
const std::vector<const char*> kColors = {"red",    "blue",   "green",  "yellow",
                                          "purple", "orange", "silver", "black"};
const std::vector<const char*> kColorNouns = {"river",   "house",  "sky",
                                              "meadow",  "lantern", "boat",
                                              "garden",  "cloud"};
const std::vector<const char*> kColorVerbs = {"drifts past", "rests beside",
                                              "glows over", "fades behind"};

std::string arithmetic_clause(std::mt19937_64& rng) {
    const char* op = pick_word(rng, kOps);
    int lhs, rhs, result;
    if (op == kOps[2]) {  // times: keep products under one hundred
        lhs = static_cast<int>(pick(rng, 8)) + 2;
        rhs = static_cast<int>(pick(rng, 8)) + 2;
        result = lhs * rhs;
    } else if (op == kOps[1]) {  // minus: keep results nonnegative
        lhs = static_cast<int>(pick(rng, 13));
        rhs = static_cast<int>(pick(rng, static_cast<std::uint64_t>(lhs) + 1));
        result = lhs - rhs;
    } else {
        lhs = static_cast<int>(pick(rng, 13));
        rhs = static_cast<int>(pick(rng, 13));
        result = lhs + rhs;
    }
    return number_words(lhs) + " " + op + " " + number_words(rhs) + " equals " +
           number_words(result);
}

std::string color_clause(std::mt19937_64& rng) {
    std::string out = "the ";
    out += pick_word(rng, kColors);
    out += ' ';
    out += pick_word(rng, kColorNouns);
    out += ' ';
    out += pick_word(rng, kColorVerbs);
    out += " the ";
    out += pick_word(rng, kColors);
    out += ' ';
    out += pick_word(rng, kColorNouns);
    return out;
}

std::string clause_chain(std::mt19937_64& rng, int min_clauses, int max_clauses,
                         const std::function<std::string(std::mt19937_64&)>& clause) {
    if (min_clauses < 1 || max_clauses < min_clauses) {
        raise(ErrorCode::ConfigError, "clause range must satisfy 1 <= min <= max");
    }
    const int n = min_clauses +
                  static_cast<int>(pick(
                      rng, static_cast<std::uint64_t>(max_clauses - min_clauses) + 1));
    std::string text = clause(rng);
    for (int i = 1; i < n; ++i) {
        text += ", and ";
        text += clause(rng);
    }
    text += '.';
    return text;
}

}  // namespace

std::string number_words(int n) {
    static const char* kUnits[] = {"zero",    "one",     "two",      "three",
                                   "four",    "five",    "six",      "seven",
                                   "eight",   "nine",    "ten",      "eleven",
                                   "twelve",  "thirteen", "fourteen", "fifteen",
                                   "sixteen", "seventeen", "eighteen", "nineteen"};
    static const char* kTens[] = {"twenty", "thirty", "forty",  "fifty",
                                  "sixty",  "seventy", "eighty", "ninety"};
    if (n < 0 || n > 99) {
        raise(ErrorCode::ConfigError,
              "number_words covers 0..99, got " + std::to_string(n));
    }
    if (n < 20) return kUnits[n];
    std::string out = kTens[n / 10 - 2];
    if (n % 10 != 0) {
        out += '-';
        out += kUnits[n % 10];
    }
    return out;
}

Dataset arithmetic_sentences(std::size_t count, int min_clauses, int max_clauses,
                             std::uint64_t seed, const std::string& name,
                             Label label) {
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        r.text = clause_chain(rng, min_clauses, max_clauses, arithmetic_clause);
        return r;
    });
}

Dataset color_sentences(std::size_t count, int min_clauses, int max_clauses,
                        std::uint64_t seed, const std::string& name, Label label) {
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        r.text = clause_chain(rng, min_clauses, max_clauses, color_clause);
        return r;
    });
}

Dataset ham_messages(std::size_t count, std::uint64_t seed,
                     const std::string& name, Label label) {
    static const std::vector<const char*> kDocs = {"agenda",  "minutes", "report",
                                                   "budget",  "draft",   "schedule",
                                                   "invoice", "summary"};
    static const std::vector<const char*> kVerbs = {"review", "update", "share",
                                                    "confirm", "circulate", "file"};
    static const std::vector<const char*> kDays = {"monday",   "tuesday", "wednesday",
                                                   "thursday", "friday"};
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        switch (pick(rng, 3)) {
            case 0:
                r.text = std::string("please ") + pick_word(rng, kVerbs) + " the " +
                         pick_word(rng, kDocs) + " before " + pick_word(rng, kDays) +
                         ".";
                break;
            case 1:
                r.text = std::string("the ") + pick_word(rng, kDocs) + " for " +
                         pick_word(rng, kDays) + " is attached.";
                break;
            default:
                r.text = std::string("can we ") + pick_word(rng, kVerbs) + " the " +
                         pick_word(rng, kDocs) + " after the " +
                         pick_word(rng, kDocs) + "?";
        }
        return r;
    });
}

Dataset spam_messages(std::size_t count, std::uint64_t seed,
                      const std::string& name, Label label) {
    static const std::vector<const char*> kPrizes = {"voucher", "jackpot", "bonus",
                                                     "gift card", "reward",
                                                     "lottery prize"};
    static const std::vector<const char*> kUrgency = {"now", "today", "instantly",
                                                      "immediately"};
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        switch (pick(rng, 3)) {
            case 0:
                r.text = std::string("claim your ") + pick_word(rng, kPrizes) + " " +
                         pick_word(rng, kUrgency) + "!";
                break;
            case 1:
                r.text = std::string("you have won a ") + pick_word(rng, kPrizes) +
                         "! act " + pick_word(rng, kUrgency) + "!";
                break;
            default:
                r.text = std::string("click here for a free ") +
                         pick_word(rng, kPrizes) + " offer!";
        }
        return r;
    });
}

Dataset gibberish_lines(std::size_t count, std::uint64_t seed,
                        const std::string& name, Label label) {
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        const std::size_t len = 40 + pick(rng, 41);
        r.text.reserve(len);
        for (std::size_t j = 0; j < len; ++j) {
            const auto roll = pick(rng, 27);
            r.text += roll == 26 ? ' ' : static_cast<char>('a' + roll);
        }
        return r;
    });
}

namespace {

// Shared question scaffold: both domains ask "what is case <n> by <kind>?"
// so only the final word (and the answer) reveals the domain. The kind
// word sits at the end on purpose: a byte n-gram generating an answer sees
// the immediately preceding bytes, which must carry the domain signal.
std::string case_question(std::mt19937_64& rng, const char* kind) {
    return "what is case " + number_words(static_cast<int>(pick(rng, 20))) +
           " by " + kind + "?";
}

}  // namespace

Dataset arithmetic_qa(std::size_t count, std::uint64_t seed,
                      const std::string& name, Label label) {
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        r.question = case_question(rng, "sum");
        r.answer = arithmetic_clause(rng) + ".";
        return r;
    });
}

Dataset color_qa(std::size_t count, std::uint64_t seed, const std::string& name,
                 Label label) {
    std::mt19937_64 rng(seed);
    return assemble(count, name, label, [&](std::size_t) {
        TextRecord r;
        r.question = case_question(rng, "shade");
        r.answer = color_clause(rng) + ".";
        return r;
    });
}

Dataset concat(const Dataset& a, const Dataset& b, const std::string& name) {
    Dataset out;
    out.name = name;
    out.records.reserve(a.records.size() + b.records.size());
    out.records.insert(out.records.end(), a.records.begin(), a.records.end());
    out.records.insert(out.records.end(), b.records.begin(), b.records.end());
    return out;
}

}  // namespace oodratio::synth
