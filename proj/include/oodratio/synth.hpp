#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "oodratio/records.hpp"

namespace oodratio::synth {

// Deterministic synthetic corpora: same arguments, same records, on every
// platform (bounded draws use modulo on mt19937_64 words, never
// distribution adapters, whose output is implementation-defined).

// "six plus three equals nine, and two times four equals eight."
Dataset arithmetic_sentences(std::size_t count, int min_clauses, int max_clauses,
                             std::uint64_t seed, const std::string& name,
                             Label label);

// "the red house glows over the blue river."
Dataset color_sentences(std::size_t count, int min_clauses, int max_clauses,
                        std::uint64_t seed, const std::string& name, Label label);

// Scheduling chatter: "please review the agenda before thursday."
Dataset ham_messages(std::size_t count, std::uint64_t seed,
                     const std::string& name, Label label);

// Prize bait: "claim your bonus today! you have won a voucher!"
Dataset spam_messages(std::size_t count, std::uint64_t seed,
                      const std::string& name, Label label);

// Uniform random lowercase noise; nothing trained on this looks likely.
Dataset gibberish_lines(std::size_t count, std::uint64_t seed,
                        const std::string& name, Label label);

// QA pairs whose questions share one scaffold ("what is case six by sum?" /
// "... by shade?") so the question barely reveals the domain, while the
// answers use fully disjoint vocabularies.
Dataset arithmetic_qa(std::size_t count, std::uint64_t seed,
                      const std::string& name, Label label);
Dataset color_qa(std::size_t count, std::uint64_t seed, const std::string& name,
                 Label label);

// English words for 0..99; shared by the generators and their tests.
std::string number_words(int n);

// Record-level concatenation for building mixed training corpora.
Dataset concat(const Dataset& a, const Dataset& b, const std::string& name);

}  // namespace oodratio::synth
