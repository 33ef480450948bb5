#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "oodratio/data_io.hpp"
#include "oodratio/error.hpp"
#include "oodratio/ngram.hpp"
#include "support/oracles.hpp"
#include "support/scratch.hpp"

using namespace oodratio;
using testsupport::TempDir;

namespace {

Dataset corpus_of(const std::vector<std::string>& texts, const std::string& name = "corpus") {
    Dataset data;
    data.name = name;
    data.role = DatasetRole::OOD_Test;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        TextRecord rec;
        rec.id = name + "-" + std::to_string(i);
        rec.text = texts[i];
        data.records.push_back(std::move(rec));
    }
    return data;
}

NGramModel::Context ctx_of(std::initializer_list<int> syms) {
    NGramModel::Context ctx;
    for (const int s : syms) ctx.push_back(static_cast<char16_t>(s));
    return ctx;
}

constexpr int B = NGramModel::kBos;
constexpr int E = NGramModel::kEos;

}  // namespace

TEST_CASE("counts and conditionals of a one-record bigram model") {
    // "ab" yields exactly three observations: a after [BOS], b after [a],
    // EOS after [b]. Every row has total 1, so with k = 1 each observed
    // symbol gets (1+1)/(1+257) and each unobserved one (0+1)/(1+257).
    const NGramModel m = train(corpus_of({"ab"}), 2, 1.0);
    CHECK(m.order() == 2);
    CHECK(m.smoothing_k() == 1.0);
    CHECK(m.context_count() == 3);

    const auto bos = ctx_of({B});
    const auto after_a = ctx_of({'a'});
    const auto after_b = ctx_of({'b'});
    CHECK(m.count(bos, 'a') == 1.0);
    CHECK(m.count(bos, 'b') == 0.0);
    CHECK(m.context_total(bos) == 1.0);
    CHECK(m.count(after_a, 'b') == 1.0);
    CHECK(m.count(after_b, E) == 1.0);

    CHECK(m.probability(bos, 'a') == 2.0 / 258.0);
    CHECK(m.probability(bos, 'b') == 1.0 / 258.0);
    CHECK(m.probability(after_a, 'b') == 2.0 / 258.0);
    CHECK(m.probability(after_b, E) == 2.0 / 258.0);

    // A context that was never observed backs off to the uniform 1/257.
    CHECK(m.probability(ctx_of({'z'}), 'a') == 1.0 / 257.0);
    CHECK(m.count(ctx_of({'z'}), 'a') == 0.0);
    CHECK(m.context_total(ctx_of({'z'})) == 0.0);
}

TEST_CASE("row totals aggregate across records") {
    // Two records share the [BOS] context: P(a|BOS) = (1+1)/(2+257).
    const NGramModel m = train(corpus_of({"ab", "ba"}), 2, 1.0);
    CHECK(m.context_total(ctx_of({B})) == 2.0);
    CHECK(m.probability(ctx_of({B}), 'a') == 2.0 / 259.0);
    CHECK(m.probability(ctx_of({B}), 'b') == 2.0 / 259.0);
}

TEST_CASE("unigram model conditions on the empty context") {
    // Order 1 leaves a zero-length context, so "a" contributes a:1 and
    // EOS:1 to the single shared row (total 2).
    const NGramModel m = train(corpus_of({"a"}), 1, 1.0);
    CHECK(m.context_count() == 1);
    const NGramModel::Context empty;
    CHECK(m.probability(empty, 'a') == 2.0 / 259.0);
    CHECK(m.probability(empty, E) == 2.0 / 259.0);
    CHECK(m.probability(empty, 'b') == 1.0 / 259.0);
}

TEST_CASE("smoothing strength k enters both numerator and denominator") {
    const NGramModel m = train(corpus_of({"a"}), 1, 0.5);
    CHECK(m.probability(NGramModel::Context{}, 'a') == 1.5 / (2.0 + 0.5 * 257.0));
    CHECK(m.probability(NGramModel::Context{}, 'b') == 0.5 / (2.0 + 0.5 * 257.0));
}

TEST_CASE("score sums one logprob per byte plus EOS") {
    const NGramModel m = train(corpus_of({"ab"}), 2, 1.0);
    const ScoredSequence s = score(m, "ab");
    CHECK(s.token_count() == 3);
    const double l = std::log(2.0 / 258.0);
    CHECK(s.token_logprobs[0] == l);
    CHECK(s.token_logprobs[1] == l);
    CHECK(s.token_logprobs[2] == l);
    CHECK(s.total_logprob == l + l + l);
    CHECK(s.dropped_positions == 0);

    // The empty string still spends one EOS logprob; EOS was never seen
    // after [BOS], so it takes the unseen-symbol share 1/258.
    const ScoredSequence empty = score(m, "");
    CHECK(empty.token_count() == 1);
    CHECK(empty.total_logprob == std::log(1.0 / 258.0));
}

TEST_CASE("BOS padding fills short contexts") {
    const NGramModel m = train(corpus_of({"a"}), 3, 1.0);
    CHECK(m.context_count() == 2);
    CHECK(m.count(ctx_of({B, B}), 'a') == 1.0);
    CHECK(m.count(ctx_of({B, 'a'}), E) == 1.0);

    CHECK(m.context_at("xy", 0) == ctx_of({B, B}));
    CHECK(m.context_at("xy", 1) == ctx_of({B, 'x'}));
    CHECK(m.context_at("xy", 2) == ctx_of({'x', 'y'}));
}

TEST_CASE("conditionals stay a proper distribution") {
    // Sum over all 257 predictable symbols must be 1 for seen contexts,
    // unseen contexts, and contexts of adapted models alike.
    const NGramModel base = train(corpus_of({"the cat sat", "a dog ran far"}), 3, 0.7);
    const NGramModel tuned = adapt(base, corpus_of({"the cat sat still"}), 4.0);

    const auto check_rows = [](const NGramModel& m) {
        for (const auto& ctx : m.sorted_contexts()) {
            double sum = 0.0;
            for (int s = 0; s < NGramModel::kVocabSize; ++s) {
                sum += m.probability(ctx, static_cast<NGramModel::Symbol>(s));
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
        double unseen = 0.0;
        for (int s = 0; s < NGramModel::kVocabSize; ++s) {
            unseen += m.probability(ctx_of({'#', '#'}), static_cast<NGramModel::Symbol>(s));
        }
        CHECK(unseen == doctest::Approx(1.0).epsilon(1e-12));
    };
    check_rows(base);
    check_rows(tuned);
}

TEST_CASE("conditional scoring continues the prefix context") {
    const NGramModel m = train(corpus_of({"the cat sat", "the dog sat"}), 3, 1.0);

    SUBCASE("chain rule: joint = prefix without EOS + conditional") {
        const std::string p = "the ";
        const std::string c = "cat";
        const ScoredSequence joint = score(m, p + c);
        const ScoredSequence prefix = score(m, p);
        const ScoredSequence cond = score_conditional(m, p, c);
        CHECK(cond.token_count() == c.size() + 1);
        const double rebuilt =
            (prefix.total_logprob - prefix.token_logprobs.back()) + cond.total_logprob;
        CHECK(joint.total_logprob == doctest::Approx(rebuilt).epsilon(1e-9));
    }

    SUBCASE("empty prefix reproduces plain scoring term for term") {
        const ScoredSequence direct = score(m, "the dog");
        const ScoredSequence cond = score_conditional(m, "", "the dog");
        REQUIRE(cond.token_count() == direct.token_count());
        for (std::size_t i = 0; i < direct.token_logprobs.size(); ++i) {
            CHECK(cond.token_logprobs[i] == direct.token_logprobs[i]);
        }
        CHECK(cond.total_logprob == direct.total_logprob);
    }

    SUBCASE("empty continuation scores only the EOS step") {
        const ScoredSequence cond = score_conditional(m, "the cat sat", "");
        CHECK(cond.token_count() == 1);
    }
}

TEST_CASE("chain rule holds across random corpora and splits") {
    testsupport::TestRng rng(20240601);
    const auto random_text = [&rng](std::size_t max_len) {
        const std::string alphabet = "abcde ";
        std::string out;
        const std::size_t len = rng.below(max_len + 1);
        for (std::size_t i = 0; i < len; ++i) out += alphabet[rng.below(alphabet.size())];
        return out;
    };

    std::vector<std::string> texts;
    for (int i = 0; i < 30; ++i) texts.push_back(random_text(24));
    const NGramModel m = train(corpus_of(texts), 3, 1.0);

    for (int trial = 0; trial < 50; ++trial) {
        const std::string p = random_text(12);
        const std::string c = random_text(12);
        const ScoredSequence joint = score(m, p + c);
        const ScoredSequence prefix = score(m, p);
        const ScoredSequence cond = score_conditional(m, p, c);
        const double rebuilt =
            (prefix.total_logprob - prefix.token_logprobs.back()) + cond.total_logprob;
        CHECK(std::fabs(joint.total_logprob - rebuilt) < 1e-9);
    }
}

TEST_CASE("adaptation blends prior mass with fresh counts") {
    // Base: "ab" at order 1 gives the single row {a:1, b:1, EOS:1}, total 3,
    // so the per-observation prior scale is 1/(3 + 257) = 1/260.
    const NGramModel base = train(corpus_of({"ab"}), 1, 1.0);
    const NGramModel::Context empty;

    SUBCASE("existing context keeps alpha of prior plus raw counts") {
        const NGramModel m = adapt(base, corpus_of({"aa"}), 1.0);
        // a: seeded 1/260 sparse + 1/260 uniform + two raw observations.
        CHECK(m.count(empty, 'a') == doctest::Approx(2.0 + 2.0 / 260.0).epsilon(1e-12));
        CHECK(m.count(empty, 'b') == doctest::Approx(2.0 / 260.0).epsilon(1e-12));
        CHECK(m.count(empty, E) == doctest::Approx(1.0 + 2.0 / 260.0).epsilon(1e-12));
        // A symbol the base never saw holds exactly the uniform share.
        CHECK(m.count(empty, 'z') == doctest::Approx(1.0 / 260.0).epsilon(1e-12));
        // Prior contributes alpha = 1 in total; raw corpus contributes 3.
        CHECK(m.context_total(empty) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(m.probability(empty, 'a') ==
              doctest::Approx((3.0 + 2.0 / 260.0) / 261.0).epsilon(1e-12));
    }

    SUBCASE("contexts new to the base owe it a uniform prior") {
        const NGramModel wide = train(corpus_of({"ab"}), 2, 1.0);
        const NGramModel m = adapt(wide, corpus_of({"cd"}), 2.0);
        // [c] never occurred in the base, so its seeded row is uniform
        // alpha/257 plus the raw observation d:1.
        CHECK(m.count(ctx_of({'c'}), 'd') ==
              doctest::Approx(1.0 + 2.0 / 257.0).epsilon(1e-12));
        CHECK(m.context_total(ctx_of({'c'})) == doctest::Approx(3.0).epsilon(1e-12));
        // [BOS] did occur: seeded from the base row {a:1}, total 1, denom 258.
        CHECK(m.count(ctx_of({B}), 'a') ==
              doctest::Approx(2.0 / 258.0 + 2.0 / 258.0).epsilon(1e-12));
        CHECK(m.count(ctx_of({B}), 'c') ==
              doctest::Approx(1.0 + 2.0 / 258.0).epsilon(1e-12));
        CHECK(m.context_total(ctx_of({B})) == doctest::Approx(3.0).epsilon(1e-12));
    }

    SUBCASE("alpha 0 reproduces train count for count") {
        const Dataset fresh = corpus_of({"cat", "dog", "cats"});
        const NGramModel via_adapt = adapt(base, fresh, 0.0);
        const NGramModel via_train = train(fresh, base.order(), base.smoothing_k());
        REQUIRE(via_adapt.context_count() == via_train.context_count());
        for (const auto& [ctx, row] : via_train.rows()) {
            const auto it = via_adapt.rows().find(ctx);
            REQUIRE(it != via_adapt.rows().end());
            CHECK(it->second.sparse_total == row.sparse_total);
            CHECK(it->second.uniform == 0.0);
            REQUIRE(it->second.sparse.size() == row.sparse.size());
            for (const auto& [sym, c] : row.sparse) {
                CHECK(it->second.sparse.at(sym) == c);
            }
        }
    }

    SUBCASE("alpha > 0 tolerates an empty adaptation corpus") {
        const NGramModel m = adapt(base, Dataset{}, 1.0);
        CHECK(m.context_count() == 1);
        // Pure prior: P(a) = (2/260 + 1) / (1 + 257).
        CHECK(m.probability(empty, 'a') ==
              doctest::Approx((1.0 + 2.0 / 260.0) / 258.0).epsilon(1e-12));
    }
}

TEST_CASE("greedy generation follows argmax counts") {
    const NGramModel m = train(corpus_of({"abc"}), 2, 1.0);
    CHECK(generate_greedy(m, "a", 10) == "bc");
    CHECK(generate_greedy(m, "", 10) == "abc");
    CHECK(generate_greedy(m, "a", 1) == "b");

    // Count ties resolve to the smallest byte value.
    const NGramModel tied = train(corpus_of({"ab", "ac"}), 2, 1.0);
    CHECK(generate_greedy(tied, "a", 5) == "b");

    // An unknown running context stops generation immediately.
    CHECK(generate_greedy(m, "zz", 5).empty());

    // A cyclic model runs until the byte budget is exhausted.
    const NGramModel cyclic = train(corpus_of({"ababab"}), 2, 1.0);
    CHECK(generate_greedy(cyclic, "a", 7) == "bababab");
}

TEST_CASE("model persistence round-trips scores bit for bit") {
    TempDir tmp;
    const NGramModel base = train(corpus_of({"the cat sat", "a dog ran"}), 3, 0.5);
    // Adapted models carry non-integer counts, the hard case for ASCII
    // serialization.
    const NGramModel m = adapt(base, corpus_of({"the cat sat still"}), 3.0);
    const std::string path = tmp.file("model.json");
    save_model(m, path);
    const NGramModel back = load_model(path);

    CHECK(back.order() == m.order());
    CHECK(back.smoothing_k() == m.smoothing_k());
    CHECK(back.context_count() == m.context_count());
    for (const std::string text : {"the cat sat", "unrelated bytes", ""}) {
        const ScoredSequence a = score(m, text);
        const ScoredSequence b = score(back, text);
        REQUIRE(a.token_count() == b.token_count());
        CHECK(a.total_logprob == b.total_logprob);
        for (std::size_t i = 0; i < a.token_logprobs.size(); ++i) {
            CHECK(a.token_logprobs[i] == b.token_logprobs[i]);
        }
    }
}

TEST_CASE("model loading rejects unusable files") {
    TempDir tmp;

    const auto code_of = [](const std::string& path) {
        try {
            load_model(path);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::ConfigError;  // sentinel: should have thrown
    };

    CHECK(code_of(tmp.file("absent.json")) == ErrorCode::Io);

    {
        std::ofstream out(tmp.file("garbage.json"));
        out << "not json at all\n";
    }
    CHECK(code_of(tmp.file("garbage.json")) == ErrorCode::Io);

    const NGramModel m = train(corpus_of({"ab"}), 2, 1.0);
    save_model(m, tmp.file("good.json"));

    // Patch individual header fields and confirm the specific rejections.
    const auto patched = [&tmp](const std::string& name, const std::string& from,
                                const std::string& to) {
        std::ifstream in(tmp.file("good.json"));
        std::string body((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        const std::size_t at = body.find(from);
        REQUIRE(at != std::string::npos);
        body.replace(at, from.size(), to);
        const std::string path = tmp.file(name);
        std::ofstream out(path);
        out << body;
        return path;
    };

    CHECK(code_of(patched("badfmt.json", "\"oodratio-ngram\"", "\"other-format\"")) ==
          ErrorCode::Io);
    CHECK(code_of(patched("badver.json", "\"format_version\":1", "\"format_version\":9")) ==
          ErrorCode::Io);
    CHECK(code_of(patched("badvocab.json", "\"vocab_size\":257", "\"vocab_size\":300")) ==
          ErrorCode::OrderMismatch);
}

TEST_CASE("construction and scoring reject invalid setups") {
    CHECK_THROWS_AS(NGramModel(0, 1.0), Error);
    CHECK_THROWS_AS(NGramModel(1, 0.0), Error);
    CHECK_THROWS_AS(NGramModel(1, -2.0), Error);
    CHECK_THROWS_AS(train(Dataset{}, 2, 1.0), Error);

    const NGramModel untrained;
    CHECK_THROWS_AS(score(untrained, "abc"), Error);
    CHECK_THROWS_AS(score_conditional(untrained, "a", "bc"), Error);
    CHECK_THROWS_AS(generate_greedy(untrained, "a", 4), Error);

    const NGramModel base = train(corpus_of({"ab"}), 1, 1.0);
    CHECK_THROWS_AS(adapt(untrained, corpus_of({"x"}), 1.0), Error);
    CHECK_THROWS_AS(adapt(base, corpus_of({"x"}), -0.5), Error);
    CHECK_THROWS_AS(adapt(base, Dataset{}, 0.0), Error);

    try {
        train(Dataset{}, 2, 1.0);
        FAIL("train on an empty corpus must throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyCorpus);
        CHECK(e.exit_class() == 3);
    }
}
