#include "oodratio/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "oodratio/error.hpp"

namespace oodratio {

using nlohmann::json;

NGramModel::NGramModel(int order, double k) : order_(order), k_(k) {
    if (order < 1) {
        raise(ErrorCode::ConfigError, "n-gram order must be >= 1");
    }
    if (!(k > 0.0)) {
        raise(ErrorCode::ConfigError, "smoothing k must be positive");
    }
}

double NGramModel::count(const Context& context, Symbol symbol) const {
    const auto it = rows_.find(context);
    if (it == rows_.end()) return 0.0;
    const Row& row = it->second;
    const auto sit = row.sparse.find(symbol);
    return (sit == row.sparse.end() ? 0.0 : sit->second) + row.uniform;
}

double NGramModel::context_total(const Context& context) const {
    const auto it = rows_.find(context);
    if (it == rows_.end()) return 0.0;
    return it->second.sparse_total + kVocabSize * it->second.uniform;
}

double NGramModel::probability(const Context& context, Symbol symbol) const {
    const auto it = rows_.find(context);
    if (it == rows_.end()) return 1.0 / kVocabSize;
    const Row& row = it->second;
    const auto sit = row.sparse.find(symbol);
    const double c = (sit == row.sparse.end() ? 0.0 : sit->second) + row.uniform;
    const double total = row.sparse_total + kVocabSize * row.uniform;
    return (c + k_) / (total + k_ * kVocabSize);
}

double NGramModel::log_probability(const Context& context, Symbol symbol) const {
    return std::log(probability(context, symbol));
}

void NGramModel::add_observation(const Context& context, Symbol symbol, double weight) {
    Row& row = rows_[context];
    row.sparse[symbol] += weight;
    row.sparse_total += weight;
}

std::vector<NGramModel::Context> NGramModel::sorted_contexts() const {
    std::vector<Context> out;
    out.reserve(rows_.size());
    for (const auto& [ctx, row] : rows_) out.push_back(ctx);
    std::sort(out.begin(), out.end());
    return out;
}

NGramModel::Context NGramModel::context_at(const std::string& bytes,
                                           std::size_t pos) const {
    Context ctx;
    const int len = order_ - 1;
    ctx.reserve(static_cast<std::size_t>(len));
    for (int back = len; back >= 1; --back) {
        const long long i = static_cast<long long>(pos) - back;
        ctx.push_back(i < 0 ? kBos
                            : static_cast<Symbol>(static_cast<unsigned char>(
                                  bytes[static_cast<std::size_t>(i)])));
    }
    return ctx;
}

namespace {

void accumulate_counts(NGramModel& model, const Dataset& corpus) {
    for (const auto& record : corpus.records) {
        const std::string text = record.training_text();
        NGramModel::Context ctx = model.context_at(text, 0);
        for (const char ch : text) {
            const auto sym = static_cast<NGramModel::Symbol>(static_cast<unsigned char>(ch));
            model.add_observation(ctx, sym);
            if (model.order() > 1) {
                ctx.erase(ctx.begin());
                ctx.push_back(sym);
            }
        }
        model.add_observation(ctx, NGramModel::kEos);
    }
}

}  // namespace

NGramModel train(const Dataset& corpus, int order, double k) {
    if (corpus.empty()) {
        raise(ErrorCode::EmptyCorpus, "training corpus \"" + corpus.name + "\" is empty");
    }
    NGramModel model(order, k);
    accumulate_counts(model, corpus);
    return model;
}

NGramModel adapt(const NGramModel& base, const Dataset& in_d_corpus, double alpha) {
    if (!base.trained()) {
        raise(ErrorCode::ConfigError, "adapt requires a trained base model");
    }
    if (alpha < 0.0) {
        raise(ErrorCode::ConfigError, "prior weight alpha must be nonnegative");
    }
    if (alpha == 0.0 && in_d_corpus.empty()) {
        raise(ErrorCode::EmptyCorpus,
              "adapt with alpha = 0 needs a nonempty adaptation corpus");
    }

    NGramModel model(base.order(), base.smoothing_k());
    if (alpha > 0.0) {
        const double kv = NGramModel::kVocabSize;
        const double k = base.smoothing_k();
        for (const auto& [ctx, row] : base.rows_) {
            const double total = row.sparse_total + kv * row.uniform;
            const double denom = total + k * kv;
            NGramModel::Row seeded;
            seeded.uniform = alpha * (row.uniform + k) / denom;
            seeded.sparse.reserve(row.sparse.size());
            for (const auto& [sym, c] : row.sparse) {
                seeded.sparse.emplace(sym, alpha * c / denom);
            }
            seeded.sparse_total = alpha * row.sparse_total / denom;
            model.rows_.emplace(ctx, std::move(seeded));
        }
        // Contexts first seen in the adaptation corpus still owe the base
        // its alpha mass; for them P_base is the smoothed uniform 1/257.
        for (const auto& record : in_d_corpus.records) {
            const std::string text = record.training_text();
            for (std::size_t pos = 0; pos <= text.size(); ++pos) {
                const auto ctx = model.context_at(text, pos);
                auto [it, inserted] = model.rows_.try_emplace(ctx);
                if (inserted) it->second.uniform = alpha / kv;
            }
        }
    }
    accumulate_counts(model, in_d_corpus);
    return model;
}

ScoredSequence score(const NGramModel& model, const std::string& text) {
    if (!model.trained()) {
        raise(ErrorCode::ConfigError, "cannot score with an untrained model");
    }
    std::vector<double> logprobs;
    logprobs.reserve(text.size() + 1);
    NGramModel::Context ctx = model.context_at(text, 0);
    for (const char ch : text) {
        const auto sym = static_cast<NGramModel::Symbol>(static_cast<unsigned char>(ch));
        logprobs.push_back(model.log_probability(ctx, sym));
        if (model.order() > 1) {
            ctx.erase(ctx.begin());
            ctx.push_back(sym);
        }
    }
    logprobs.push_back(model.log_probability(ctx, NGramModel::kEos));
    return ScoredSequence::from_logprobs(std::move(logprobs));
}

ScoredSequence score_conditional(const NGramModel& model, const std::string& prefix,
                                 const std::string& continuation) {
    if (!model.trained()) {
        raise(ErrorCode::ConfigError, "cannot score with an untrained model");
    }
    std::vector<double> logprobs;
    logprobs.reserve(continuation.size() + 1);
    NGramModel::Context ctx = model.context_at(prefix, prefix.size());
    for (const char ch : continuation) {
        const auto sym = static_cast<NGramModel::Symbol>(static_cast<unsigned char>(ch));
        logprobs.push_back(model.log_probability(ctx, sym));
        if (model.order() > 1) {
            ctx.erase(ctx.begin());
            ctx.push_back(sym);
        }
    }
    logprobs.push_back(model.log_probability(ctx, NGramModel::kEos));
    return ScoredSequence::from_logprobs(std::move(logprobs));
}

std::string generate_greedy(const NGramModel& model, const std::string& prefix,
                            std::size_t max_new_bytes) {
    if (!model.trained()) {
        raise(ErrorCode::ConfigError, "cannot generate with an untrained model");
    }
    std::string out;
    NGramModel::Context ctx = model.context_at(prefix, prefix.size());
    while (out.size() < max_new_bytes) {
        const auto it = model.rows().find(ctx);
        if (it == model.rows().end() || it->second.sparse.empty()) break;
        // Argmax over observed symbols; unseen symbols can never beat an
        // observed one since counts are positive. Ties take the lowest id.
        NGramModel::Symbol best_sym = NGramModel::kEos;
        double best_count = -1.0;
        for (const auto& [sym, c] : it->second.sparse) {
            if (c > best_count || (c == best_count && sym < best_sym)) {
                best_count = c;
                best_sym = sym;
            }
        }
        if (best_sym == NGramModel::kEos) break;
        out.push_back(static_cast<char>(static_cast<unsigned char>(best_sym)));
        if (model.order() > 1) {
            ctx.erase(ctx.begin());
            ctx.push_back(best_sym);
        }
    }
    return out;
}

namespace {
constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "oodratio-ngram";
}  // namespace

void save_model(const NGramModel& model, const std::string& path) {
    json doc;
    doc["format"] = kFormatName;
    doc["format_version"] = kFormatVersion;
    doc["order"] = model.order();
    doc["k"] = model.smoothing_k();
    doc["vocab_size"] = NGramModel::kVocabSize;

    json contexts = json::array();
    for (const auto& ctx : model.sorted_contexts()) {
        const auto& row = model.rows().at(ctx);
        json entry;
        json ctx_syms = json::array();
        for (const char16_t sym : ctx) ctx_syms.push_back(static_cast<int>(sym));
        entry["ctx"] = std::move(ctx_syms);
        // sparse_total is persisted rather than recomputed: re-summing in a
        // different order could change low bits and break score identity.
        entry["total"] = row.sparse_total;
        if (row.uniform != 0.0) entry["uniform"] = row.uniform;
        json counts = json::array();
        std::vector<std::pair<NGramModel::Symbol, double>> sorted(row.sparse.begin(),
                                                                  row.sparse.end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [sym, c] : sorted) {
            counts.push_back(json::array({sym, c}));
        }
        entry["counts"] = std::move(counts);
        contexts.push_back(std::move(entry));
    }
    doc["contexts"] = std::move(contexts);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::Io, "cannot open " + path + " for writing");
    }
    out << doc.dump() << '\n';
}

NGramModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::Io, "cannot open " + path + " for reading");
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        raise(ErrorCode::Io, path + ": not a valid model file: " + e.what());
    }
    if (doc.value("format", "") != kFormatName) {
        raise(ErrorCode::Io, path + ": not an oodratio n-gram model file");
    }
    if (doc.value("format_version", -1) != kFormatVersion) {
        raise(ErrorCode::Io,
              path + ": unsupported model format_version " +
                  std::to_string(doc.value("format_version", -1)));
    }
    if (doc.value("vocab_size", -1) != NGramModel::kVocabSize) {
        raise(ErrorCode::OrderMismatch,
              path + ": vocab_size mismatch (expected 257)");
    }

    NGramModel model(doc.at("order").get<int>(), doc.at("k").get<double>());
    for (const auto& entry : doc.at("contexts")) {
        NGramModel::Context ctx;
        for (const auto& sym : entry.at("ctx")) {
            ctx.push_back(static_cast<char16_t>(sym.get<int>()));
        }
        NGramModel::Row row;
        row.sparse_total = entry.at("total").get<double>();
        row.uniform = entry.value("uniform", 0.0);
        for (const auto& pair : entry.at("counts")) {
            row.sparse.emplace(pair.at(0).get<NGramModel::Symbol>(),
                               pair.at(1).get<double>());
        }
        model.rows_[std::move(ctx)] = std::move(row);
    }
    return model;
}

}  // namespace oodratio
