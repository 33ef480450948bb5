#include "oodratio/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include "oodratio/error.hpp"
#include "oodratio/ngram.hpp"
#include "oodratio/synth.hpp"

namespace oodratio {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ExperimentMode mode) noexcept {
    switch (mode) {
        case ExperimentMode::FarOrNearOOD: return "ood";
        case ExperimentMode::Spam: return "spam";
        case ExperimentMode::SpamDualProxy: return "spam_dual_proxy";
        case ExperimentMode::QA: return "qa";
    }
    return "ood";
}

ExperimentMode parse_mode(const std::string& name) {
    for (const auto mode : {ExperimentMode::FarOrNearOOD, ExperimentMode::Spam,
                            ExperimentMode::SpamDualProxy, ExperimentMode::QA}) {
        if (name == to_string(mode)) return mode;
    }
    raise(ErrorCode::ConfigError,
          "unknown mode \"" + name + "\" (expected ood|spam|spam_dual_proxy|qa)");
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known) {
            raise(ErrorCode::ConfigError,
                  "unrecognized key \"" + it.key() + "\" in " + where);
        }
    }
}

[[noreturn]] void bad_type(const std::string& where, const char* expected) {
    raise(ErrorCode::ConfigError, where + " must be " + expected);
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) bad_type(where, "a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) bad_type(where, "an integer");
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) bad_type(where, "a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) bad_type(where, "a boolean");
    return v.get<bool>();
}

DatasetSpec parse_dataset_spec(const json& v, const std::string& where) {
    DatasetSpec spec;
    if (v.is_string()) {
        spec.path = v.get<std::string>();
        return spec;
    }
    if (!v.is_object()) bad_type(where, "a path string or {path, format} object");
    check_keys(v, where, {"path", "format"});
    spec.path = as_string(v.at("path"), where + ".path");
    if (v.contains("format")) {
        spec.format = as_string(v.at("format"), where + ".format");
        if (spec.format != "jsonl" && spec.format != "csv" &&
            spec.format != "lines") {
            raise(ErrorCode::ConfigError,
                  where + ".format must be jsonl|csv|lines, got \"" + spec.format +
                      "\"");
        }
    }
    return spec;
}

BackendConfig parse_backend(const json& v, const std::string& where) {
    if (!v.is_object()) bad_type(where, "an object");
    check_keys(v, where,
               {"endpoint", "model_name", "api_key", "timeout_ms", "max_retries",
                "retry_backoff_ms", "max_concurrency"});
    BackendConfig b;
    if (!v.contains("endpoint") || !v.contains("model_name")) {
        raise(ErrorCode::ConfigError, where + " needs endpoint and model_name");
    }
    b.endpoint = as_string(v.at("endpoint"), where + ".endpoint");
    b.model_name = as_string(v.at("model_name"), where + ".model_name");
    if (v.contains("api_key")) b.api_key = as_string(v.at("api_key"), where + ".api_key");
    if (v.contains("timeout_ms")) {
        b.timeout = std::chrono::milliseconds(
            as_int(v.at("timeout_ms"), where + ".timeout_ms"));
    }
    if (v.contains("max_retries")) {
        b.max_retries = as_int(v.at("max_retries"), where + ".max_retries");
    }
    if (v.contains("retry_backoff_ms")) {
        b.retry_backoff = std::chrono::milliseconds(
            as_int(v.at("retry_backoff_ms"), where + ".retry_backoff_ms"));
    }
    if (v.contains("max_concurrency")) {
        b.max_concurrency = as_int(v.at("max_concurrency"), where + ".max_concurrency");
    }
    return b;
}

GenerationConfig parse_generation(const json& v, const std::string& where) {
    if (!v.is_object()) bad_type(where, "an object");
    check_keys(v, where, {"max_new_tokens", "temperature", "stop_sequences"});
    GenerationConfig g;
    if (v.contains("max_new_tokens")) {
        g.max_new_tokens = as_int(v.at("max_new_tokens"), where + ".max_new_tokens");
        if (g.max_new_tokens < 1) {
            raise(ErrorCode::ConfigError, where + ".max_new_tokens must be >= 1");
        }
    }
    if (v.contains("temperature")) {
        g.temperature = as_number(v.at("temperature"), where + ".temperature");
        if (g.temperature < 0.0) {
            raise(ErrorCode::ConfigError, where + ".temperature must be >= 0");
        }
    }
    if (v.contains("stop_sequences")) {
        const json& stops = v.at("stop_sequences");
        if (!stops.is_array()) bad_type(where + ".stop_sequences", "an array");
        for (const auto& s : stops) {
            g.stop_sequences.push_back(as_string(s, where + ".stop_sequences[]"));
        }
    }
    return g;
}

NgramPairSpec parse_ngram_spec(const json& v, const std::string& where) {
    if (!v.is_object()) bad_type(where, "an object");
    check_keys(v, where,
               {"order", "k", "alpha", "base_corpus", "in_d_corpus", "base_model",
                "finetuned_model"});
    NgramPairSpec spec;
    if (v.contains("order")) spec.order = as_int(v.at("order"), where + ".order");
    if (v.contains("k")) spec.k = as_number(v.at("k"), where + ".k");
    if (v.contains("alpha")) spec.alpha = as_number(v.at("alpha"), where + ".alpha");
    if (v.contains("base_corpus")) {
        spec.base_corpus = as_string(v.at("base_corpus"), where + ".base_corpus");
    }
    if (v.contains("in_d_corpus")) {
        spec.in_d_corpus = as_string(v.at("in_d_corpus"), where + ".in_d_corpus");
    }
    if (v.contains("base_model")) {
        spec.base_model = as_string(v.at("base_model"), where + ".base_model");
    }
    if (v.contains("finetuned_model")) {
        spec.finetuned_model =
            as_string(v.at("finetuned_model"), where + ".finetuned_model");
    }
    if (spec.base_corpus.empty() == spec.base_model.empty()) {
        raise(ErrorCode::ConfigError,
              where + " needs exactly one of base_corpus or base_model");
    }
    return spec;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc,
                                         const std::string& origin) {
    if (!doc.is_object()) {
        raise(ErrorCode::ConfigError, origin + ": config must be a JSON object");
    }
    check_keys(doc, origin,
               {"mode", "seed", "eval_fraction", "max_bytes", "output_dir",
                "include_timing", "max_concurrency", "report_formats", "criteria",
                "prompt_template", "generation", "datasets", "model_pair"});

    ExperimentConfig c;
    if (!doc.contains("mode")) {
        raise(ErrorCode::ConfigError, origin + ": missing required key \"mode\"");
    }
    c.mode = parse_mode(as_string(doc.at("mode"), origin + ".mode"));

    if (doc.contains("seed")) {
        const json& s = doc.at("seed");
        if (!s.is_number_integer()) bad_type(origin + ".seed", "an integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("eval_fraction")) {
        c.eval_fraction = as_number(doc.at("eval_fraction"), origin + ".eval_fraction");
        if (!(c.eval_fraction > 0.0) || !(c.eval_fraction < 1.0)) {
            raise(ErrorCode::InvalidFraction,
                  origin + ".eval_fraction must lie strictly between 0 and 1");
        }
    }
    if (doc.contains("max_bytes")) {
        const int mb = as_int(doc.at("max_bytes"), origin + ".max_bytes");
        if (mb < 1) raise(ErrorCode::ConfigError, origin + ".max_bytes must be >= 1");
        c.max_bytes = static_cast<std::size_t>(mb);
    }
    if (doc.contains("output_dir")) {
        c.output_dir = as_string(doc.at("output_dir"), origin + ".output_dir");
    }
    if (doc.contains("include_timing")) {
        c.include_timing = as_bool(doc.at("include_timing"), origin + ".include_timing");
    }
    if (doc.contains("max_concurrency")) {
        c.max_concurrency = as_int(doc.at("max_concurrency"), origin + ".max_concurrency");
        if (c.max_concurrency < 1) {
            raise(ErrorCode::ConfigError, origin + ".max_concurrency must be >= 1");
        }
    }
    if (doc.contains("report_formats")) {
        const json& formats = doc.at("report_formats");
        if (!formats.is_array()) bad_type(origin + ".report_formats", "an array");
        c.report_formats.clear();
        for (const auto& f : formats) {
            const std::string name = as_string(f, origin + ".report_formats[]");
            parse_report_format(name);  // validates
            c.report_formats.push_back(name);
        }
    }
    if (doc.contains("criteria")) {
        const json& crits = doc.at("criteria");
        if (!crits.is_array()) bad_type(origin + ".criteria", "an array");
        for (const auto& name : crits) {
            const CriterionKind kind =
                parse_criterion(as_string(name, origin + ".criteria[]"));
            if (std::find(c.criteria.begin(), c.criteria.end(), kind) !=
                c.criteria.end()) {
                raise(ErrorCode::ConfigError,
                      origin + ".criteria lists \"" + to_string(kind) + "\" twice");
            }
            c.criteria.push_back(kind);
        }
    }
    if (doc.contains("prompt_template")) {
        c.prompt_template = as_string(doc.at("prompt_template"), origin + ".prompt_template");
    }
    if (doc.contains("generation")) {
        c.generation = parse_generation(doc.at("generation"), origin + ".generation");
    }

    if (doc.contains("datasets")) {
        const json& ds = doc.at("datasets");
        if (!ds.is_object()) bad_type(origin + ".datasets", "an object");
        check_keys(ds, origin + ".datasets", {"in_d", "in_d_test", "ood", "spam_train"});
        if (ds.contains("in_d")) {
            c.in_d = parse_dataset_spec(ds.at("in_d"), origin + ".datasets.in_d");
        }
        if (ds.contains("in_d_test")) {
            c.in_d_test = parse_dataset_spec(ds.at("in_d_test"), origin + ".datasets.in_d_test");
        }
        if (ds.contains("ood")) {
            c.ood = parse_dataset_spec(ds.at("ood"), origin + ".datasets.ood");
        }
        if (ds.contains("spam_train")) {
            c.spam_train = parse_dataset_spec(ds.at("spam_train"), origin + ".datasets.spam_train");
        }
    }

    if (!doc.contains("model_pair")) {
        raise(ErrorCode::ConfigError, origin + ": missing required key \"model_pair\"");
    }
    const json& pair = doc.at("model_pair");
    if (!pair.is_object()) bad_type(origin + ".model_pair", "an object");
    check_keys(pair, origin + ".model_pair", {"ngram", "remote"});
    if (pair.contains("ngram") == pair.contains("remote")) {
        raise(ErrorCode::ConfigError,
              origin + ".model_pair needs exactly one of ngram or remote");
    }
    if (pair.contains("ngram")) {
        c.ngram = parse_ngram_spec(pair.at("ngram"), origin + ".model_pair.ngram");
    } else {
        const json& remote = pair.at("remote");
        if (!remote.is_object()) bad_type(origin + ".model_pair.remote", "an object");
        check_keys(remote, origin + ".model_pair.remote", {"base", "finetuned"});
        if (!remote.contains("base") || !remote.contains("finetuned")) {
            raise(ErrorCode::ConfigError,
                  origin + ".model_pair.remote needs base and finetuned");
        }
        RemotePairSpec spec;
        spec.base = parse_backend(remote.at("base"), origin + ".model_pair.remote.base");
        spec.finetuned =
            parse_backend(remote.at("finetuned"), origin + ".model_pair.remote.finetuned");
        c.remote = spec;
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::ConfigError, "cannot open config file " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        raise(ErrorCode::ConfigError,
              path + ": config is not valid JSON: " + e.what());
    }
    return parse_experiment_config(doc, path);
}

namespace {

json dataset_spec_to_json(const DatasetSpec& spec) {
    json j;
    j["path"] = spec.path;
    if (!spec.format.empty()) j["format"] = spec.format;
    return j;
}

json backend_to_json(const BackendConfig& b) {
    json j;
    j["endpoint"] = b.endpoint;
    j["model_name"] = b.model_name;
    if (!b.api_key.empty()) j["api_key"] = "<redacted>";
    j["timeout_ms"] = static_cast<long long>(b.timeout.count());
    j["max_retries"] = b.max_retries;
    j["retry_backoff_ms"] = static_cast<long long>(b.retry_backoff.count());
    j["max_concurrency"] = b.max_concurrency;
    return j;
}

json generation_to_json(const GenerationConfig& g) {
    json j;
    j["max_new_tokens"] = g.max_new_tokens;
    j["temperature"] = g.temperature;
    j["stop_sequences"] = g.stop_sequences;
    return j;
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    j["eval_fraction"] = c.eval_fraction;
    if (c.max_bytes) j["max_bytes"] = *c.max_bytes;
    j["output_dir"] = c.output_dir;
    j["include_timing"] = c.include_timing;
    j["max_concurrency"] = c.max_concurrency;
    j["report_formats"] = c.report_formats;
    json crits = json::array();
    for (const auto& kind : c.criteria) crits.push_back(to_string(kind));
    j["criteria"] = std::move(crits);
    j["prompt_template"] = c.prompt_template;
    j["generation"] = generation_to_json(c.generation);

    json ds;
    if (!c.in_d.empty()) ds["in_d"] = dataset_spec_to_json(c.in_d);
    if (!c.in_d_test.empty()) ds["in_d_test"] = dataset_spec_to_json(c.in_d_test);
    if (!c.ood.empty()) ds["ood"] = dataset_spec_to_json(c.ood);
    if (!c.spam_train.empty()) ds["spam_train"] = dataset_spec_to_json(c.spam_train);
    j["datasets"] = std::move(ds);

    json pair;
    if (c.ngram) {
        json n;
        n["order"] = c.ngram->order;
        n["k"] = c.ngram->k;
        n["alpha"] = c.ngram->alpha;
        if (!c.ngram->base_corpus.empty()) n["base_corpus"] = c.ngram->base_corpus;
        if (!c.ngram->in_d_corpus.empty()) n["in_d_corpus"] = c.ngram->in_d_corpus;
        if (!c.ngram->base_model.empty()) n["base_model"] = c.ngram->base_model;
        if (!c.ngram->finetuned_model.empty()) {
            n["finetuned_model"] = c.ngram->finetuned_model;
        }
        pair["ngram"] = std::move(n);
    }
    if (c.remote) {
        pair["remote"] = {{"base", backend_to_json(c.remote->base)},
                          {"finetuned", backend_to_json(c.remote->finetuned)}};
    }
    j["model_pair"] = std::move(pair);
    return j;
}

// ---------------------------------------------------------------------------
// Dataset loading and backend construction
// ---------------------------------------------------------------------------

namespace {

std::string infer_format(const std::string& path) {
    const auto ends_with = [&](const char* suffix) {
        const std::size_t n = std::char_traits<char>::length(suffix);
        return path.size() >= n && path.compare(path.size() - n, n, suffix) == 0;
    };
    if (ends_with(".jsonl") || ends_with(".ndjson") || ends_with(".json")) {
        return "jsonl";
    }
    if (ends_with(".csv")) return "csv";
    return "lines";
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec, DatasetRole role,
                     const std::string& what) {
    if (spec.empty()) {
        raise(ErrorCode::ConfigError, "missing dataset path for " + what);
    }
    const std::string format =
        spec.format.empty() ? infer_format(spec.path) : spec.format;
    if (format == "jsonl") return load_jsonl(spec.path, role);
    if (format == "csv") return load_csv(spec.path, role);
    return load_lines(spec.path, role);
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string truncate_at_stops(std::string text,
                              const std::vector<std::string>& stops) {
    std::size_t cut = std::string::npos;
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        const std::size_t at = text.find(stop);
        if (at < cut) cut = at;
    }
    if (cut != std::string::npos) text.resize(cut);
    return text;
}

// Uniform scoring/generation surface over the n-gram pair and a remote
// pair, so the experiment shapes are written once.
class ScoringBackend {
public:
    virtual ~ScoringBackend() = default;
    // (base, finetuned) scores of the same text.
    virtual std::pair<ScoredSequence, ScoredSequence> score_text(
        const std::string& text) const = 0;
    virtual std::pair<ScoredSequence, ScoredSequence> score_continuation(
        const std::string& prefix, const std::string& continuation) const = 0;
    // prompt is the final string sent to the model (template already applied).
    virtual std::string generate(const GenerationConfig& gen,
                                 const std::string& prompt) const = 0;
    virtual std::string describe() const = 0;
    virtual int scoring_concurrency(int harness_default) const = 0;
    virtual long long dropped_positions() const { return 0; }
    virtual long long retries_used() const { return 0; }
    virtual void check_reachable() const {}
};

class NgramBackend final : public ScoringBackend {
public:
    NgramBackend(NGramModel base, NGramModel finetuned, std::string description)
        : base_(std::move(base)),
          finetuned_(std::move(finetuned)),
          description_(std::move(description)) {}

    std::pair<ScoredSequence, ScoredSequence> score_text(
        const std::string& text) const override {
        return {score(base_, text), score(finetuned_, text)};
    }

    std::pair<ScoredSequence, ScoredSequence> score_continuation(
        const std::string& prefix, const std::string& continuation) const override {
        return {score_conditional(base_, prefix, continuation),
                score_conditional(finetuned_, prefix, continuation)};
    }

    std::string generate(const GenerationConfig& gen,
                         const std::string& prompt) const override {
        if (gen.temperature != 0.0) {
            raise(ErrorCode::ConfigError,
                  "the n-gram backend generates greedily; set temperature to 0");
        }
        std::string raw = generate_greedy(
            finetuned_, prompt, static_cast<std::size_t>(gen.max_new_tokens));
        if (raw.empty()) {
            raise(ErrorCode::EmptyGeneration,
                  "greedy continuation produced no bytes");
        }
        return truncate_at_stops(std::move(raw), gen.stop_sequences);
    }

    std::string describe() const override { return description_; }

    int scoring_concurrency(int harness_default) const override {
        return harness_default;
    }

private:
    NGramModel base_;
    NGramModel finetuned_;
    std::string description_;
};

class RemoteBackend final : public ScoringBackend {
public:
    explicit RemoteBackend(const RemotePairSpec& spec)
        : base_(spec.base), finetuned_(spec.finetuned) {}

    std::pair<ScoredSequence, ScoredSequence> score_text(
        const std::string& text) const override {
        return score_pair(base_, finetuned_, text);
    }

    std::pair<ScoredSequence, ScoredSequence> score_continuation(
        const std::string& prefix, const std::string& continuation) const override {
        return score_conditional_pair(base_, finetuned_, prefix,
                                      prefix + continuation);
    }

    std::string generate(const GenerationConfig& gen,
                         const std::string& prompt) const override {
        return finetuned_.generate(gen, prompt, "{question}");
    }

    std::string describe() const override {
        return "remote(base=" + base_.config().model_name + "@" +
               base_.config().endpoint + ", finetuned=" +
               finetuned_.config().model_name + "@" +
               finetuned_.config().endpoint + ")";
    }

    int scoring_concurrency(int) const override {
        return std::min(base_.config().max_concurrency,
                        finetuned_.config().max_concurrency);
    }

    long long dropped_positions() const override {
        return base_.dropped_positions() + finetuned_.dropped_positions();
    }

    long long retries_used() const override {
        return base_.retries_used() + finetuned_.retries_used();
    }

    void check_reachable() const override {
        base_.fetch_echo("ping");
        finetuned_.fetch_echo("ping");
    }

private:
    RemoteScorer base_;
    RemoteScorer finetuned_;
};

NGramModel resolve_base_model(const NgramPairSpec& spec) {
    if (!spec.base_model.empty()) return load_model(spec.base_model);
    // A broad base corpus may legitimately mix domains, so load it under the
    // role that leaves record labels unconstrained.
    const Dataset corpus =
        load_dataset({spec.base_corpus, ""}, DatasetRole::OOD_Test, "base_corpus");
    return train(corpus, spec.order, spec.k);
}

std::unique_ptr<ScoringBackend> make_backend(const ExperimentConfig& config,
                                             const Dataset& in_d_train) {
    if (config.remote) return std::make_unique<RemoteBackend>(*config.remote);
    if (!config.ngram) {
        raise(ErrorCode::ConfigError, "config carries no model_pair");
    }
    const NgramPairSpec& spec = *config.ngram;
    NGramModel base = resolve_base_model(spec);
    NGramModel finetuned = [&] {
        if (!spec.finetuned_model.empty()) {
            NGramModel loaded = load_model(spec.finetuned_model);
            if (loaded.order() != base.order()) {
                raise(ErrorCode::OrderMismatch,
                      "base and finetuned model orders differ (" +
                          std::to_string(base.order()) + " vs " +
                          std::to_string(loaded.order()) + ")");
            }
            return loaded;
        }
        if (!spec.in_d_corpus.empty()) {
            const Dataset corpus = load_dataset({spec.in_d_corpus, ""},
                                                DatasetRole::InD_Train, "in_d_corpus");
            return adapt(base, corpus, spec.alpha);
        }
        return adapt(base, in_d_train, spec.alpha);
    }();
    std::string desc = "ngram(order=" + std::to_string(base.order()) +
                       ", k=" + fmt_double(base.smoothing_k()) +
                       ", alpha=" + fmt_double(spec.alpha) + ")";
    return std::make_unique<NgramBackend>(std::move(base), std::move(finetuned),
                                          std::move(desc));
}

// ---------------------------------------------------------------------------
// Parallel scoring
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (workers < 1) workers = 1;
    workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(workers), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                if (failed.load(std::memory_order_relaxed)) return;
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Criterion evaluation helpers
// ---------------------------------------------------------------------------

double flat_criterion_value(const CriterionKind& kind, const ScoredSequence& base,
                            const ScoredSequence& finetuned) {
    const auto normalized = [&](double v, std::size_t token_count) {
        if (!kind.normalize_by_length) return v;
        if (token_count == 0) {
            raise(ErrorCode::DataInvariant,
                  "cannot length-normalize an empty scored sequence");
        }
        return v / static_cast<double>(token_count);
    };
    switch (kind.tag) {
        case CriterionTag::LR:
            return log_ratio(base, finetuned, kind.normalize_by_length);
        case CriterionTag::LH_Base:
            return normalized(lh_score(base), base.token_count());
        case CriterionTag::LH_Finetuned:
            return normalized(lh_score(finetuned), finetuned.token_count());
        default:
            raise(ErrorCode::ConfigError,
                  "criterion \"" + to_string(kind) + "\" requires qa mode");
    }
}

std::vector<CriterionKind> resolve_criteria(const ExperimentConfig& config,
                                            std::vector<CriterionKind> defaults,
                                            bool qa_mode) {
    std::vector<CriterionKind> criteria =
        config.criteria.empty() ? std::move(defaults) : config.criteria;
    for (const auto& kind : criteria) {
        if (is_qa_criterion(kind.tag) != qa_mode) {
            raise(ErrorCode::ConfigError,
                  "criterion \"" + to_string(kind) + "\" does not fit mode " +
                      to_string(config.mode));
        }
    }
    return criteria;
}

// In-distribution part of the eval: either an explicit test set or a seeded
// split of in_d. Returns (train, test).
std::pair<Dataset, Dataset> resolve_in_d(const ExperimentConfig& config,
                                         const char* what) {
    Dataset all = load_dataset(config.in_d, DatasetRole::InD_Train, what);
    if (!config.in_d_test.empty()) {
        Dataset test = load_dataset(config.in_d_test, DatasetRole::InD_Test,
                                    "in_d_test");
        return {std::move(all), std::move(test)};
    }
    auto [train_part, eval_part] = split(all, config.eval_fraction, config.seed);
    if (eval_part.records.empty()) {
        raise(ErrorCode::InvalidFraction,
              "eval_fraction " + fmt_double(config.eval_fraction) + " yields an "
              "empty eval split for " + std::to_string(all.records.size()) +
              " records");
    }
    return {std::move(train_part), eval_part.with_role(DatasetRole::InD_Test)};
}

struct EvalItem {
    const TextRecord* record;
    Label cls;  // class assigned by the dataset the record came from
};

std::vector<EvalItem> gather_items(const Dataset& in_test, const Dataset& ood_test) {
    std::vector<EvalItem> items;
    items.reserve(in_test.records.size() + ood_test.records.size());
    for (const auto& r : in_test.records) {
        if (r.label == Label::OutOfDistribution) {
            std::cerr << "[oodratio] warning: record " << r.id
                      << " sits in the in-distribution test set but is labeled "
                         "ood; the dataset role wins\n";
        }
        items.push_back({&r, Label::InDistribution});
    }
    for (const auto& r : ood_test.records) {
        if (r.label == Label::InDistribution) {
            std::cerr << "[oodratio] warning: record " << r.id
                      << " sits in the OOD test set but is labeled in; the "
                         "dataset role wins\n";
        }
        items.push_back({&r, Label::OutOfDistribution});
    }
    return items;
}

RunReport execute_flat(const ExperimentConfig& config, ScoringBackend& backend,
                       const Dataset& in_test, const Dataset& ood_test,
                       const std::vector<CriterionKind>& criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<EvalItem> items = gather_items(in_test, ood_test);

    std::vector<std::pair<ScoredSequence, ScoredSequence>> scored(items.size());
    parallel_for(items.size(),
                 backend.scoring_concurrency(config.max_concurrency),
                 [&](std::size_t i) {
                     std::string text = items[i].record->training_text();
                     if (config.max_bytes && text.size() > *config.max_bytes) {
                         text.resize(*config.max_bytes);
                     }
                     scored[i] = backend.score_text(text);
                 });

    std::vector<ScoreRow> rows;
    rows.reserve(items.size() * criteria.size());
    std::vector<MetricsReport> metrics;
    for (const auto& kind : criteria) {
        LabeledScores ls;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const double value =
                flat_criterion_value(kind, scored[i].first, scored[i].second);
            rows.push_back({items[i].record->id, to_string(kind), value,
                            items[i].cls});
            (items[i].cls == Label::InDistribution ? ls.in_scores : ls.ood_scores)
                .push_back(value);
        }
        metrics.push_back(compute_metrics(ls, kind));
    }

    fs::create_directories(config.output_dir);
    const std::string score_file = config.output_dir + "/scores.jsonl";
    save_score_file(rows, score_file);

    RunReport report;
    report.config_echo = config_to_json(config);
    report.backend = backend.describe();
    report.metrics = std::move(metrics);
    report.score_file = score_file;
    report.n_in_test = in_test.records.size();
    report.n_ood_test = ood_test.records.size();
    report.dropped_positions = backend.dropped_positions();
    report.retries_used = backend.retries_used();
    report.include_timing = config.include_timing;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return report;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiment shapes
// ---------------------------------------------------------------------------

RunReport run_ood(const ExperimentConfig& config) {
    if (config.mode != ExperimentMode::FarOrNearOOD &&
        config.mode != ExperimentMode::Spam) {
        raise(ErrorCode::ConfigError,
              std::string("run_ood handles modes ood|spam, got ") +
                  to_string(config.mode));
    }
    const std::vector<CriterionKind> criteria = resolve_criteria(
        config, {{CriterionTag::LR, false}, {CriterionTag::LH_Finetuned, false}},
        false);
    audit_orientation(criteria);

    auto [in_train, in_test] = resolve_in_d(config, "datasets.in_d");
    const Dataset ood_test = load_dataset(config.ood, DatasetRole::OOD_Test,
                                          "datasets.ood");
    const auto backend = make_backend(config, in_train);
    return execute_flat(config, *backend, in_test, ood_test, criteria);
}

RunReport run_spam_dual_proxy(const ExperimentConfig& config) {
    if (config.mode != ExperimentMode::SpamDualProxy) {
        raise(ErrorCode::ConfigError,
              std::string("run_spam_dual_proxy needs mode spam_dual_proxy, got ") +
                  to_string(config.mode));
    }
    if (config.spam_train.empty() && config.ngram) {
        raise(ErrorCode::MissingSpamCorpus,
              "dual-proxy mode needs datasets.spam_train (the spam corpus the "
              "proxy adapts on)");
    }
    const std::vector<CriterionKind> criteria =
        resolve_criteria(config, {{CriterionTag::LR, false}}, false);
    audit_orientation(criteria);

    auto [ham_train, ham_test] = resolve_in_d(config, "datasets.in_d");
    const Dataset spam_test =
        load_dataset(config.ood, DatasetRole::OOD_Test, "datasets.ood");

    std::unique_ptr<ScoringBackend> backend;
    if (config.remote) {
        // Slot convention for a served dual-proxy pair: base = the model
        // finetuned on spam, finetuned = the model finetuned on ham. The LR
        // criterion then reads log p_spam(x) - log p_ham(x).
        backend = std::make_unique<RemoteBackend>(*config.remote);
    } else {
        const NgramPairSpec& spec = *config.ngram;
        NGramModel base = resolve_base_model(spec);
        const Dataset spam_corpus = load_dataset(
            config.spam_train, DatasetRole::OOD_Test, "datasets.spam_train");
        NGramModel proxy = adapt(base, spam_corpus, spec.alpha);
        NGramModel ham_model = [&] {
            if (!spec.in_d_corpus.empty()) {
                const Dataset corpus = load_dataset(
                    {spec.in_d_corpus, ""}, DatasetRole::InD_Train, "in_d_corpus");
                return adapt(base, corpus, spec.alpha);
            }
            return adapt(base, ham_train, spec.alpha);
        }();
        std::string desc =
            "ngram-dual-proxy(order=" + std::to_string(base.order()) +
            ", k=" + fmt_double(base.smoothing_k()) +
            ", alpha=" + fmt_double(spec.alpha) +
            "; base slot=spam proxy, finetuned slot=ham model)";
        backend = std::make_unique<NgramBackend>(
            std::move(proxy), std::move(ham_model), std::move(desc));
    }
    return execute_flat(config, *backend, ham_test, spam_test, criteria);
}

RunReport run_qa(const ExperimentConfig& config) {
    if (config.mode != ExperimentMode::QA) {
        raise(ErrorCode::ConfigError,
              std::string("run_qa needs mode qa, got ") + to_string(config.mode));
    }
    const std::vector<CriterionKind> criteria =
        resolve_criteria(config,
                         {{CriterionTag::Sq, false},
                          {CriterionTag::Sa, false},
                          {CriterionTag::Sqa, false},
                          {CriterionTag::SaGivenQ, false}},
                         true);
    audit_orientation(criteria);

    auto [in_train, in_test] = resolve_in_d(config, "datasets.in_d");
    const Dataset ood_test =
        load_dataset(config.ood, DatasetRole::OOD_Test, "datasets.ood");
    const Dataset* qa_sets[] = {&in_train, &in_test, &ood_test};
    for (const Dataset* ds : qa_sets) {
        for (const auto& r : ds->records) {
            if (!r.is_qa()) {
                raise(ErrorCode::ConfigError,
                      "qa mode requires question-bearing records; \"" + r.id +
                          "\" in " + ds->name + " has no question");
            }
        }
    }
    const auto backend = make_backend(config, in_train);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<EvalItem> items = gather_items(in_test, ood_test);
    const bool want_normalized =
        std::any_of(criteria.begin(), criteria.end(),
                    [](const CriterionKind& k) { return k.normalize_by_length; });

    std::vector<std::map<CriterionKind, CriterionScore>> results(items.size());
    std::vector<std::string> exclusion(items.size());
    parallel_for(
        items.size(), backend->scoring_concurrency(config.max_concurrency),
        [&](std::size_t i) {
            const TextRecord& rec = *items[i].record;
            const std::string prompt =
                apply_prompt_template(config.prompt_template, *rec.question);
            std::string answer;
            try {
                answer = backend->generate(config.generation, prompt);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::EmptyGeneration) {
                    exclusion[i] = e.what();
                    return;
                }
                throw;
            }
            if (answer.empty()) {
                exclusion[i] = "generation empty after stop-sequence stripping";
                return;
            }
            QaSequences seqs;
            std::tie(seqs.base_q, seqs.ft_q) = backend->score_text(*rec.question);
            std::tie(seqs.base_a, seqs.ft_a) = backend->score_text(answer);
            std::tie(seqs.base_a_given_q, seqs.ft_a_given_q) =
                backend->score_continuation(prompt, answer);
            auto scores = qa_criteria(rec.id, seqs, answer.size(), false);
            if (want_normalized) {
                auto normalized = qa_criteria(rec.id, seqs, answer.size(), true);
                scores.insert(normalized.begin(), normalized.end());
            }
            results[i] = std::move(scores);
        });

    std::vector<ScoreRow> rows;
    std::vector<MetricsReport> metrics;
    std::vector<std::string> excluded;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!exclusion[i].empty()) {
            excluded.push_back(items[i].record->id + ": " + exclusion[i]);
        }
    }
    for (const auto& kind : criteria) {
        LabeledScores ls;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!exclusion[i].empty()) continue;
            const CriterionScore& cs = results[i].at(kind);
            rows.push_back({items[i].record->id, to_string(kind), cs.value,
                            items[i].cls});
            (items[i].cls == Label::InDistribution ? ls.in_scores : ls.ood_scores)
                .push_back(cs.value);
        }
        metrics.push_back(compute_metrics(ls, kind));
    }

    fs::create_directories(config.output_dir);
    const std::string score_file = config.output_dir + "/scores.jsonl";
    save_score_file(rows, score_file);

    RunReport report;
    report.config_echo = config_to_json(config);
    report.backend = backend->describe();
    report.metrics = std::move(metrics);
    report.score_file = score_file;
    report.n_in_test = in_test.records.size();
    report.n_ood_test = ood_test.records.size();
    report.dropped_positions = backend->dropped_positions();
    report.retries_used = backend->retries_used();
    report.excluded = std::move(excluded);
    report.qa_mode = true;
    report.generation_used = config.generation;
    report.include_timing = config.include_timing;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return report;
}

std::vector<ScoreRow> score_records(const ExperimentConfig& config,
                                    const Dataset& data,
                                    const std::vector<CriterionKind>& criteria) {
    for (const auto& kind : criteria) {
        if (is_qa_criterion(kind.tag)) {
            raise(ErrorCode::ConfigError,
                  "criterion \"" + to_string(kind) +
                      "\" needs the qa experiment shape, not plain scoring");
        }
    }
    // When the pair still needs building, the whole in_d dataset serves as
    // the adaptation corpus (no eval split: this scores, it does not eval).
    Dataset in_train;
    if (!config.in_d.empty()) {
        in_train = load_dataset(config.in_d, DatasetRole::InD_Train, "datasets.in_d");
    }
    const auto backend = make_backend(config, in_train);

    std::vector<std::pair<ScoredSequence, ScoredSequence>> scored(
        data.records.size());
    parallel_for(data.records.size(),
                 backend->scoring_concurrency(config.max_concurrency),
                 [&](std::size_t i) {
                     std::string text = data.records[i].training_text();
                     if (config.max_bytes && text.size() > *config.max_bytes) {
                         text.resize(*config.max_bytes);
                     }
                     scored[i] = backend->score_text(text);
                 });

    std::vector<ScoreRow> rows;
    rows.reserve(data.records.size() * criteria.size());
    for (const auto& kind : criteria) {
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            rows.push_back({data.records[i].id, to_string(kind),
                            flat_criterion_value(kind, scored[i].first,
                                                 scored[i].second),
                            data.records[i].label});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Orientation audit
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kAuditSeed = 90210;

void require_oriented(const CriterionKind& kind, const LabeledScores& ls) {
    const double value = auroc(ls);
    if (value < 0.5) {
        raise(ErrorCode::OrientationAudit,
              "criterion \"" + to_string(kind) +
                  "\" failed the orientation audit: separable-task AUROC " +
                  fmt_double(value) + " < 0.5 (larger must mean more OOD)");
    }
}

void audit_flat(const std::vector<CriterionKind>& criteria) {
    using namespace synth;
    const Dataset in_train = arithmetic_sentences(80, 2, 4, kAuditSeed,
                                                  "audit-arith-train",
                                                  Label::InDistribution);
    const Dataset base_corpus =
        concat(in_train,
               color_sentences(40, 2, 4, kAuditSeed + 1, "audit-color",
                               Label::Unlabeled),
               "audit-base-corpus");
    const NGramModel base = train(base_corpus, 3, 1.0);
    const NGramModel finetuned = adapt(base, in_train, 5.0);
    const Dataset in_eval = arithmetic_sentences(40, 2, 4, kAuditSeed + 2,
                                                 "audit-arith-eval",
                                                 Label::InDistribution);
    // The OOD side must come from a domain the base model has seen:
    // likelihood ratios are only expected to rank near-OOD text, and on
    // noise that is foreign to both models the ratio legitimately
    // collapses. The audit checks sign conventions, not far-OOD power.
    const Dataset ood_eval = color_sentences(40, 2, 4, kAuditSeed + 3,
                                             "audit-color-eval",
                                             Label::OutOfDistribution);
    for (const auto& kind : criteria) {
        LabeledScores ls;
        for (const auto& r : in_eval.records) {
            ls.in_scores.push_back(flat_criterion_value(
                kind, score(base, r.text), score(finetuned, r.text)));
        }
        for (const auto& r : ood_eval.records) {
            ls.ood_scores.push_back(flat_criterion_value(
                kind, score(base, r.text), score(finetuned, r.text)));
        }
        require_oriented(kind, ls);
    }
}

void audit_qa(const std::vector<CriterionKind>& criteria) {
    using namespace synth;
    const Dataset in_train =
        arithmetic_qa(60, kAuditSeed + 10, "audit-qa-arith", Label::InDistribution);
    const Dataset base_corpus =
        concat(in_train,
               color_qa(60, kAuditSeed + 11, "audit-qa-color", Label::Unlabeled),
               "audit-qa-base-corpus");
    const NGramModel base = train(base_corpus, 6, 1.0);
    const NGramModel finetuned = adapt(base, in_train, 5.0);
    const Dataset in_eval =
        arithmetic_qa(30, kAuditSeed + 12, "audit-qa-in", Label::InDistribution);
    const Dataset ood_eval =
        color_qa(30, kAuditSeed + 13, "audit-qa-ood", Label::OutOfDistribution);

    std::map<CriterionKind, LabeledScores> buckets;
    const auto add_records = [&](const Dataset& ds, bool is_ood) {
        for (const auto& r : ds.records) {
            const std::string& q = *r.question;
            const std::string answer = generate_greedy(finetuned, q, 96);
            if (answer.empty()) continue;
            QaSequences seqs;
            seqs.base_q = score(base, q);
            seqs.ft_q = score(finetuned, q);
            seqs.base_a = score(base, answer);
            seqs.ft_a = score(finetuned, answer);
            seqs.base_a_given_q = score_conditional(base, q, answer);
            seqs.ft_a_given_q = score_conditional(finetuned, q, answer);
            auto scores = qa_criteria(r.id, seqs, answer.size(), false);
            auto normalized = qa_criteria(r.id, seqs, answer.size(), true);
            scores.insert(normalized.begin(), normalized.end());
            for (const auto& [kind, cs] : scores) {
                (is_ood ? buckets[kind].ood_scores : buckets[kind].in_scores)
                    .push_back(cs.value);
            }
        }
    };
    add_records(in_eval, false);
    add_records(ood_eval, true);
    for (const auto& kind : criteria) {
        const auto it = buckets.find(kind);
        if (it == buckets.end()) {
            raise(ErrorCode::OrientationAudit,
                  "orientation audit produced no scores for criterion \"" +
                      to_string(kind) + "\"");
        }
        require_oriented(kind, it->second);
    }
}

}  // namespace

void audit_orientation(const std::vector<CriterionKind>& criteria) {
    std::vector<CriterionKind> flat, qa;
    for (const auto& kind : criteria) {
        (is_qa_criterion(kind.tag) ? qa : flat).push_back(kind);
    }
    if (!flat.empty()) audit_flat(flat);
    if (!qa.empty()) audit_qa(qa);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    raise(ErrorCode::ConfigError,
          "unknown report format \"" + name + "\" (expected json|csv|markdown)");
}

json report_to_json(const RunReport& report) {
    json j;
    j["config"] = report.config_echo;
    j["backend"] = report.backend;
    j["score_file"] = report.score_file;
    j["n_in_test"] = report.n_in_test;
    j["n_ood_test"] = report.n_ood_test;
    j["dropped_positions"] = report.dropped_positions;
    j["retries_used"] = report.retries_used;
    j["excluded"] = report.excluded;
    if (report.qa_mode) j["generation"] = generation_to_json(report.generation_used);
    json arr = json::array();
    for (const auto& m : report.metrics) {
        json row;
        row["criterion"] = to_string(m.criterion);
        row["auroc"] = m.auroc;
        row["aupr_ood"] = m.aupr_ood;
        row["fpr95"] = m.fpr95;
        row["threshold_at_tpr95"] = m.threshold_at_tpr95;
        row["n_in"] = m.n_in;
        row["n_ood"] = m.n_ood;
        arr.push_back(std::move(row));
    }
    j["metrics"] = std::move(arr);
    if (report.include_timing) j["timing_seconds"] = report.wall_seconds;
    return j;
}

RunReport report_from_json(const json& doc) {
    RunReport report;
    report.config_echo = doc.value("config", json::object());
    report.backend = doc.value("backend", "");
    report.score_file = doc.value("score_file", "");
    report.n_in_test = doc.value("n_in_test", std::size_t{0});
    report.n_ood_test = doc.value("n_ood_test", std::size_t{0});
    report.dropped_positions = doc.value("dropped_positions", 0LL);
    report.retries_used = doc.value("retries_used", 0LL);
    if (doc.contains("excluded")) {
        for (const auto& e : doc.at("excluded")) {
            report.excluded.push_back(e.get<std::string>());
        }
    }
    if (doc.contains("generation")) {
        report.qa_mode = true;
        report.generation_used = parse_generation(doc.at("generation"), "generation");
    }
    if (doc.contains("metrics")) {
        for (const auto& row : doc.at("metrics")) {
            MetricsReport m;
            m.criterion = parse_criterion(row.at("criterion").get<std::string>());
            m.auroc = row.at("auroc").get<double>();
            m.aupr_ood = row.at("aupr_ood").get<double>();
            m.fpr95 = row.at("fpr95").get<double>();
            m.threshold_at_tpr95 = row.at("threshold_at_tpr95").get<double>();
            m.n_in = row.at("n_in").get<std::size_t>();
            m.n_ood = row.at("n_ood").get<std::size_t>();
            report.metrics.push_back(std::move(m));
        }
    }
    if (doc.contains("timing_seconds")) {
        report.include_timing = true;
        report.wall_seconds = doc.at("timing_seconds").get<double>();
    }
    return report;
}

namespace {

std::string fmt_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string render_report(const RunReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        return report_to_json(report).dump(2) + "\n";
    }
    if (format == ReportFormat::Csv) {
        std::string out =
            "criterion,auroc,aupr_ood,fpr95,threshold_at_tpr95,n_in,n_ood\n";
        for (const auto& m : report.metrics) {
            out += to_string(m.criterion);
            out += ',';
            out += fmt_full(m.auroc);
            out += ',';
            out += fmt_full(m.aupr_ood);
            out += ',';
            out += fmt_full(m.fpr95);
            out += ',';
            out += fmt_full(m.threshold_at_tpr95);
            out += ',';
            out += std::to_string(m.n_in);
            out += ',';
            out += std::to_string(m.n_ood);
            out += '\n';
        }
        return out;
    }

    std::string out = "# Detection report\n\n";
    out += "- backend: " + report.backend + "\n";
    out += "- score file: " + report.score_file + "\n";
    out += "- eval records: " + std::to_string(report.n_in_test) +
           " in-distribution, " + std::to_string(report.n_ood_test) + " OOD\n";
    out += "- dropped logprob positions: " +
           std::to_string(report.dropped_positions) +
           "; retries: " + std::to_string(report.retries_used) + "\n";
    if (report.qa_mode) {
        out += "- generation: max_new_tokens=" +
               std::to_string(report.generation_used.max_new_tokens) +
               ", temperature=" + fmt_double(report.generation_used.temperature) +
               "\n";
    }
    if (!report.excluded.empty()) {
        out += "- excluded records (" + std::to_string(report.excluded.size()) +
               "):\n";
        for (const auto& e : report.excluded) out += "  - " + e + "\n";
    }
    if (report.include_timing) {
        out += "- wall time: " + fmt_double(report.wall_seconds) + " s\n";
    }
    out += "\n| Criterion | AUROC | AUPR (OOD) | FPR95 |\n";
    out += "| --- | --- | --- | --- |\n";
    for (const auto& m : report.metrics) {
        out += "| " + to_string(m.criterion) + " | " + fmt_fixed6(m.auroc) +
               " | " + fmt_fixed6(m.aupr_ood) + " | " + fmt_fixed6(m.fpr95) +
               " |\n";
    }
    return out;
}

std::string emit_report(const RunReport& report, ReportFormat format,
                        const std::string& dir) {
    fs::create_directories(dir);
    const char* name = format == ReportFormat::Json  ? "report.json"
                       : format == ReportFormat::Csv ? "report.csv"
                                                     : "report.md";
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::Io, "cannot open " + path + " for writing");
    }
    out << render_report(report, format);
    if (!out) {
        raise(ErrorCode::Io, "failed writing " + path);
    }
    return path;
}

// ---------------------------------------------------------------------------
// Dry run
// ---------------------------------------------------------------------------

std::string dry_run(const ExperimentConfig& config) {
    std::string summary = "mode: " + std::string(to_string(config.mode)) + "\n";

    const bool qa_mode = config.mode == ExperimentMode::QA;
    std::vector<CriterionKind> defaults;
    if (qa_mode) {
        defaults = {{CriterionTag::Sq, false},
                    {CriterionTag::Sa, false},
                    {CriterionTag::Sqa, false},
                    {CriterionTag::SaGivenQ, false}};
    } else if (config.mode == ExperimentMode::SpamDualProxy) {
        defaults = {{CriterionTag::LR, false}};
    } else {
        defaults = {{CriterionTag::LR, false}, {CriterionTag::LH_Finetuned, false}};
    }
    const auto criteria = resolve_criteria(config, std::move(defaults), qa_mode);
    summary += "criteria:";
    for (const auto& kind : criteria) summary += " " + to_string(kind);
    summary += "\n";
    audit_orientation(criteria);
    summary += "orientation audit: ok\n";

    auto [in_train, in_test] = resolve_in_d(config, "datasets.in_d");
    const Dataset ood_test =
        load_dataset(config.ood, DatasetRole::OOD_Test, "datasets.ood");
    summary += "in_d: " + std::to_string(in_train.records.size()) + " train / " +
               std::to_string(in_test.records.size()) + " test records\n";
    summary += "ood: " + std::to_string(ood_test.records.size()) + " test records\n";
    if (config.mode == ExperimentMode::SpamDualProxy) {
        if (config.spam_train.empty() && config.ngram) {
            raise(ErrorCode::MissingSpamCorpus,
                  "dual-proxy mode needs datasets.spam_train");
        }
        if (!config.spam_train.empty()) {
            const Dataset spam = load_dataset(config.spam_train,
                                              DatasetRole::OOD_Test,
                                              "datasets.spam_train");
            summary += "spam_train: " + std::to_string(spam.records.size()) +
                       " records\n";
        }
    }

    if (config.ngram) {
        const NgramPairSpec& spec = *config.ngram;
        for (const std::string* path :
             {&spec.base_corpus, &spec.in_d_corpus, &spec.base_model,
              &spec.finetuned_model}) {
            if (!path->empty() && !fs::exists(*path)) {
                raise(ErrorCode::Io, "ngram input path does not exist: " + *path);
            }
        }
        summary += "backend: ngram(order=" + std::to_string(spec.order) +
                   ", k=" + fmt_double(spec.k) +
                   ", alpha=" + fmt_double(spec.alpha) + ")\n";
    } else if (config.remote) {
        const RemoteBackend backend(*config.remote);
        backend.check_reachable();
        summary += "backend: " + backend.describe() + " (reachable)\n";
    }
    summary += "output_dir: " + config.output_dir + "\n";
    summary += "dry run ok\n";
    return summary;
}

}  // namespace oodratio
