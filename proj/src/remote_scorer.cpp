#include "oodratio/remote_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "oodratio/error.hpp"

namespace oodratio {

using nlohmann::json;

namespace {

constexpr const char* kApiKeyEnvVar = "OODRATIO_API_KEY";

std::size_t leading_nulls(const EchoedTokens& echoed) {
    std::size_t i = 0;
    while (i < echoed.logprobs.size() && !echoed.logprobs[i].has_value()) ++i;
    return i;
}

// POST payload to {host_base}{path}, retrying transport failures and
// retryable statuses with exponential backoff. Returns the parsed body.
json post_json(const BackendConfig& config, const std::string& host_base,
               const std::string& path, const std::string& api_key,
               const json& payload, std::atomic<long long>& retries_used) {
    const std::string body = payload.dump();
    for (int attempt = 0;; ++attempt) {
        httplib::Client client(host_base);
        client.set_connection_timeout(config.timeout);
        client.set_read_timeout(config.timeout);
        client.set_write_timeout(config.timeout);
        httplib::Headers headers;
        if (!api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key);
        }

        auto res = client.Post(path, headers, body, "application/json");
        std::string failure;
        bool retryable = false;
        if (!res) {
            failure = "transport error: " + httplib::to_string(res.error());
            retryable = true;
        } else if (res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                // Covers syntax errors and numeric overflow alike: e.g. the
                // 1e999 idiom some servers use for -inf logprobs does not
                // survive strict JSON parsing.
                raise(ErrorCode::ProtocolMismatch,
                      "server returned unparseable JSON: " + std::string(e.what()));
            }
        } else {
            failure = "HTTP " + std::to_string(res->status);
            retryable = res->status >= 500 || res->status == 429;
        }

        if (!retryable || attempt >= config.max_retries) {
            raise(ErrorCode::Transport, "POST " + host_base + path + " failed (" +
                                            failure + ") after " +
                                            std::to_string(attempt + 1) +
                                            " attempt(s)");
        }
        retries_used.fetch_add(1);
        std::this_thread::sleep_for(config.retry_backoff * (1LL << attempt));
    }
}

const json& first_choice(const json& response) {
    const auto it = response.find("choices");
    if (it == response.end() || !it->is_array() || it->empty()) {
        raise(ErrorCode::ProtocolMismatch, "response has no choices");
    }
    return it->front();
}

}  // namespace

std::string apply_prompt_template(const std::string& prompt_template,
                                  const std::string& question) {
    constexpr const char* kPlaceholder = "{question}";
    std::size_t pos = prompt_template.find(kPlaceholder);
    if (pos == std::string::npos) {
        raise(ErrorCode::ConfigError,
              "prompt template must contain the {question} placeholder");
    }
    std::string out = prompt_template;
    while (pos != std::string::npos) {
        out.replace(pos, std::char_traits<char>::length(kPlaceholder), question);
        pos = out.find(kPlaceholder, pos + question.size());
    }
    return out;
}

RemoteScorer::RemoteScorer(BackendConfig config) : config_(std::move(config)) {
    const std::string& url = config_.endpoint;
    if (url.rfind("https://", 0) == 0) {
        raise(ErrorCode::ConfigError,
              "https endpoints are not supported in this build; point at an "
              "http:// endpoint or a local proxy");
    }
    if (url.rfind("http://", 0) != 0) {
        raise(ErrorCode::ConfigError,
              "endpoint must be an absolute http:// URL, got \"" + url + "\"");
    }
    const std::size_t authority_start = std::char_traits<char>::length("http://");
    if (authority_start >= url.size()) {
        raise(ErrorCode::ConfigError, "endpoint URL has no host: \"" + url + "\"");
    }
    const std::size_t slash = url.find('/', authority_start);
    if (slash == std::string::npos) {
        host_base_ = url;
    } else {
        host_base_ = url.substr(0, slash);
        path_prefix_ = url.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') {
            path_prefix_.pop_back();
        }
    }
    if (config_.model_name.empty()) {
        raise(ErrorCode::ConfigError, "backend model_name must be set");
    }
    if (config_.max_concurrency < 1) {
        raise(ErrorCode::ConfigError, "max_concurrency must be >= 1");
    }
    if (config_.max_retries < 0) {
        raise(ErrorCode::ConfigError, "max_retries must be >= 0");
    }
    resolved_key_ = config_.api_key;
    if (resolved_key_.empty()) {
        if (const char* env = std::getenv(kApiKeyEnvVar)) resolved_key_ = env;
    }
}

EchoedTokens RemoteScorer::fetch_echo(const std::string& text) const {
    const json payload = {
        {"model", config_.model_name}, {"prompt", text},      {"max_tokens", 0},
        {"echo", true},                {"logprobs", 0},
    };
    const json response =
        post_json(config_, host_base_, path_prefix_ + "/v1/completions",
                  resolved_key_, payload, retries_used_);

    const json& choice = first_choice(response);
    const auto lp_it = choice.find("logprobs");
    if (lp_it == choice.end() || lp_it->is_null()) {
        raise(ErrorCode::ProtocolMismatch,
              "response choice carries no logprobs block");
    }
    const json& lp = *lp_it;
    if (!lp.contains("tokens") || !lp.contains("token_logprobs") ||
        !lp.contains("text_offset")) {
        raise(ErrorCode::ProtocolMismatch,
              "logprobs block is missing tokens/token_logprobs/text_offset");
    }

    EchoedTokens echoed;
    for (const auto& tok : lp.at("tokens")) {
        echoed.tokens.push_back(tok.get<std::string>());
    }
    for (const auto& value : lp.at("token_logprobs")) {
        if (value.is_null()) {
            echoed.logprobs.push_back(std::nullopt);
        } else if (value.is_number()) {
            echoed.logprobs.push_back(value.get<double>());
        } else {
            raise(ErrorCode::ProtocolMismatch,
                  "token_logprobs entry is neither number nor null");
        }
    }
    for (const auto& off : lp.at("text_offset")) {
        echoed.offsets.push_back(off.get<std::size_t>());
    }
    if (echoed.tokens.size() != echoed.logprobs.size() ||
        echoed.tokens.size() != echoed.offsets.size()) {
        raise(ErrorCode::ProtocolMismatch,
              "tokens/token_logprobs/text_offset lengths disagree");
    }
    return echoed;
}

ScoredSequence RemoteScorer::finalize_from(const EchoedTokens& echoed,
                                           std::size_t begin_index,
                                           int dropped) const {
    std::vector<double> logprobs;
    logprobs.reserve(echoed.logprobs.size() - begin_index);
    for (std::size_t i = begin_index; i < echoed.logprobs.size(); ++i) {
        if (!echoed.logprobs[i].has_value()) {
            raise(ErrorCode::ProtocolMismatch,
                  "missing logprob at interior position " + std::to_string(i));
        }
        double v = *echoed.logprobs[i];
        if (!std::isfinite(v)) {
            raise(ErrorCode::NonFiniteLogprob,
                  "non-finite logprob at position " + std::to_string(i));
        }
        // Servers occasionally emit tiny positive values; a log-probability
        // cannot exceed 0, so pin them there.
        if (v > 0.0) v = 0.0;
        logprobs.push_back(v);
    }
    dropped_positions_.fetch_add(dropped);
    return ScoredSequence::from_logprobs(std::move(logprobs), dropped);
}

ScoredSequence RemoteScorer::score(const std::string& text) const {
    const EchoedTokens echoed = fetch_echo(text);
    const std::size_t lead = leading_nulls(echoed);
    return finalize_from(echoed, lead, static_cast<int>(lead));
}

namespace {

// Index of the first token belonging to the continuation, requiring a
// token boundary exactly at the end of the prefix.
std::size_t boundary_index(const EchoedTokens& echoed, std::size_t prefix_len,
                           std::size_t full_len) {
    if (prefix_len == 0) return 0;
    if (prefix_len == full_len) return echoed.offsets.size();
    const auto it = std::lower_bound(echoed.offsets.begin(), echoed.offsets.end(),
                                     prefix_len);
    if (it == echoed.offsets.end() || *it != prefix_len) {
        raise(ErrorCode::BoundaryAmbiguous,
              "no token starts exactly at byte " + std::to_string(prefix_len) +
                  "; a token straddles the prefix/continuation split");
    }
    return static_cast<std::size_t>(it - echoed.offsets.begin());
}

void require_prefix(const std::string& prefix, const std::string& full_text) {
    if (prefix.size() > full_text.size() ||
        full_text.compare(0, prefix.size(), prefix) != 0) {
        raise(ErrorCode::DataInvariant,
              "conditional scoring needs prefix to be a string prefix of the "
              "full text");
    }
}

}  // namespace

ScoredSequence RemoteScorer::score_conditional(const std::string& prefix,
                                               const std::string& full_text) const {
    require_prefix(prefix, full_text);
    const EchoedTokens echoed = fetch_echo(full_text);
    const std::size_t begin =
        boundary_index(echoed, prefix.size(), full_text.size());
    if (begin == 0) {
        const std::size_t lead = leading_nulls(echoed);
        return finalize_from(echoed, lead, static_cast<int>(lead));
    }
    return finalize_from(echoed, begin, 0);
}

std::string RemoteScorer::generate(const GenerationConfig& gen,
                                   const std::string& question,
                                   const std::string& prompt_template) const {
    if (gen.max_new_tokens < 1) {
        raise(ErrorCode::ConfigError, "max_new_tokens must be >= 1");
    }
    if (gen.temperature < 0.0) {
        raise(ErrorCode::ConfigError, "temperature must be nonnegative");
    }
    json payload = {
        {"model", config_.model_name},
        {"prompt", apply_prompt_template(prompt_template, question)},
        {"max_tokens", gen.max_new_tokens},
        {"temperature", gen.temperature},
    };
    if (!gen.stop_sequences.empty()) payload["stop"] = gen.stop_sequences;

    const json response =
        post_json(config_, host_base_, path_prefix_ + "/v1/completions",
                  resolved_key_, payload, retries_used_);
    const json& choice = first_choice(response);
    const auto text_it = choice.find("text");
    if (text_it == choice.end() || !text_it->is_string()) {
        raise(ErrorCode::ProtocolMismatch, "completion choice has no text");
    }
    std::string text = text_it->get<std::string>();
    if (text.empty()) {
        raise(ErrorCode::EmptyGeneration, "server returned an empty completion");
    }
    // Truncate at the earliest stop sequence whether or not the server
    // honored the stop parameter itself.
    std::size_t cut = std::string::npos;
    for (const auto& stop : gen.stop_sequences) {
        if (stop.empty()) continue;
        const std::size_t at = text.find(stop);
        if (at < cut) cut = at;
    }
    if (cut != std::string::npos) text.resize(cut);
    return text;
}

std::pair<ScoredSequence, ScoredSequence> score_pair(const RemoteScorer& base,
                                                     const RemoteScorer& finetuned,
                                                     const std::string& text) {
    const EchoedTokens base_echo = base.fetch_echo(text);
    const EchoedTokens ft_echo = finetuned.fetch_echo(text);
    const std::size_t drop =
        std::max(leading_nulls(base_echo), leading_nulls(ft_echo));
    return {base.finalize_from(base_echo, drop, static_cast<int>(drop)),
            finetuned.finalize_from(ft_echo, drop, static_cast<int>(drop))};
}

std::pair<ScoredSequence, ScoredSequence> score_conditional_pair(
    const RemoteScorer& base, const RemoteScorer& finetuned,
    const std::string& prefix, const std::string& full_text) {
    require_prefix(prefix, full_text);
    const EchoedTokens base_echo = base.fetch_echo(full_text);
    const EchoedTokens ft_echo = finetuned.fetch_echo(full_text);
    const std::size_t base_begin =
        boundary_index(base_echo, prefix.size(), full_text.size());
    const std::size_t ft_begin =
        boundary_index(ft_echo, prefix.size(), full_text.size());
    if (base_begin == 0 && ft_begin == 0) {
        const std::size_t drop =
            std::max(leading_nulls(base_echo), leading_nulls(ft_echo));
        return {base.finalize_from(base_echo, drop, static_cast<int>(drop)),
                finetuned.finalize_from(ft_echo, drop, static_cast<int>(drop))};
    }
    return {base.finalize_from(base_echo, base_begin, 0),
            finetuned.finalize_from(ft_echo, ft_begin, 0)};
}

}  // namespace oodratio
