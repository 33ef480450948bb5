#pragma once

#include <stdexcept>
#include <string>

namespace oodratio {

// Error taxonomy. `exit_class` groups codes into the CLI's exit codes:
// 1 = config, 2 = backend, 3 = data.
enum class ErrorCode {
    // data / files
    Io,
    MalformedLine,
    DuplicateId,
    InvalidFraction,
    EmptyCorpus,
    OrderMismatch,
    DataInvariant,
    // remote backend
    Transport,
    ProtocolMismatch,
    NonFiniteLogprob,
    BoundaryAmbiguous,
    EmptyGeneration,
    // criteria
    TokenizationMismatch,
    MissingAnswer,
    // metrics
    EmptyClass,
    NonFiniteScore,
    // harness
    ConfigError,
    MissingSpamCorpus,
    OrientationAudit,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    int exit_class() const noexcept {
        switch (code_) {
            case ErrorCode::ConfigError:
            case ErrorCode::InvalidFraction:
            case ErrorCode::MissingSpamCorpus:
            case ErrorCode::OrientationAudit:
                return 1;
            case ErrorCode::Transport:
            case ErrorCode::ProtocolMismatch:
            case ErrorCode::NonFiniteLogprob:
            case ErrorCode::BoundaryAmbiguous:
            case ErrorCode::EmptyGeneration:
                return 2;
            default:
                return 3;
        }
    }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

const char* to_string(ErrorCode code) noexcept;

}  // namespace oodratio
