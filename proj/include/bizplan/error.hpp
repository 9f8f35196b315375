#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bizplan {

enum class ErrorCode {
    InvalidArgument,
    MissingSection,
    InvalidGoal,
    GapInHistory,
    PayloadMismatch,
    Timeout,
    ProviderError,
    FixtureMiss,
    UnsupportedMedia,
    FetchFailed,
    NotHtml,
    RobotsDisallowed,
    ExtractionUnparseable,
    NoExemplar,
    SectionGenerationFailed,
    PartialParse,
    StaleProposal,
    UnknownSection,
    QuestionParseFailed,
    StorageCorrupt,
    Cancelled,
    NotFound,
};

/// Stable snake_case name, used in API error bodies.
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Provider failures carry the upstream status (0 when there was no HTTP exchange).
class ProviderError : public Error {
public:
    ProviderError(int status, const std::string& message, bool transient)
        : Error(ErrorCode::ProviderError, message), status_(status), transient_(transient) {}

    int status() const noexcept { return status_; }
    bool transient() const noexcept { return transient_; }

private:
    int status_;
    bool transient_;
};

class FixtureMiss : public Error {
public:
    explicit FixtureMiss(std::string key)
        : Error(ErrorCode::FixtureMiss, "no replay fixture for request " + key), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace bizplan
