#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace boolmrc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input record; line is 1-based, 0 when not line oriented.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or similar numerical breakdown during optimisation.
class TrainingError : public Error {
public:
    using Error::Error;
};

// A remote component could not be reached or answered garbage.
class PeerError : public Error {
public:
    using Error::Error;
};

// A pipeline stage (qtype, extract, normalize, boolean) failed. peer_failure
// marks a stage delegated to an unreachable remote component.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& what, bool peer_failure = false)
        : Error(stage + ": " + what), stage_(std::move(stage)), peer_failure_(peer_failure) {}
    const std::string& stage() const noexcept { return stage_; }
    bool peer_failure() const noexcept { return peer_failure_; }

private:
    std::string stage_;
    bool peer_failure_;
};

}  // namespace boolmrc
