#pragma once

#include <stdexcept>
#include <string>

namespace slidemil {

// Every failure the library reports carries one of these kinds; the CLI maps
// kinds onto its documented exit codes.
enum class ErrorKind {
    Parse,            // malformed input text (names the offending line)
    Validation,       // well-formed input violating a cohort rule
    Config,           // bad experiment/CLI configuration
    Contract,         // caller broke a precondition
    Io,               // filesystem / stream failure
    Format,           // bad magic or container layout
    Truncation,       // stream ended before the declared payload
    Data,             // payload present but unusable (non-finite, missing id)
    Numeric,          // non-finite value produced during computation
    EmptyBag,         // slide with no tissue tiles cannot be encoded
    UndefinedMetric,  // metric has no defined value (single-class AUC)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(ErrorKind::Parse, m) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error(ErrorKind::Validation, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& m) : Error(ErrorKind::Contract, m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error(ErrorKind::Format, m) {}
};
struct TruncationError : Error {
    explicit TruncationError(const std::string& m) : Error(ErrorKind::Truncation, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(ErrorKind::Numeric, m) {}
};
struct EmptyBagError : Error {
    explicit EmptyBagError(const std::string& m) : Error(ErrorKind::EmptyBag, m) {}
};
struct UndefinedMetricError : Error {
    explicit UndefinedMetricError(const std::string& m) : Error(ErrorKind::UndefinedMetric, m) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace slidemil
