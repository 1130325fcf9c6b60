#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpr {

/// Root of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class DuplicateIdError : public Error { using Error::Error; };
class ZeroNormError : public Error { using Error::Error; };
class EmptyIndexError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class EmptyDatasetError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class EmptyRetrievalError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class EmptyLabelSetError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };

/// Malformed record in a line-delimited file. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Gateway failures. Anything thrown by a backend derives from GatewayError.
class GatewayError : public Error { using Error::Error; };
class GatewayUnavailable : public GatewayError { using GatewayError::GatewayError; };
class ImageNotFound : public GatewayError { using GatewayError::GatewayError; };
class MockParseError : public GatewayError { using GatewayError::GatewayError; };

}  // namespace mpr
