#pragma once

#include <stdexcept>
#include <string>

namespace etr {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input line; carries the file and 1-based line number.
class ParseError : public Error {
  public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

  private:
    std::string file_;
    std::size_t line_;
};

class ReferenceError : public Error { using Error::Error; };
class VocabularyError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class DegenerateQueryError : public Error { using Error::Error; };
class ExhaustionError : public Error {
  public:
    ExhaustionError(const std::string& what, std::size_t achievable)
        : Error(what), achievable_(achievable) {}
    std::size_t achievable() const noexcept { return achievable_; }

  private:
    std::size_t achievable_;
};
class ConfigError : public Error { using Error::Error; };
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string& what, std::size_t epoch) : Error(what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

  private:
    std::size_t epoch_;
};
class InputError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };

// Remote-service failures.
class TransportError : public Error { using Error::Error; };  // retryable / budget exhausted
class RequestError : public Error {                           // non-retryable 4xx
  public:
    RequestError(const std::string& what, int status) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

  private:
    int status_;
};
class ContentError : public Error { using Error::Error; };

}  // namespace etr
