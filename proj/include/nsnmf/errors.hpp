#pragma once

#include <stdexcept>
#include <string>

namespace nsnmf {

/// Base of every error thrown by the library. `kind()` selects the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Kind { config = 2, data = 3, divergence = 4, io = 5, numeric = 6, index = 7 };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Kind::config, what) {}
};

/// Malformed input, duplicate ratings, empty datasets.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(Kind::data, what) {}
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateRatingError : public DataError {
public:
    using DataError::DataError;
};

class EmptyDatasetError : public DataError {
public:
    using DataError::DataError;
};

/// A gradient or parameter became non-finite. `where()` names the parameter.
class DivergenceError : public Error {
public:
    DivergenceError(std::string where, const std::string& what)
        : Error(Kind::divergence, what + " (" + where + ")"), where_(std::move(where)) {}

    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Kind::io, what) {}
};

class NumericDomainError : public Error {
public:
    explicit NumericDomainError(const std::string& what) : Error(Kind::numeric, what) {}
};

class IndexError : public Error {
public:
    explicit IndexError(const std::string& what) : Error(Kind::index, what) {}
};

}  // namespace nsnmf
