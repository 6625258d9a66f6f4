#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kaas {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ReferenceError : public Error {
public:
    ReferenceError(const std::string& what, std::string missing_id)
        : Error(what + " '" + missing_id + "'"), missing_id_(std::move(missing_id)) {}

    const std::string& missing_id() const noexcept { return missing_id_; }

private:
    std::string missing_id_;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace kaas
