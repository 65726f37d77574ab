#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace morphosys {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A schedule window whose length is not a multiple of the period being checked.
class WindowLengthError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

/// A hyperperiod (or simulation horizon) exceeded the configured slot cap.
class HorizonOverflow : public Error {
public:
    HorizonOverflow(long long needed, long long cap)
        : Error("horizon of " + std::to_string(needed) + " slots exceeds cap of " +
                std::to_string(cap))
        , needed_(needed)
        , cap_(cap) {}

    [[nodiscard]] long long needed() const noexcept { return needed_; }
    [[nodiscard]] long long cap() const noexcept { return cap_; }

private:
    long long needed_;
    long long cap_;
};

/// Malformed input text. `line` is 1-based; 0 means the whole input.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what)
        , line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A stream whose peak demand cannot be served within its own period.
class UndeliverableStream : public Error {
public:
    using Error::Error;
};

/// Colocation efficiency requested against a baseline that wasted nothing.
class UndefinedBaseline : public Error {
public:
    using Error::Error;
};

} // namespace morphosys
