#pragma once

#include <stdexcept>
#include <string>

namespace basket {

// Design matrix is rank deficient or a full-conditional covariance factorisation failed.
class SingularDesignError : public std::runtime_error {
  public:
    explicit SingularDesignError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf in input data.
class InvalidDataError : public std::invalid_argument {
  public:
    explicit InvalidDataError(const std::string& what) : std::invalid_argument(what) {}
};

// Operation called on an object that cannot serve it (e.g. empty draws).
class InvalidStateError : public std::logic_error {
  public:
    explicit InvalidStateError(const std::string& what) : std::logic_error(what) {}
};

// Malformed input file; carries the offending line number when known.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, long line)
        : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

  private:
    long line_;
};

}  // namespace basket
