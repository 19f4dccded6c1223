#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hysmc {

/// 1-based line/column into a source text; line 0 means unknown.
struct SourcePos {
  int line = 0;
  int column = 0;

  bool known() const { return line > 0; }
};

std::string to_string(SourcePos pos);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax error with position and the set of tokens that would have been accepted.
class ParseError : public Error {
 public:
  ParseError(SourcePos pos, const std::string& message,
             std::vector<std::string> expected = {});

  SourcePos pos() const { return pos_; }
  const std::string& detail() const { return detail_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  SourcePos pos_;
  std::string detail_;
  std::vector<std::string> expected_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that refers to things that do not exist. `code` is a
/// stable identifier such as UNKNOWN_LOCATION.
class SemanticError : public Error {
 public:
  SemanticError(std::string code, const std::string& message)
      : Error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Violated precondition of a public operation (bad options, bad parameters).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace hysmc
