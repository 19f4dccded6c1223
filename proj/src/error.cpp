#include "hysmc/error.hpp"

#include <fmt/format.h>

namespace hysmc {

std::string to_string(SourcePos pos) {
  if (!pos.known()) return "?";
  return fmt::format("{}:{}", pos.line, pos.column);
}

namespace {

std::string format_parse_error(SourcePos pos, const std::string& message,
                               const std::vector<std::string>& expected) {
  std::string out = fmt::format("{}: {}", to_string(pos), message);
  if (!expected.empty()) {
    out += " (expected ";
    for (size_t i = 0; i < expected.size(); ++i) {
      if (i > 0) out += i + 1 == expected.size() ? " or " : ", ";
      out += expected[i];
    }
    out += ")";
  }
  return out;
}

}  // namespace

ParseError::ParseError(SourcePos pos, const std::string& message,
                       std::vector<std::string> expected)
    : Error(format_parse_error(pos, message, expected)),
      pos_(pos),
      detail_(message),
      expected_(std::move(expected)) {}

}  // namespace hysmc
