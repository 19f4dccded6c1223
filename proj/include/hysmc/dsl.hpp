#pragma once

#include <string>
#include <string_view>

#include "hysmc/model.hpp"
#include "hysmc/validate.hpp"

namespace hysmc {

struct ExpressionOptions {
  /// Identifier parsed as the local clock instead of a variable.
  std::string clock_name;
  /// Accept `Automaton.location` atoms (properties only).
  bool allow_location_atoms = false;
};

/// Parses one expression. Throws ParseError with position and expected tokens.
Expr parse_expression(std::string_view text, const ExpressionOptions& options = {});

/// Parses a network description. Syntax errors throw ParseError; a
/// syntactically valid model with semantic errors throws ModelError carrying
/// the validation report (with source positions). Warnings are not fatal.
NetworkModel parse_model(std::string_view text);

/// Canonical text form; parse_model(pretty_print(m)) == m.
std::string pretty_print(const NetworkModel& model);

}  // namespace hysmc
