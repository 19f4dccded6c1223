#pragma once

#include <map>
#include <string>
#include <vector>

#include "hysmc/model.hpp"

namespace hysmc {

enum class Severity { Error, Warning };

/// One finding. `code` is a stable identifier such as UNDECLARED_VAR;
/// `element` names the offending part, e.g. "Robot.edge[2].guard".
struct Issue {
  Severity severity = Severity::Error;
  std::string code;
  std::string element;
  std::string message;
  SourcePos pos;
  SourcePos other_pos;  ///< second position for duplicates

  bool operator==(const Issue& o) const {
    return severity == o.severity && code == o.code && element == o.element &&
           message == o.message && pos.line == o.pos.line && pos.column == o.pos.column &&
           other_pos.line == o.other_pos.line && other_pos.column == o.other_pos.column;
  }
};

struct ValidationReport {
  std::vector<Issue> issues;

  std::vector<Issue> errors() const;
  std::vector<Issue> warnings() const;
  bool ok() const;
  bool has(const std::string& code) const;
  std::string to_string() const;

  bool operator==(const ValidationReport&) const = default;
};

/// Structural well-formedness check. Pure; never throws.
ValidationReport validate_network(const NetworkModel& model);

/// Thrown when an operation requires a valid model and gets an invalid one.
class ModelError : public Error {
 public:
  explicit ModelError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Throws ModelError when the report has errors.
void require_valid(const NetworkModel& model);

struct EdgeRef {
  std::string automaton;
  int edge = 0;

  bool operator==(const EdgeRef&) const = default;
};

struct SyncBucket {
  std::vector<EdgeRef> emitters;
  std::vector<EdgeRef> receivers;
};

/// Channel -> emitting and receiving edges, ordered by automaton name then edge index.
std::map<std::string, SyncBucket> sync_table(const NetworkModel& model);

}  // namespace hysmc
