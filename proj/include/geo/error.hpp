#pragma once

#include <stdexcept>
#include <string>

namespace geo {

// Base of every domain error. `module()` names the subsystem that raised it so
// the CLI can report "<module>: <message>".
class Error : public std::runtime_error {
public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

class SyntaxError : public Error {
public:
  SyntaxError(int line, int column, const std::string& message)
      : Error("geom_program", "syntax error at " + std::to_string(line) + ":" +
                                  std::to_string(column) + ": " + message),
        line_(line), column_(column), message_(message) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }

private:
  int line_;
  int column_;
  std::string message_;
};

class DuplicateId : public Error {
public:
  DuplicateId(std::string id, int line)
      : Error("geom_program", "duplicate id '" + id + "' at line " + std::to_string(line)),
        id_(std::move(id)), line_(line) {}

  const std::string& id() const noexcept { return id_; }
  int line() const noexcept { return line_; }

private:
  std::string id_;
  int line_;
};

class DanglingReference : public Error {
public:
  DanglingReference(std::string id, int line)
      : Error("geom_program",
              "reference to undeclared point '" + id + "' at line " + std::to_string(line)),
        id_(std::move(id)), line_(line) {}

  const std::string& id() const noexcept { return id_; }
  int line() const noexcept { return line_; }

private:
  std::string id_;
  int line_;
};

class RenderFailure : public Error {
public:
  RenderFailure(std::string primitive_id, const std::string& reason)
      : Error("renderer", "cannot render '" + primitive_id + "': " + reason),
        primitive_id_(std::move(primitive_id)) {}

  const std::string& primitive_id() const noexcept { return primitive_id_; }

private:
  std::string primitive_id_;
};

class IoFailure : public Error {
public:
  explicit IoFailure(const std::string& what) : Error("io", what) {}
};

class UnsupportedFormat : public Error {
public:
  explicit UnsupportedFormat(const std::string& what) : Error("io", what) {}
};

class DimensionMismatch : public Error {
public:
  DimensionMismatch(int w1, int h1, int w2, int h2)
      : Error("metrics", "dimension mismatch: " + std::to_string(w1) + "x" + std::to_string(h1) +
                             " vs " + std::to_string(w2) + "x" + std::to_string(h2)) {}
};

class EmptyEdgeSet : public Error {
public:
  enum class Side { First, Second };

  explicit EmptyEdgeSet(Side side)
      : Error("metrics", std::string("empty edge set (") +
                             (side == Side::First ? "first" : "second") + " operand)"),
        side_(side) {}

  Side side() const noexcept { return side_; }

private:
  Side side_;
};

// Failures of the remote agent channel (transport, timeout, credentials).
class AgentError : public Error {
public:
  explicit AgentError(const std::string& what) : Error("agents", what) {}
};

class CredentialMissing : public AgentError {
public:
  explicit CredentialMissing(const std::string& variable)
      : AgentError("credential missing: " + variable + " is not set"), variable_(variable) {}

  const std::string& variable() const noexcept { return variable_; }

private:
  std::string variable_;
};

class TransportError : public AgentError {
public:
  TransportError(int status, const std::string& excerpt)
      : AgentError("transport failure (status " + std::to_string(status) + "): " + excerpt), status_(status),
        excerpt_(excerpt) {}

  int status() const noexcept { return status_; }
  const std::string& excerpt() const noexcept { return excerpt_; }

private:
  int status_;
  std::string excerpt_;
};

class AgentTimeout : public AgentError {
public:
  explicit AgentTimeout(int seconds)
      : AgentError("request timed out after " + std::to_string(seconds) + " s"), seconds_(seconds) {}

  int seconds() const noexcept { return seconds_; }

private:
  int seconds_;
};

class NoProgramFound : public Error {
public:
  NoProgramFound() : Error("agents", "no program found in agent reply") {}
};

class UnknownEntry : public Error {
public:
  explicit UnknownEntry(const std::string& id) : Error("dataset", "unknown manifest entry '" + id + "'") {}
};

class InvalidTransition : public Error {
public:
  InvalidTransition(const std::string& id, const std::string& from, const std::string& to)
      : Error("dataset", "entry '" + id + "' cannot go from " + from + " to " + to) {}
};

}  // namespace geo
