#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vmtag {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string reason)
      : Error("line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(std::move(reason)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class UnresolvedLabel : public Error {
 public:
  UnresolvedLabel(std::string function, std::string label)
      : Error("function @" + function + ": branch to undefined label %" + label),
        function_(std::move(function)),
        label_(std::move(label)) {}

  const std::string& function() const noexcept { return function_; }
  const std::string& label() const noexcept { return label_; }

 private:
  std::string function_;
  std::string label_;
};

class DuplicateLabel : public Error {
 public:
  DuplicateLabel(std::string function, std::string label)
      : Error("function @" + function + ": label %" + label + " defined twice"),
        function_(std::move(function)),
        label_(std::move(label)) {}

  const std::string& function() const noexcept { return function_; }
  const std::string& label() const noexcept { return label_; }

 private:
  std::string function_;
  std::string label_;
};

// An `indirectbr` whose destination list is missing or empty. The parser
// refuses to guess the jump-table contents.
class IndirectTargetsUnknown : public Error {
 public:
  IndirectTargetsUnknown(std::string function, std::size_t line)
      : Error("function @" + function + ", line " + std::to_string(line) +
              ": indirectbr without a target list"),
        function_(std::move(function)),
        line_(line) {}

  const std::string& function() const noexcept { return function_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string function_;
  std::size_t line_;
};

class UnknownBlock : public Error {
 public:
  explicit UnknownBlock(std::string label)
      : Error("unknown block %" + label), label_(std::move(label)) {}

  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

class MarkerCollision : public Error {
 public:
  explicit MarkerCollision(std::string name)
      : Error("marker name @" + name + " collides with a module symbol"),
        name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

}  // namespace vmtag
