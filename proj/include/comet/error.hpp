#pragma once

#include <stdexcept>
#include <string>

namespace comet {

// Base of every error the library raises. Subclasses let callers (the CLI in
// particular) map failures onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KbError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  enum class Kind { Lexical, UnknownMnemonic, InvalidOperands, EmptyBlock, Dataset };

  ParseError(Kind kind, int line, int column, const std::string& what)
      : Error(format(line, column, what)), kind_(kind), line_(line), column_(column) {}

  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(int line, int column, const std::string& what) {
    if (line <= 0) return what;
    std::string loc = "line " + std::to_string(line);
    if (column > 0) loc += ", column " + std::to_string(column);
    return loc + ": " + what;
  }

  Kind kind_;
  int line_;
  int column_;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class PreservationError : public Error {
 public:
  using Error::Error;
};

class SpaceLimitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace comet
