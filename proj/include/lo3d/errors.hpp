#pragma once

#include <stdexcept>
#include <string>

namespace lo3d {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError/ParseError -> 2, DataError/FormatError -> 3,
// TrainingError/SamplerDivergence -> 4.

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplerDivergence : public std::runtime_error {
 public:
  SamplerDivergence(int step, const std::string& what)
      : std::runtime_error("sampler diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout problems (magic, version, truncation).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& token, const std::string& what)
      : ConfigError(what + " (at token \"" + token + "\")"), token_(token) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

}  // namespace lo3d
