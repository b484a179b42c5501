#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bacon {

// Shape or content of an argument does not match what the operation expects.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Result would not fit (integer overflow, expansion size guard).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class UnsupportedResolution : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class InvalidMesh : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace bacon
