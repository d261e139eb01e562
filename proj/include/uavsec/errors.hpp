#pragma once

#include <stdexcept>
#include <string>

namespace uavsec {

// Operand shapes are incompatible with the requested operation.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function (log of 0, d <= 0, ...).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

// A caller broke an API precondition that is not a shape or domain issue.
class ContractError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

// Inputs for which the quantity is undefined, e.g. normalizing all-zero embeddings.
class DegenerateInputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss or parameters during training.
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace uavsec
