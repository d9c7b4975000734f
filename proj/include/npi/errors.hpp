#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace npi {

/// Parameter outside its mathematical domain (non-positive mean, R <= 0, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mismatched dimensions between grids, panels or parameter blocks.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An NPI has an empty active set, so its effect cannot be estimated.
class IdentifiabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative routine stopped at its iteration cap. Carries the last iterate.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, std::vector<double> last)
      : std::runtime_error(what), last_iterate(std::move(last)) {}
  std::vector<double> last_iterate;
};

/// Countries cannot be split into the requested number of folds.
class PartitionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Statistic requested on data that cannot support it (single chain R-hat,
/// empty heldout set, mixed effectiveness units).
class UnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace npi
