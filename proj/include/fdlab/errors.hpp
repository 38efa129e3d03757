#pragma once

#include <stdexcept>
#include <string>

namespace fdlab {

// Argument outside the domain of an operation (code ranges, aliasing, short signals).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Two operands whose sizes or grids must agree do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(const std::string& what, double condition_estimate)
      : std::runtime_error(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
        condition_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_; }

 private:
  double condition_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A code or value rejected because it lies outside [min, max].
class RangeError : public DomainError {
 public:
  RangeError(std::string field, long long value, long long min, long long max)
      : DomainError(field + "=" + std::to_string(value) + " outside [" + std::to_string(min) + ", " +
                    std::to_string(max) + "]"),
        field_(std::move(field)),
        value_(value),
        min_(min),
        max_(max) {}

  const std::string& field() const noexcept { return field_; }
  long long value() const noexcept { return value_; }
  long long min() const noexcept { return min_; }
  long long max() const noexcept { return max_; }

 private:
  std::string field_;
  long long value_;
  long long min_;
  long long max_;
};

inline void check_range(const std::string& field, long long value, long long min, long long max) {
  if (value < min || value > max) throw RangeError(field, value, min, max);
}

}  // namespace fdlab
