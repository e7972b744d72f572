#pragma once

#include <stdexcept>
#include <string>

namespace ablate {

// Bad parameters or mismatched shapes.
class value_error : public std::invalid_argument {
 public:
  explicit value_error(const std::string& what) : std::invalid_argument(what) {}
};

// File / stream problems.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Reference-model training did not reach the required accuracy.
class training_error : public std::runtime_error {
 public:
  training_error(const std::string& what, double achieved_accuracy)
      : std::runtime_error(what), achieved_accuracy(achieved_accuracy) {}
  double achieved_accuracy;
};

}  // namespace ablate
