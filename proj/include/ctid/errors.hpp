#pragma once

#include <stdexcept>
#include <string>

namespace ctid {

/// The requested decomposition or realization needs a structure this library
/// does not model (repeated poles, poles at the origin in a partial fraction).
class UnsupportedStructure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A normal-equation matrix was numerically singular.
class SingularSystem : public std::runtime_error {
 public:
  SingularSystem(const std::string& what, double condition_number)
      : std::runtime_error(what), condition_number_(condition_number) {}
  [[nodiscard]] double condition_number() const { return condition_number_; }

 private:
  double condition_number_;
};

/// The estimator's internal signals left the representable range.
class EstimatorDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctid
