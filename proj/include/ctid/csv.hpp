#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ctid/model.hpp"

namespace ctid::csv {

/// Shortest decimal form that reads back to the same double ('.' decimal
/// point regardless of locale). Non-finite values print as nan, inf, -inf.
std::string format(double v);

/// Column names for a parameter vector laid out like beta, e.g. a1_1, a1_2,
/// b1_0 for the first second-order submodel, each prefixed with `prefix`.
std::vector<std::string> parameter_names(std::span<const SubmodelSpec> specs, const std::string& prefix = "");

/// Comma-separated rows with a header and LF line endings.
class Writer {
 public:
  Writer(std::ostream& out, std::vector<std::string> header);

  void row(std::span<const double> values);
  [[nodiscard]] std::size_t columns() const { return columns_; }

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::string line_;
};

}  // namespace ctid::csv
