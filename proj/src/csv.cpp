#include "ctid/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace ctid::csv {

std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::vector<std::string> parameter_names(std::span<const SubmodelSpec> specs, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    for (int j = 1; j <= specs[i].n; ++j) out.push_back(prefix + "a" + idx + "_" + std::to_string(j));
    for (int j = 0; j <= specs[i].m; ++j) out.push_back(prefix + "b" + idx + "_" + std::to_string(j));
  }
  return out;
}

Writer::Writer(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
  if (header.empty()) throw std::invalid_argument("csv::Writer: empty header");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].find_first_of(",\n\"") != std::string::npos) {
      throw std::invalid_argument("csv::Writer: column name needs quoting: " + header[i]);
    }
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void Writer::row(std::span<const double> values) {
  if (values.size() != columns_) throw std::invalid_argument("csv::Writer: row width does not match the header");
  line_.clear();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line_ += ',';
    line_ += format(values[i]);
  }
  line_ += '\n';
  out_ << line_;
}

}  // namespace ctid::csv
