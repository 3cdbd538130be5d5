#pragma once

// Deterministic CSV emission: '.' decimal separator, locale-free,
// shortest round-trip formatting so identical runs produce identical
// bytes.

#include <fstream>
#include <string>
#include <vector>

namespace ksent {

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);

  void row(const std::vector<double>& values);
  void row_mixed(const std::vector<std::string>& cells);
  bool good() const { return out_.good(); }

  static std::string format(double v);

 private:
  std::ofstream out_;
  size_t n_cols_;
};

}  // namespace ksent
