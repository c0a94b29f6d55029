#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include "lmg/spin_algebra.hpp"

namespace lmg {

// Full round-trip representation of a double (17 significant digits), so
// byte-identity of output files is meaningful.
std::string format_g17(double v);

// Minimal CSV sink: "#"-prefixed comment lines, one header line, numeric
// rows at full precision.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void comment(const std::string& line);
  void header(const std::string& columns);
  void row(std::initializer_list<double> values);
  void raw_row(const std::string& line);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

// Debug dump of an operator in the Dicke basis, row-major.
void write_matrix_csv(std::ostream& out, const Matrix& m);

}  // namespace lmg
