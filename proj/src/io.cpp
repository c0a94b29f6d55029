#include "lmg/io.hpp"

#include <cstdio>

#include "lmg/errors.hpp"

namespace lmg {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) : path_(path), out_(path) {
  if (!out_) throw ConfigError("cannot open output file: " + path);
}

void CsvWriter::comment(const std::string& line) { out_ << "# " << line << "\n"; }

void CsvWriter::header(const std::string& columns) { out_ << columns << "\n"; }

void CsvWriter::row(std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out_ << ',';
    out_ << format_g17(v);
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n"; }

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  out << "# dicke basis, m descending\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_g17(m(i, j).real());
      if (m(i, j).imag() != 0.0) {
        out << (m(i, j).imag() > 0 ? "+" : "") << format_g17(m(i, j).imag()) << "i";
      }
    }
    out << '\n';
  }
}

}  // namespace lmg
