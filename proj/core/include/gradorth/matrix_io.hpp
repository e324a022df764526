#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gradorth/matrix.hpp"

namespace gradorth {

// GOMX binary layout: "GOMX", u32 version (= 1), u64 rows, u64 cols, then
// rows * cols f64 values in row-major order. All integers and floats are little-endian.
inline constexpr char kGomxMagic[4] = {'G', 'O', 'M', 'X'};
inline constexpr std::uint32_t kGomxVersion = 1;

std::size_t gomx_encoded_size(const Matrix& m);
void write_gomx(std::ostream& out, const Matrix& m);
Matrix read_gomx(std::istream& in);
void save_gomx(const std::filesystem::path& path, const Matrix& m);
Matrix load_gomx(const std::filesystem::path& path);

struct CsvOptions {
  bool has_header = false;
  char delimiter = ',';
};

// Every row must have the same number of fields; fields parse as doubles.
Matrix read_csv_matrix(std::istream& in, const CsvOptions& options = {});
Matrix load_csv_matrix(const std::filesystem::path& path, const CsvOptions& options = {});
void write_csv_matrix(std::ostream& out, const Matrix& m, const std::vector<std::string>& header = {});

// Shortest round-trip decimal representation ("inf" / "-inf" / "nan" for non-finite).
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace gradorth
