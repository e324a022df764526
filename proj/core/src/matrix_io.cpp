#include "gradorth/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gradorth/error.hpp"

namespace gradorth {

namespace {

template <typename UInt>
void put_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError(std::string("GOMX: truncated ") + what);
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delimiter)) fields.push_back(field);
  if (!line.empty() && line.back() == delimiter) fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t gomx_encoded_size(const Matrix& m) { return 4 + 4 + 8 + 8 + 8 * m.size(); }

void write_gomx(std::ostream& out, const Matrix& m) {
  out.write(kGomxMagic, 4);
  put_le<std::uint32_t>(out, kGomxVersion);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (double v : m.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw FormatError("GOMX: write failed");
}

Matrix read_gomx(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kGomxMagic, 4) != 0) throw FormatError("GOMX: bad magic");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kGomxVersion) {
    throw FormatError("GOMX: unsupported version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint64_t>(in, "rows");
  const auto cols = get_le<std::uint64_t>(in, "cols");
  if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / 8 / cols) {
    throw FormatError("GOMX: implausible shape");
  }
  std::vector<double> data(rows * cols);
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
  return Matrix(rows, cols, std::move(data));
}

void save_gomx(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_gomx(out, m);
}

Matrix load_gomx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_gomx(in);
}

Matrix read_csv_matrix(std::istream& in, const CsvOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  bool header_pending = options.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_fields(line, options.delimiter);
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(cols) + " fields, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      try {
        data.push_back(parse_double(trim(f)));
      } catch (const Error&) {
        throw FormatError("CSV line " + std::to_string(line_no) + ": bad number '" + f + "'");
      }
    }
  }
  const std::size_t rows = cols == 0 ? 0 : data.size() / cols;
  return Matrix(rows, cols, std::move(data));
}

Matrix load_csv_matrix(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_csv_matrix(in, options);
}

void write_csv_matrix(std::ostream& out, const Matrix& m, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "inf" || text == "+inf" || text == "Inf" || text == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  if (text == "-inf" || text == "-Inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || first == last) {
    throw FormatError("not a number: '" + text + "'");
  }
  return value;
}

}  // namespace gradorth
