#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gradorth {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
//
// Constructing from explicit data rejects non-finite entries; element access
// through operator() is unchecked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  // n x 1 matrix holding v.
  static Matrix column_vector(std::span<const double> v);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  Vector column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  Matrix transposed() const;
  // First `count` columns.
  Matrix leading_columns(std::size_t count) const;
  bool all_finite() const noexcept;

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_transposed_lhs(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_transposed_rhs(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
// a^T * x.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

Matrix outer(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double frobenius_norm(const Matrix& a);
double frobenius_norm_squared(const Matrix& a);

}  // namespace gradorth
