#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "divide/errors.hpp"

namespace divide {

/// Dense row-major matrix of doubles. The only tensor type in the project;
/// vectors are 1xN or Nx1 as convenient.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Throws NumericError if any entry is NaN/Inf. `what` names the offender.
void check_finite(const Matrix& m, const char* what);

/// Row-wise softmax of S / tau, stabilized by per-row max subtraction.
Matrix row_softmax(const Matrix& s, double tau);

/// M^t by exponentiation-by-squaring; t = 0 yields the identity.
Matrix matrix_power(const Matrix& m, unsigned t);

/// Cosine similarity of every row of A against every row of B.
Matrix pairwise_cosine(const Matrix& a, const Matrix& b);

/// Squared Euclidean distance of every row of A against every row of B,
/// clamped at zero to absorb rounding.
Matrix pairwise_sq_euclidean(const Matrix& a, const Matrix& b);

/// Rows scaled to unit L2 norm. Zero-norm rows are a DataError.
Matrix l2_normalize_rows(const Matrix& z);

/// Columns of b appended to a (row counts must match).
Matrix hconcat(const Matrix& a, const Matrix& b);

}  // namespace divide
