#include "divide/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace divide {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix initializer rows have unequal lengths");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (!same_shape(o)) throw ShapeError("Matrix += shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (!same_shape(o)) throw ShapeError("Matrix -= shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix c(a.rows(), b.cols());
    // ikj order keeps the inner loop contiguous.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row_ptr(i);
        const double* ai = a.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void check_finite(const Matrix& m, const char* what) {
    for (double x : m.data())
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite entry in ") + what);
}

Matrix row_softmax(const Matrix& s, double tau) {
    if (!(tau > 0.0)) throw InvalidParameterError("row_softmax: tau must be positive");
    check_finite(s, "row_softmax input");
    Matrix p(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const double* si = s.row_ptr(i);
        double* pi = p.row_ptr(i);
        double mx = si[0];
        for (std::size_t j = 1; j < s.cols(); ++j) mx = std::max(mx, si[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < s.cols(); ++j) {
            pi[j] = std::exp((si[j] - mx) / tau);
            sum += pi[j];
        }
        for (std::size_t j = 0; j < s.cols(); ++j) pi[j] /= sum;
    }
    return p;
}

Matrix matrix_power(const Matrix& m, unsigned t) {
    if (m.rows() != m.cols()) throw ShapeError("matrix_power: matrix must be square");
    Matrix result = Matrix::identity(m.rows());
    Matrix base = m;
    while (t > 0) {
        if (t & 1u) result = matmul(result, base);
        t >>= 1u;
        if (t > 0) base = matmul(base, base);
    }
    check_finite(result, "matrix_power result");
    return result;
}

Matrix pairwise_cosine(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("pairwise_cosine: feature dims differ");
    auto norms = [](const Matrix& m, const char* side) {
        std::vector<double> out(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double s = 0.0;
            const double* ri = m.row_ptr(i);
            for (std::size_t j = 0; j < m.cols(); ++j) s += ri[j] * ri[j];
            if (s <= 0.0)
                throw DataError(std::string("pairwise_cosine: zero-norm row in ") + side);
            out[i] = std::sqrt(s);
        }
        return out;
    };
    const auto na = norms(a, "lhs");
    const auto nb = norms(b, "rhs");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row_ptr(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) dot += ai[k] * bj[k];
            c(i, j) = std::clamp(dot / (na[i] * nb[j]), -1.0, 1.0);
        }
    }
    return c;
}

Matrix pairwise_sq_euclidean(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("pairwise_sq_euclidean: feature dims differ");
    Matrix d(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                const double diff = ai[k] - bj[k];
                s += diff * diff;
            }
            d(i, j) = std::max(s, 0.0);
        }
    }
    check_finite(d, "pairwise_sq_euclidean result");
    return d;
}

Matrix l2_normalize_rows(const Matrix& z) {
    Matrix out = z;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double s = 0.0;
        const double* ri = z.row_ptr(i);
        for (std::size_t j = 0; j < z.cols(); ++j) s += ri[j] * ri[j];
        if (s <= 0.0) throw DataError("l2_normalize_rows: zero-norm row");
        const double inv = 1.0 / std::sqrt(s);
        double* oi = out.row_ptr(i);
        for (std::size_t j = 0; j < z.cols(); ++j) oi[j] *= inv;
    }
    return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("hconcat: row counts differ");
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* oi = out.row_ptr(i);
        std::copy(a.row_ptr(i), a.row_ptr(i) + a.cols(), oi);
        std::copy(b.row_ptr(i), b.row_ptr(i) + b.cols(), oi + a.cols());
    }
    return out;
}

}  // namespace divide
