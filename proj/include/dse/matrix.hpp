#pragma once

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

namespace dse {

/// Dense row-major matrix of doubles; rows are the per-word vectors.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<double> row(std::size_t i) {
        assert(i < rows_);
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const double> row(std::size_t i) const {
        assert(i < rows_);
        return {data_.data() + i * cols_, cols_};
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    // Four independent partial sums; the summation order is fixed, so results
    // are still reproducible.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
    // v * 0 is NaN exactly when v is infinite or NaN.
    double probe = 0.0;
    for (double v : a) probe += v * 0.0;
    return probe == 0.0;
}

}  // namespace dse
