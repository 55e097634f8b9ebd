// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

namespace espada {

/// Dense row-major matrix of doubles. Row t = one frame's feature vector.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    std::span<double> row(int r) {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }

    bool operator==(const Matrix& other) const {
        return rows == other.rows && cols == other.cols && data == other.data;
    }
};

/// Euclidean distance between row i of a and row j of b. Columns must match.
inline double row_distance(const Matrix& a, int i, const Matrix& b, int j) {
    assert(a.cols == b.cols);
    const double* pa = a.data.data() + static_cast<size_t>(i) * a.cols;
    const double* pb = b.data.data() + static_cast<size_t>(j) * b.cols;
    double acc = 0.0;
    for (int c = 0; c < a.cols; ++c) {
        const double d = pa[c] - pb[c];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

} // namespace espada
