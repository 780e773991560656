#pragma once

#include <cstddef>
#include <vector>

namespace edulstm {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit floats: data[r * cols + c] is element (r, c).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool operator==(const Matrix& o) const = default;
};

Matrix identity(std::size_t n);

Vector matvec(const Matrix& m, const Vector& v);   // m * v
Vector tmatvec(const Matrix& m, const Vector& v);  // transpose(m) * v

// Order-preserving concatenation; empty parts allowed, the list must not be.
Vector concat(const std::vector<Vector>& parts);

// Input clamped to [-500, 500] before exponentiation so the output is always
// finite; beyond the clamp the result saturates to exactly 0 or 1.
double sigmoid(double x);
Vector sigmoid(const Vector& v);
Vector tanh(const Vector& v);

Vector hadamard(const Vector& a, const Vector& b);
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector axpy(double s, const Vector& a, const Vector& b);  // s * a + b
Matrix outer(const Vector& a, const Vector& b);           // a * transpose(b)
double dot(const Vector& a, const Vector& b);

}  // namespace edulstm
