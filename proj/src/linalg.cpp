#include "edulstm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edulstm/errors.hpp"

namespace edulstm {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

void require_same_len(const Vector& a, const Vector& b, const char* op) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(op) + ": vector lengths differ (" +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace

Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size()) {
        throw ShapeError("matvec: matrix " + shape_str(m) + " incompatible with vector of length " +
                         std::to_string(v.size()));
    }
    Vector out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.data.data() + r * m.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

Vector tmatvec(const Matrix& m, const Vector& v) {
    if (m.rows != v.size()) {
        throw ShapeError("tmatvec: matrix " + shape_str(m) + " incompatible with vector of length " +
                         std::to_string(v.size()));
    }
    Vector out(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.data.data() + r * m.cols;
        const double s = v[r];
        for (std::size_t c = 0; c < m.cols; ++c) out[c] += s * row[c];
    }
    return out;
}

Vector concat(const std::vector<Vector>& parts) {
    if (parts.empty()) throw ShapeError("concat: needs at least one part");
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    Vector out;
    out.reserve(total);
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

double sigmoid(double x) {
    if (x <= -500.0) return 0.0;
    if (x >= 500.0) return 1.0;
    return 1.0 / (1.0 + std::exp(-x));
}

Vector sigmoid(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
    return out;
}

Vector tanh(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
    return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
    require_same_len(a, b, "hadamard");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

Vector add(const Vector& a, const Vector& b) {
    require_same_len(a, b, "add");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector sub(const Vector& a, const Vector& b) {
    require_same_len(a, b, "sub");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector axpy(double s, const Vector& a, const Vector& b) {
    require_same_len(a, b, "axpy");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i] + b[i];
    return out;
}

Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double* row = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < b.size(); ++j) row[j] = a[i] * b[j];
    }
    return m;
}

double dot(const Vector& a, const Vector& b) {
    require_same_len(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace edulstm
