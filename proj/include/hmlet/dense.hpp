#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hmlet {

// Row-major dense matrix of 64-bit floats.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    void zero();
};

enum class Activation {
    LeakyRelu, // negative slope 0.01
    Elu,       // alpha 1.0
};

double activate(double x, Activation kind);
// Derivative; at x == 0 both kinds use the right-hand value 1.
double activate_grad(double x, Activation kind);

// Elementwise phi(x).
DenseMatrix activation(const DenseMatrix& x, Activation kind);
// Elementwise phi'(x).
DenseMatrix activation_grad(const DenseMatrix& x, Activation kind);

// Numerically stable softmax (max-subtracted), out[i] = exp(v[i]-m)/sum.
void softmax(std::span<const double> v, std::span<double> out);
std::vector<double> softmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

} // namespace hmlet
