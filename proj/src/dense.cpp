#include "hmlet/dense.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>

namespace hmlet {

void DenseMatrix::zero() {
    std::memset(data.data(), 0, data.size() * sizeof(double));
}

double activate(double x, Activation kind) {
    switch (kind) {
        case Activation::LeakyRelu:
            return x >= 0.0 ? x : 0.01 * x;
        case Activation::Elu:
            return x >= 0.0 ? x : std::expm1(x);
    }
    return x;
}

double activate_grad(double x, Activation kind) {
    switch (kind) {
        case Activation::LeakyRelu:
            return x >= 0.0 ? 1.0 : 0.01;
        case Activation::Elu:
            return x >= 0.0 ? 1.0 : std::exp(x);
    }
    return 1.0;
}

DenseMatrix activation(const DenseMatrix& x, Activation kind) {
    DenseMatrix out(x.rows, x.cols);
    const std::size_t n = x.data.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = activate(x.data[i], kind);
    }
    return out;
}

DenseMatrix activation_grad(const DenseMatrix& x, Activation kind) {
    DenseMatrix out(x.rows, x.cols);
    const std::size_t n = x.data.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = activate_grad(x.data[i], kind);
    }
    return out;
}

void softmax(std::span<const double> v, std::span<double> out) {
    assert(v.size() == out.size() && !v.empty());
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (auto& o : out) o /= sum;
}

std::vector<double> softmax(std::span<const double> v) {
    std::vector<double> out(v.size());
    softmax(v, out);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace hmlet
