#include "hmlet/csr.hpp"

#include <stdexcept>

namespace hmlet {

void spmm(const Csr& adj, const DenseMatrix& x, DenseMatrix& out) {
    if (adj.n != x.rows) {
        throw std::invalid_argument("spmm: adjacency is " + std::to_string(adj.n) +
                                    " nodes but input has " + std::to_string(x.rows) + " rows");
    }
    if (out.rows != adj.n || out.cols != x.cols) out = DenseMatrix(adj.n, x.cols);
    const std::size_t d = x.cols;
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < adj.n; ++r) {
        double* o = out.row(r);
        for (std::size_t c = 0; c < d; ++c) o[c] = 0.0;
        for (std::int64_t k = adj.row_ptr[r]; k < adj.row_ptr[r + 1]; ++k) {
            const double w = adj.values[k];
            const double* xr = x.row(adj.col_idx[k]);
            for (std::size_t c = 0; c < d; ++c) o[c] += w * xr[c];
        }
    }
}

DenseMatrix spmm(const Csr& adj, const DenseMatrix& x) {
    DenseMatrix out(adj.n, x.cols);
    spmm(adj, x, out);
    return out;
}

void spmm_serial(const Csr& adj, const DenseMatrix& x, DenseMatrix& out) {
    if (adj.n != x.rows) {
        throw std::invalid_argument("spmm_serial: dimension mismatch");
    }
    if (out.rows != adj.n || out.cols != x.cols) out = DenseMatrix(adj.n, x.cols);
    const std::size_t d = x.cols;
    for (std::size_t r = 0; r < adj.n; ++r) {
        double* o = out.row(r);
        for (std::size_t c = 0; c < d; ++c) o[c] = 0.0;
        for (std::int64_t k = adj.row_ptr[r]; k < adj.row_ptr[r + 1]; ++k) {
            const double w = adj.values[k];
            const double* xr = x.row(adj.col_idx[k]);
            for (std::size_t c = 0; c < d; ++c) o[c] += w * xr[c];
        }
    }
}

} // namespace hmlet
