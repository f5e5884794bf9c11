#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hmlet/dense.hpp"

namespace hmlet {

// Sparse matrix in compressed-sparse-row form over the combined node set
// (users occupy rows 0..num_users-1, items the rest). Weights carry the
// symmetric normalization 1/sqrt(|N_u|*|N_v|); the matrix is structurally
// symmetric, so forward and backward propagation reuse the same object.
struct Csr {
    std::size_t n = 0;
    std::vector<std::int64_t> row_ptr; // length n+1
    std::vector<std::int32_t> col_idx;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }
};

// out = adj * x, row-parallel. Each output row is an independent
// accumulation, so the result is bit-identical at any thread count.
void spmm(const Csr& adj, const DenseMatrix& x, DenseMatrix& out);
DenseMatrix spmm(const Csr& adj, const DenseMatrix& x);

// Plain single-threaded reference, kept for tests and the kernel benchmark.
void spmm_serial(const Csr& adj, const DenseMatrix& x, DenseMatrix& out);

} // namespace hmlet
