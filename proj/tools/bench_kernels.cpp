// Compares the OpenMP kernels against the serial reference implementations
// and reports timings plus the largest deviation between the two paths.
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "hmlet/analysis.hpp"
#include "hmlet/csr.hpp"
#include "hmlet/dense.hpp"
#include "hmlet/rng.hpp"

using namespace hmlet;

namespace {

Csr random_symmetric(std::size_t n, std::size_t avg_degree, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::pair<std::int32_t, double>>> rows(n);
    const std::size_t edges = n * avg_degree / 2;
    for (std::size_t e = 0; e < edges; ++e) {
        const auto a = static_cast<std::int32_t>(rng.next_below(n));
        const auto b = static_cast<std::int32_t>(rng.next_below(n));
        if (a == b) continue;
        const double w = rng.next_double();
        rows[a].emplace_back(b, w);
        rows[b].emplace_back(a, w);
    }
    Csr m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
        m.row_ptr[r + 1] = m.row_ptr[r] + static_cast<std::int64_t>(rows[r].size());
    }
    m.col_idx.resize(m.row_ptr.back());
    m.values.resize(m.row_ptr.back());
    for (std::size_t r = 0; r < n; ++r) {
        std::int64_t k = m.row_ptr[r];
        for (auto& [c, w] : rows[r]) {
            m.col_idx[k] = c;
            m.values[k] = w;
            ++k;
        }
    }
    return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace

int main(int argc, char** argv) {
    std::size_t n = 20000;
    std::size_t dim = 64;
    std::size_t avg_degree = 30;
    int reps = 5;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        const std::string val = argv[i + 1];
        if (flag == "--n") n = std::stoul(val);
        else if (flag == "--dim") dim = std::stoul(val);
        else if (flag == "--degree") avg_degree = std::stoul(val);
        else if (flag == "--reps") reps = std::stoi(val);
        else if (flag == "--threads") omp_set_num_threads(std::stoi(val));
    }

    std::printf("kernel benchmark: n=%zu dim=%zu avg_degree=%zu reps=%d threads=%d\n", n, dim,
                avg_degree, reps, omp_get_max_threads());

    const Csr adj = random_symmetric(n, avg_degree, 1);
    Rng rng(2);
    DenseMatrix x(n, dim);
    for (auto& v : x.data) v = rng.next_double() - 0.5;

    DenseMatrix out_par(n, dim), out_ser(n, dim);
    double t_par = 0.0, t_ser = 0.0;
    for (int r = 0; r < reps; ++r) {
        double t0 = omp_get_wtime();
        spmm(adj, x, out_par);
        t_par += omp_get_wtime() - t0;

        t0 = omp_get_wtime();
        spmm_serial(adj, x, out_ser);
        t_ser += omp_get_wtime() - t0;
    }
    std::printf("spmm       nnz=%zu   omp %.1f ms   serial %.1f ms   speedup %.2fx   max|diff| %.3g\n",
                adj.nnz(), 1000.0 * t_par / reps, 1000.0 * t_ser / reps, t_ser / t_par,
                max_abs_diff(out_par.data, out_ser.data));

    // Elementwise activation.
    double t0 = omp_get_wtime();
    const DenseMatrix act = activation(out_par, Activation::Elu);
    const double t_act = omp_get_wtime() - t0;
    DenseMatrix act_ser(n, dim);
    t0 = omp_get_wtime();
    for (std::size_t i = 0; i < out_par.data.size(); ++i) {
        act_ser.data[i] = activate(out_par.data[i], Activation::Elu);
    }
    const double t_act_ser = omp_get_wtime() - t0;
    std::printf("activation elu       omp %.1f ms   serial %.1f ms   speedup %.2fx   max|diff| %.3g\n",
                1000.0 * t_act, 1000.0 * t_act_ser, t_act_ser / t_act,
                max_abs_diff(act.data, act_ser.data));

    // BFS-based closeness on a smaller instance (per-source parallel).
    const std::size_t cn = std::min<std::size_t>(n, 2000);
    NeighborLists lists(cn);
    {
        const Csr small = random_symmetric(cn, 8, 3);
        for (std::size_t r = 0; r < cn; ++r) {
            for (std::int64_t k = small.row_ptr[r]; k < small.row_ptr[r + 1]; ++k) {
                lists[r].push_back(small.col_idx[k]);
            }
        }
    }
    t0 = omp_get_wtime();
    const auto cls = closeness(lists);
    std::printf("closeness  n=%zu     %.1f ms (parallel over sources)\n", cn,
                1000.0 * (omp_get_wtime() - t0));

    (void)cls;
    return 0;
}
