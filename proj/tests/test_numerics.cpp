#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hmlet/csr.hpp"
#include "hmlet/dense.hpp"
#include "hmlet/gumbel.hpp"
#include "hmlet/rng.hpp"

using namespace hmlet;

namespace {

Csr random_symmetric_csr(std::size_t n, double density, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::pair<std::int32_t, double>>> rows(n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (rng.next_double() < density) {
                const double w = rng.next_double();
                rows[a].emplace_back(static_cast<std::int32_t>(b), w);
                rows[b].emplace_back(static_cast<std::int32_t>(a), w);
            }
        }
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

} // namespace

TEST_CASE("rng determinism and stream separation") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
    }
    CHECK(a.next_u64() != c.next_u64());
    CHECK(derive_stream(7, "gumbel") != derive_stream(7, "negatives"));
    CHECK(derive_stream(7, "gumbel", 1, 2, 3) != derive_stream(7, "gumbel", 1, 2, 4));
}

TEST_CASE("rng uniform doubles stay inside (0,1)") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_double();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("softmax basics") {
    const auto s = softmax(std::vector<double>{0.0, 0.0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));

    const auto big = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] == doctest::Approx(0.0));

    // Shift invariance.
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(4), w(4);
        const double shift = 10.0 * (rng.next_double() - 0.5);
        for (int i = 0; i < 4; ++i) {
            v[i] = 5.0 * (rng.next_double() - 0.5);
            w[i] = v[i] + shift;
        }
        const auto sv = softmax(v);
        const auto sw = softmax(w);
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(sv[i] - sw[i]) < 1e-12);
            sum += sv[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("activation values and derivatives") {
    CHECK(activate(-1.0, Activation::LeakyRelu) == doctest::Approx(-0.01));
    CHECK(activate(2.0, Activation::LeakyRelu) == doctest::Approx(2.0));
    CHECK(activate(0.0, Activation::Elu) == doctest::Approx(0.0));
    CHECK(activate_grad(0.0, Activation::Elu) == doctest::Approx(1.0));
    CHECK(activate_grad(0.0, Activation::LeakyRelu) == doctest::Approx(1.0));
    CHECK(activate(-2.0, Activation::Elu) == doctest::Approx(std::expm1(-2.0)));

    // Central differences at random nonzero points.
    Rng rng(11);
    const double h = 1e-6;
    for (int t = 0; t < 100; ++t) {
        double x = 6.0 * (rng.next_double() - 0.5);
        if (std::abs(x) < 1e-3) x += 0.01;
        for (auto kind : {Activation::LeakyRelu, Activation::Elu}) {
            const double fd = (activate(x + h, kind) - activate(x - h, kind)) / (2.0 * h);
            CHECK(std::abs(fd - activate_grad(x, kind)) < 1e-6);
        }
    }
}

TEST_CASE("gumbel sampling") {
    // u = 1/e maps to exactly 0; check the transform at that point.
    CHECK(-std::log(-std::log(1.0 / M_E)) == doctest::Approx(0.0).epsilon(1e-12));

    Rng a(5), b(5);
    const auto va = gumbel_sample(a, 1000);
    const auto vb = gumbel_sample(b, 1000);
    CHECK(va == vb);

    // Mean of 1e6 draws approximates the Euler-Mascheroni constant.
    Rng rng(17);
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += gumbel_draw(rng);
    CHECK(std::abs(sum / n - 0.57721566) < 0.01);
}

TEST_CASE("stgs hard one-hot and soft consistency") {
    Rng rng(23);
    for (int t = 0; t < 1000; ++t) {
        const std::array<double, 2> logits = {4.0 * (rng.next_double() - 0.5),
                                              4.0 * (rng.next_double() - 0.5)};
        const double tau = 0.05 + 2.0 * rng.next_double();
        const GateSample s = stgs(logits, tau, rng);
        CHECK(s.hard[0] + s.hard[1] == doctest::Approx(1.0));
        CHECK((s.hard[0] == 1.0 || s.hard[1] == 1.0));
        CHECK(s.soft[0] + s.soft[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(s.soft[0] > 0.0);
        CHECK(s.soft[1] > 0.0);
        // argmax(soft) matches the hot position for the same noise.
        const int soft_arg = s.soft[0] >= s.soft[1] ? 0 : 1;
        CHECK(soft_arg == s.selected());
    }
}

TEST_CASE("stgs selection frequency follows softmax(logits), independent of tau") {
    const std::array<double, 2> logits = {std::log(0.7), std::log(0.3)};
    for (const double tau : {0.1, 0.7, 5.0}) {
        Rng rng(101);
        int hits = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            if (stgs(logits, tau, rng).selected() == 0) ++hits;
        }
        const double freq = static_cast<double>(hits) / n;
        CHECK(std::abs(freq - 0.7) < 0.01);
    }
}

TEST_CASE("stgs symmetric logits select each branch half the time") {
    Rng rng(7);
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        if (stgs({0.0, 0.0}, 0.7, rng).selected() == 0) ++hits;
    }
    CHECK(std::abs(static_cast<double>(hits) / n - 0.5) < 0.01);
}

TEST_CASE("stgs soft approaches hard as tau -> 0") {
    Rng rng(31);
    for (int t = 0; t < 200; ++t) {
        std::array<double, 2> logits = {rng.next_double(), rng.next_double()};
        // Enforce a gap so the relaxation saturates.
        if (std::abs(logits[0] - logits[1]) < 0.1) logits[0] += 0.2;
        const GateSample s = stgs(logits, 1e-4, rng);
        CHECK(std::abs(s.soft[0] - s.hard[0]) < 1e-6);
        CHECK(std::abs(s.soft[1] - s.hard[1]) < 1e-6);
    }
}

TEST_CASE("spmm identity and hand-computed path") {
    // Identity-structured adjacency: self loops of weight 1 (test-only).
    Csr eye;
    eye.n = 3;
    eye.row_ptr = {0, 1, 2, 3};
    eye.col_idx = {0, 1, 2};
    eye.values = {1.0, 1.0, 1.0};
    DenseMatrix x(3, 2);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<double>(i);
    const DenseMatrix y = spmm(eye, x);
    CHECK(y.data == x.data);

    // 3-node path with unit weights, all-ones input.
    Csr path;
    path.n = 3;
    path.row_ptr = {0, 1, 3, 4};
    path.col_idx = {1, 0, 2, 1};
    path.values = {1.0, 1.0, 1.0, 1.0};
    DenseMatrix ones(3, 1);
    for (auto& v : ones.data) v = 1.0;
    const DenseMatrix p = spmm(path, ones);
    CHECK(p.at(0, 0) == doctest::Approx(1.0));
    CHECK(p.at(1, 0) == doctest::Approx(2.0));
    CHECK(p.at(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("spmm equals dense multiply and matches the serial kernel") {
    const Csr m = random_symmetric_csr(20, 0.3, 99);
    Rng rng(100);
    DenseMatrix x(20, 7);
    for (auto& v : x.data) v = rng.next_double() - 0.5;

    // Dense oracle.
    std::vector<std::vector<double>> dense(20, std::vector<double>(20, 0.0));
    for (std::size_t r = 0; r < 20; ++r) {
        for (std::int64_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
            dense[r][static_cast<std::size_t>(m.col_idx[k])] = m.values[k];
        }
    }
    const DenseMatrix y = spmm(m, x);
    for (std::size_t r = 0; r < 20; ++r) {
        for (std::size_t c = 0; c < 7; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < 20; ++j) s += dense[r][j] * x.at(j, c);
            CHECK(std::abs(y.at(r, c) - s) < 1e-12);
        }
    }

    DenseMatrix ys;
    spmm_serial(m, x, ys);
    CHECK(y.data == ys.data);
}

TEST_CASE("spmm with symmetric matrix satisfies x'(Ay) == y'(Ax)") {
    const Csr m = random_symmetric_csr(30, 0.2, 7);
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        DenseMatrix x(30, 1), y(30, 1);
        for (auto& v : x.data) v = rng.next_double() - 0.5;
        for (auto& v : y.data) v = rng.next_double() - 0.5;
        const DenseMatrix ay = spmm(m, y);
        const DenseMatrix ax = spmm(m, x);
        const double lhs = dot(x.data, ay.data);
        const double rhs = dot(y.data, ax.data);
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("spmm rejects mismatched shapes") {
    Csr eye;
    eye.n = 3;
    eye.row_ptr = {0, 1, 2, 3};
    eye.col_idx = {0, 1, 2};
    eye.values = {1.0, 1.0, 1.0};
    DenseMatrix x(4, 2);
    CHECK_THROWS_AS(spmm(eye, x), std::invalid_argument);
}
