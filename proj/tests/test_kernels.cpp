#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "dsi/kernels.hpp"
#include "dsi/rng.hpp"

using namespace dsi;
namespace k = dsi::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, RngStream& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_normal();
    return v;
}

// Plain triple-loop reference, independent of the kernel stripe order.
std::vector<double> naive_gemm_nn(const std::vector<double>& a,
                                  const std::vector<double>& b, std::size_t m,
                                  std::size_t kk, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < kk; ++l)
                c[i * n + j] += a[i * kk + l] * b[l * n + j];
    return c;
}

struct BackendGuard {
    ~BackendGuard() {
        if (k::cpu_supports_avx2())
            k::force_backend(k::Backend::Avx2);
        else
            k::force_backend(k::Backend::Scalar);
    }
};

}  // namespace

TEST_CASE("gemm_nn matches a naive reference") {
    RngStream rng(42, 0);
    const std::array<std::array<std::size_t, 3>, 4> shapes{{{3, 5, 7}, {1, 1, 1}, {8, 16, 4}, {5, 3, 9}}};
    for (auto [m, kk, n] : shapes) {
        auto a = random_vec(m * kk, rng);
        auto b = random_vec(kk * n, rng);
        std::vector<double> c(m * n, 0.0);
        k::gemm_nn(a.data(), b.data(), c.data(), m, kk, n);
        auto ref = naive_gemm_nn(a, b, m, kk, n);
        for (std::size_t i = 0; i < c.size(); ++i)
            CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("gemm_tn and gemm_nt agree with transposed gemm_nn") {
    RngStream rng(7, 0);
    const std::size_t m = 6, kk = 11, n = 5;
    auto a = random_vec(m * kk, rng);   // m x kk
    auto b = random_vec(kk * n, rng);   // kk x n
    // gemm_tn: c[i,j] = sum_l at[l,i]*b[l,j] with at = a^T laid out kk x m
    std::vector<double> at(kk * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < kk; ++l) at[l * m + i] = a[i * kk + l];
    std::vector<double> c1(m * n, 0.0);
    k::gemm_tn(at.data(), b.data(), c1.data(), kk, m, n);
    auto ref = naive_gemm_nn(a, b, m, kk, n);
    for (std::size_t i = 0; i < c1.size(); ++i)
        CHECK(c1[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    // gemm_nt: c[i,j] = sum_l a[i,l]*bt[j,l] with bt = b^T laid out n x kk
    std::vector<double> bt(n * kk);
    for (std::size_t l = 0; l < kk; ++l)
        for (std::size_t j = 0; j < n; ++j) bt[j * kk + l] = b[l * n + j];
    std::vector<double> c2(m * n, 0.0);
    k::gemm_nt(a.data(), bt.data(), c2.data(), m, kk, n);
    for (std::size_t i = 0; i < c2.size(); ++i)
        CHECK(c2[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("scalar and AVX2 backends are bit-identical") {
    if (!k::cpu_supports_avx2()) {
        MESSAGE("no AVX2 on this host; skipping equivalence");
        return;
    }
    BackendGuard guard;
    RngStream rng(123, 9);

    // exercise remainder lanes: sizes not divisible by 4
    const std::array<std::array<std::size_t, 3>, 4> shapes{{{5, 7, 9}, {4, 8, 12}, {3, 13, 2}, {17, 6, 31}}};
    for (auto [m, kk, n] : shapes) {
        auto a = random_vec(m * kk, rng);
        auto b = random_vec(kk * n, rng);
        auto bt = random_vec(n * kk, rng);
        auto at = random_vec(kk * m, rng);
        auto bias = random_vec(n, rng);

        std::vector<double> c_s(m * n, 0.5), c_v(m * n, 0.5);
        k::force_backend(k::Backend::Scalar);
        k::gemm_nn(a.data(), b.data(), c_s.data(), m, kk, n);
        k::force_backend(k::Backend::Avx2);
        k::gemm_nn(a.data(), b.data(), c_v.data(), m, kk, n);
        CHECK(std::memcmp(c_s.data(), c_v.data(), c_s.size() * 8) == 0);

        std::fill(c_s.begin(), c_s.end(), 0.0);
        std::fill(c_v.begin(), c_v.end(), 0.0);
        k::force_backend(k::Backend::Scalar);
        k::gemm_tn(at.data(), b.data(), c_s.data(), kk, m, n);
        k::force_backend(k::Backend::Avx2);
        k::gemm_tn(at.data(), b.data(), c_v.data(), kk, m, n);
        CHECK(std::memcmp(c_s.data(), c_v.data(), c_s.size() * 8) == 0);

        std::fill(c_s.begin(), c_s.end(), 0.0);
        std::fill(c_v.begin(), c_v.end(), 0.0);
        k::force_backend(k::Backend::Scalar);
        k::gemm_nt(a.data(), bt.data(), c_s.data(), m, kk, n);
        k::force_backend(k::Backend::Avx2);
        k::gemm_nt(a.data(), bt.data(), c_v.data(), m, kk, n);
        CHECK(std::memcmp(c_s.data(), c_v.data(), c_s.size() * 8) == 0);

        auto x_s = random_vec(m * n, rng);
        auto x_v = x_s;
        k::force_backend(k::Backend::Scalar);
        k::add_bias_rows(x_s.data(), bias.data(), m, n);
        k::force_backend(k::Backend::Avx2);
        k::add_bias_rows(x_v.data(), bias.data(), m, n);
        CHECK(std::memcmp(x_s.data(), x_v.data(), x_s.size() * 8) == 0);

        auto act = random_vec(m * n, rng);
        auto d_s = random_vec(m * n, rng);
        auto d_v = d_s;
        k::force_backend(k::Backend::Scalar);
        k::tanh_backward(d_s.data(), act.data(), d_s.size());
        k::force_backend(k::Backend::Avx2);
        k::tanh_backward(d_v.data(), act.data(), d_v.size());
        CHECK(std::memcmp(d_s.data(), d_v.data(), d_s.size() * 8) == 0);

        k::force_backend(k::Backend::Scalar);
        const double ss_s = k::sum_squared(a.data(), a.size());
        k::force_backend(k::Backend::Avx2);
        const double ss_v = k::sum_squared(a.data(), a.size());
        CHECK(std::memcmp(&ss_s, &ss_v, 8) == 0);
    }
}

TEST_CASE("adam_update is bit-identical across backends and decays moments") {
    BackendGuard guard;
    RngStream rng(5, 5);
    const std::size_t n = 37;
    auto p0 = random_vec(n, rng);
    auto g = random_vec(n, rng);

    auto run = [&](k::Backend b) {
        k::force_backend(b);
        auto p = p0;
        std::vector<double> m(n, 0.0), v(n, 0.0);
        for (int t = 1; t <= 3; ++t) {
            const double bc1 = 1.0 - std::pow(0.9, t);
            const double bc2 = 1.0 - std::pow(0.999, t);
            k::adam_update(p.data(), m.data(), v.data(), g.data(), n, 1e-3, 0.9,
                           0.999, 1e-8, 1.0 / bc1, 1.0 / bc2, 0.0);
        }
        return p;
    };

    auto ps = run(k::Backend::Scalar);
    if (k::cpu_supports_avx2()) {
        auto pv = run(k::Backend::Avx2);
        CHECK(std::memcmp(ps.data(), pv.data(), n * 8) == 0);
    }

    // zero gradient: parameters unchanged, moments decay toward zero
    k::force_backend(k::Backend::Scalar);
    std::vector<double> p = p0, m(n, 1.0), v(n, 1.0), zg(n, 0.0);
    k::adam_update(p.data(), m.data(), v.data(), zg.data(), n, 1e-3, 0.9, 0.999,
                   1e-8, 1.0, 1.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(m[i] == doctest::Approx(0.9));
        CHECK(v[i] == doctest::Approx(0.999));
    }
    // mhat = m*inv_bc1 is nonzero after decaying stale moments, so p moves;
    // with fresh zero moments p must stay exactly put
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    p = p0;
    k::adam_update(p.data(), m.data(), v.data(), zg.data(), n, 1e-3, 0.9, 0.999,
                   1e-8, 10.0, 1000.0, 0.0);
    CHECK(std::memcmp(p.data(), p0.data(), n * 8) == 0);
}
