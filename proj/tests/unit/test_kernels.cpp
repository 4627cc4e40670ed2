#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ttt/error.hpp"
#include "ttt/kernels.hpp"

using namespace ttt::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("scalar gemm matches a double-precision reference") {
    std::mt19937_64 rng(1);
    const int m = 7, n = 13, k = 9;
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
    std::vector<float> c(m * n);
    scalar::gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int p = 0; p < k; ++p) s += double(a[i * k + p]) * b[p * n + j];
            CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-5));
        }
}

TEST_CASE("AVX2 kernels agree with the scalar kernels") {
    if (!isa_supported(Isa::Avx2)) {
        MESSAGE("AVX2 unavailable; equivalence not exercised");
        return;
    }
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> dim(1, 70);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = dim(rng), n = dim(rng), k = dim(rng);
        const int lda = k + trial % 3, ldb = n + trial % 2, ldc = n + trial % 4;
        const auto a = random_vec(std::size_t(m) * lda, rng), b = random_vec(std::size_t(k) * ldb, rng);
        auto c0 = random_vec(std::size_t(m) * ldc, rng);
        auto c1 = c0;
        const bool acc = trial % 2 == 0;
        scalar::gemm(m, n, k, a.data(), lda, b.data(), ldb, c0.data(), ldc, acc);
        avx2::gemm(m, n, k, a.data(), lda, b.data(), ldb, c1.data(), ldc, acc);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < ldc; ++j) {
                const float s = c0[i * ldc + j], v = c1[i * ldc + j];
                if (j >= n) {
                    REQUIRE(s == v);  // padding columns untouched
                } else {
                    REQUIRE(std::abs(s - v) <= 1e-5f * (1.0f + std::abs(s)) * std::sqrt(float(k)));
                }
            }
        }

        const auto x = random_vec(n, rng);
        auto y0 = random_vec(n, rng);
        auto y1 = y0;
        CHECK(avx2::dot(x.data(), y0.data(), n) == doctest::Approx(scalar::dot(x.data(), y0.data(), n)).epsilon(1e-4));
        scalar::axpy(0.37f, x.data(), y0.data(), n);
        avx2::axpy(0.37f, x.data(), y1.data(), n);
        for (int i = 0; i < n; ++i) REQUIRE(std::abs(y0[i] - y1[i]) <= 1e-6f);
    }
}

TEST_CASE("AVX2 Adam update agrees with the scalar update") {
    if (!isa_supported(Isa::Avx2)) return;
    std::mt19937_64 rng(3);
    for (std::size_t n : {1u, 7u, 8u, 9u, 33u, 1000u}) {
        auto p0 = random_vec(n, rng), g = random_vec(n, rng), m0 = random_vec(n, rng), v0 = random_vec(n, rng);
        for (auto& v : v0) v = std::abs(v);
        auto p1 = p0, m1 = m0, v1 = v0;
        const AdamParams ap{1e-3f, 0.9f, 0.999f, 1e-8f, 1 - 0.9f * 0.9f, 1 - 0.999f * 0.999f};
        scalar::adam_update(p0.data(), g.data(), m0.data(), v0.data(), n, ap);
        avx2::adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, ap);
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(std::abs(p0[i] - p1[i]) <= 1e-6f);
            REQUIRE(std::abs(m0[i] - m1[i]) <= 1e-7f);
            REQUIRE(std::abs(v0[i] - v1[i]) <= 1e-7f);
        }
    }
}

TEST_CASE("ISA selection") {
    const Isa before = active_isa();
    set_isa(Isa::Scalar);
    CHECK(active_isa() == Isa::Scalar);
    CHECK(to_string(Isa::Scalar) == "scalar");
    if (!isa_supported(Isa::Avx2)) CHECK_THROWS_AS(set_isa(Isa::Avx2), ttt::Error);
    set_isa(before);
}
