// Compiled with -mavx2 -mfma; only reached through dispatch after a CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "ttt/kernels.hpp"

namespace ttt::kernels::avx2 {

namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
    return _mm_cvtss_f32(lo);
}

// Mask for the first `n` (< 8) lanes.
inline __m256i tail_mask(int n) {
    alignas(32) static const int table[16] = {-1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - n));
}

// 4 rows x 16 columns of C, fully in registers.
inline void kernel_4x16(int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate) {
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
    for (int p = 0; p < k; ++p) {
        const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        const __m256 b0 = _mm256_loadu_ps(brow);
        const __m256 b1 = _mm256_loadu_ps(brow + 8);
        __m256 av = _mm256_broadcast_ss(a + p);
        c00 = _mm256_fmadd_ps(av, b0, c00);
        c01 = _mm256_fmadd_ps(av, b1, c01);
        av = _mm256_broadcast_ss(a + lda + p);
        c10 = _mm256_fmadd_ps(av, b0, c10);
        c11 = _mm256_fmadd_ps(av, b1, c11);
        av = _mm256_broadcast_ss(a + 2 * lda + p);
        c20 = _mm256_fmadd_ps(av, b0, c20);
        c21 = _mm256_fmadd_ps(av, b1, c21);
        av = _mm256_broadcast_ss(a + 3 * lda + p);
        c30 = _mm256_fmadd_ps(av, b0, c30);
        c31 = _mm256_fmadd_ps(av, b1, c31);
    }
    auto store = [&](float* dst, __m256 lo, __m256 hi) {
        if (accumulate) {
            lo = _mm256_add_ps(lo, _mm256_loadu_ps(dst));
            hi = _mm256_add_ps(hi, _mm256_loadu_ps(dst + 8));
        }
        _mm256_storeu_ps(dst, lo);
        _mm256_storeu_ps(dst + 8, hi);
    };
    store(c, c00, c01);
    store(c + ldc, c10, c11);
    store(c + 2 * ldc, c20, c21);
    store(c + 3 * ldc, c30, c31);
}

// One row of C across `width` (<= 8) columns starting at c.
inline void kernel_1x8(int k, const float* a, const float* b, int ldb, float* c, int width, bool accumulate) {
    const __m256i mask = tail_mask(width);
    __m256 acc = _mm256_setzero_ps();
    for (int p = 0; p < k; ++p) {
        const __m256 bv = width == 8 ? _mm256_loadu_ps(b + static_cast<std::ptrdiff_t>(p) * ldb)
                                     : _mm256_maskload_ps(b + static_cast<std::ptrdiff_t>(p) * ldb, mask);
        acc = _mm256_fmadd_ps(_mm256_broadcast_ss(a + p), bv, acc);
    }
    if (accumulate) acc = _mm256_add_ps(acc, _mm256_maskload_ps(c, mask));
    _mm256_maskstore_ps(c, mask, acc);
}

}  // namespace

void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate) {
    const int n16 = n - n % 16;
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        const float* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
        float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        for (int j = 0; j < n16; j += 16) kernel_4x16(k, arow, lda, b + j, ldb, crow + j, ldc, accumulate);
        for (int j = n16; j < n; j += 8) {
            for (int r = 0; r < 4; ++r) {
                kernel_1x8(k, arow + static_cast<std::ptrdiff_t>(r) * lda, b + j, ldb,
                           crow + static_cast<std::ptrdiff_t>(r) * ldc + j, std::min(8, n - j), accumulate);
            }
        }
    }
    for (; i < m; ++i) {
        const float* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
        float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        for (int j = 0; j < n; j += 8) kernel_1x8(k, arow, b + j, ldb, crow + j, std::min(8, n - j), accumulate);
    }
}

float dot(const float* x, const float* y, int n) {
    __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
    int i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    float s = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(float alpha, const float* x, float* y, int n) {
    const __m256 av = _mm256_set1_ps(alpha);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p) {
    const __m256 b1 = _mm256_set1_ps(p.beta1), nb1 = _mm256_set1_ps(1.0f - p.beta1);
    const __m256 b2 = _mm256_set1_ps(p.beta2), nb2 = _mm256_set1_ps(1.0f - p.beta2);
    const __m256 bc1 = _mm256_set1_ps(p.bias_correction1), bc2 = _mm256_set1_ps(p.bias_correction2);
    const __m256 lr = _mm256_set1_ps(p.lr), eps = _mm256_set1_ps(p.eps);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(grad + i);
        const __m256 mv = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(nb1, g));
        const __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                        _mm256_mul_ps(_mm256_mul_ps(nb2, g), g));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 m_hat = _mm256_div_ps(mv, bc1);
        const __m256 v_hat = _mm256_div_ps(vv, bc2);
        const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, m_hat), _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps));
        _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
    }
    if (i < n) adam_update_ref(param + i, grad + i, m + i, v + i, n - i, p);
}

}  // namespace ttt::kernels::avx2
