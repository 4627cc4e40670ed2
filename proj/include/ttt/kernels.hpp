#pragma once

#include <cstddef>
#include <string_view>

namespace ttt::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
bool isa_supported(Isa isa);

/// Best supported ISA unless TTT_KERNELS=scalar is set in the environment.
Isa active_isa();
/// Throws InvalidArgument when the ISA is not supported by this CPU.
void set_isa(Isa isa);

struct AdamParams {
    float lr;
    float beta1;
    float beta2;
    float eps;
    float bias_correction1;  // 1 - beta1^t
    float bias_correction2;  // 1 - beta2^t
};

// Row-major C[M,N] = A[M,K] * B[K,N] (+ C when accumulate).
template <class T>
void gemm_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (!accumulate) {
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        }
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::ptrdiff_t>(i) * lda + p];
            const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
T dot_ref(const T* x, const T* y, int n) {
    T s = T(0);
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

template <class T>
void axpy_ref(T alpha, const T* x, T* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update_ref(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p);

namespace scalar {
void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate);
float dot(const float* x, const float* y, int n);
void axpy(float alpha, const float* x, float* y, int n);
void adam_update(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p);
}  // namespace scalar

namespace avx2 {
void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate);
float dot(const float* x, const float* y, int n);
void axpy(float alpha, const float* x, float* y, int n);
void adam_update(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p);
}  // namespace avx2

// Dispatched entry points.
void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate);
float dot(const float* x, const float* y, int n);
void axpy(float alpha, const float* x, float* y, int n);
void adam_update(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p);

// Double precision always takes the scalar reference path.
inline void gemm(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c, int ldc,
                 bool accumulate) {
    gemm_ref(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline double dot(const double* x, const double* y, int n) { return dot_ref(x, y, n); }
inline void axpy(double alpha, const double* x, double* y, int n) { axpy_ref(alpha, x, y, n); }

/// out[c, r] = in[r, c]; in is rows x cols with leading dimension ld_in.
template <class T>
void transpose(int rows, int cols, const T* in, int ld_in, T* out, int ld_out) {
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[static_cast<std::ptrdiff_t>(c) * ld_out + r] = in[static_cast<std::ptrdiff_t>(r) * ld_in + c];
}

}  // namespace ttt::kernels
