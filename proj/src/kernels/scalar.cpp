#include <cmath>

#include "ttt/kernels.hpp"

namespace ttt::kernels {

void adam_update_ref(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p) {
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grad[i];
        m[i] = p.beta1 * m[i] + (1.0f - p.beta1) * g;
        v[i] = p.beta2 * v[i] + (1.0f - p.beta2) * g * g;
        const float m_hat = m[i] / p.bias_correction1;
        const float v_hat = v[i] / p.bias_correction2;
        param[i] -= p.lr * m_hat / (std::sqrt(v_hat) + p.eps);
    }
}

namespace scalar {

void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate) {
    gemm_ref(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

float dot(const float* x, const float* y, int n) { return dot_ref(x, y, n); }

void axpy(float alpha, const float* x, float* y, int n) { axpy_ref(alpha, x, y, n); }

void adam_update(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p) {
    adam_update_ref(param, grad, m, v, n, p);
}

}  // namespace scalar
}  // namespace ttt::kernels
