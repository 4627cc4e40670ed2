#include <atomic>
#include <cstdlib>
#include <cstring>

#include "ttt/error.hpp"
#include "ttt/kernels.hpp"

namespace ttt::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() {
    if (const char* env = std::getenv("TTT_KERNELS"); env && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw Error(ErrorCode::InvalidArgument, std::string("kernel ISA not supported: ") + std::string(to_string(isa)));
    }
    current().store(isa, std::memory_order_relaxed);
}

void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool accumulate) {
    if (active_isa() == Isa::Avx2) {
        avx2::gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    } else {
        scalar::gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    }
}

float dot(const float* x, const float* y, int n) {
    return active_isa() == Isa::Avx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}

void axpy(float alpha, const float* x, float* y, int n) {
    if (active_isa() == Isa::Avx2) {
        avx2::axpy(alpha, x, y, n);
    } else {
        scalar::axpy(alpha, x, y, n);
    }
}

void adam_update(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamParams& p) {
    if (active_isa() == Isa::Avx2) {
        avx2::adam_update(param, grad, m, v, n, p);
    } else {
        scalar::adam_update(param, grad, m, v, n, p);
    }
}

}  // namespace ttt::kernels
