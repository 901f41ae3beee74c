#include "dsi/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace dsi::kernels {

namespace {

std::atomic<const detail::Ops*> g_ops{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

Backend pick_backend() {
    const char* env = std::getenv("DSI_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0) {
            if (!cpu_supports_avx2())
                throw std::runtime_error("DSI_KERNELS=avx2 but CPU lacks AVX2");
            return Backend::Avx2;
        }
        // anything else (incl. "auto") falls through to detection
    }
    return cpu_supports_avx2() ? Backend::Avx2 : Backend::Scalar;
}

const detail::Ops* ops_for(Backend b) {
    return b == Backend::Avx2 ? &detail::avx2_ops() : &detail::scalar_ops();
}

const detail::Ops& ops() {
    const detail::Ops* p = g_ops.load(std::memory_order_acquire);
    if (p == nullptr) {
        Backend b = pick_backend();
        g_backend.store(b, std::memory_order_relaxed);
        p = ops_for(b);
        g_ops.store(p, std::memory_order_release);
    }
    return *p;
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

Backend active_backend() {
    ops();
    return g_backend.load(std::memory_order_relaxed);
}

const char* backend_name() {
    return active_backend() == Backend::Avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
    if (b == Backend::Avx2 && !cpu_supports_avx2())
        throw std::runtime_error("force_backend: CPU lacks AVX2");
    g_backend.store(b, std::memory_order_relaxed);
    g_ops.store(ops_for(b), std::memory_order_release);
}

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    ops().gemm_nn(a, b, c, m, k, n);
}
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t k, std::size_t m, std::size_t n) {
    ops().gemm_tn(a, b, c, k, m, n);
}
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    ops().gemm_nt(a, b, c, m, k, n);
}
void add_bias_rows(double* x, const double* bias,
                   std::size_t rows, std::size_t cols) {
    ops().add_bias_rows(x, bias, rows, cols);
}
void tanh_forward(double* x, std::size_t n) {
    // libm tanh in both backends; anything vectorized would round differently
    for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}
void tanh_backward(double* delta, const double* act, std::size_t n) {
    ops().tanh_backward(delta, act, n);
}
void relu_forward(double* x, std::size_t n) { ops().relu_forward(x, n); }
void relu_backward(double* delta, const double* act, std::size_t n) {
    ops().relu_backward(delta, act, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    ops().axpy(alpha, x, y, n);
}
void scale(double* x, double a, std::size_t n) { ops().scale(x, a, n); }
double sum_squared(const double* x, std::size_t n) {
    return ops().sum_squared(x, n);
}
void adam_update(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double inv_bc1, double inv_bc2,
                 double weight_decay) {
    ops().adam_update(p, m, v, g, n, lr, beta1, beta2, eps, inv_bc1, inv_bc2,
                      weight_decay);
}

}  // namespace dsi::kernels
