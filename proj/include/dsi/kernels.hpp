#pragma once

// Runtime-dispatched double-precision kernels for the dense inner loops.
//
// Two backends: a scalar reference and an AVX2 variant, selected once at
// startup from CPUID (override with DSI_KERNELS=scalar|avx2|auto). Both
// backends are contracted to produce bit-identical results: reductions use a
// fixed 4-stripe accumulation order matching the AVX2 lane layout, elementwise
// kernels evaluate the same expression per element, and the build disables
// FP contraction so the compiler cannot fuse mul+add on one side only.

#include <cstddef>
#include <cstdint>

namespace dsi::kernels {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
const char* backend_name();
bool cpu_supports_avx2();

// Test hook: force a backend (throws std::runtime_error if unsupported).
void force_backend(Backend b);

// c[i,j] += sum_l a[i,l] * b[l,j]; a is m x k, b is k x n, c is m x n.
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);

// c[i,j] += sum_l a[l,i] * b[l,j]; a is k x m (transposed use), b k x n.
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t k, std::size_t m, std::size_t n);

// c[i,j] += sum_l a[i,l] * b[j,l]; a is m x k, b is n x k.
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);

// x[r,:] += bias for every row r.
void add_bias_rows(double* x, const double* bias,
                   std::size_t rows, std::size_t cols);

// In-place activations and their backward passes (act = forward output).
void tanh_forward(double* x, std::size_t n);
void tanh_backward(double* delta, const double* act, std::size_t n);
void relu_forward(double* x, std::size_t n);
void relu_backward(double* delta, const double* act, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double a, std::size_t n);

// sum_i x[i]^2 with the fixed 4-stripe reduction order.
double sum_squared(const double* x, std::size_t n);

// One Adam step on a flat parameter block. inv_bc1/inv_bc2 are the
// 1/(1-beta^t) bias corrections, computed once per step by the caller.
// weight_decay is decoupled (applied as p -= lr*wd*p).
void adam_update(double* p, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double inv_bc1, double inv_bc2,
                 double weight_decay);

namespace detail {
struct Ops {
    void (*gemm_nn)(const double*, const double*, double*,
                    std::size_t, std::size_t, std::size_t);
    void (*gemm_tn)(const double*, const double*, double*,
                    std::size_t, std::size_t, std::size_t);
    void (*gemm_nt)(const double*, const double*, double*,
                    std::size_t, std::size_t, std::size_t);
    void (*add_bias_rows)(double*, const double*, std::size_t, std::size_t);
    void (*tanh_backward)(double*, const double*, std::size_t);
    void (*relu_forward)(double*, std::size_t);
    void (*relu_backward)(double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
    double (*sum_squared)(const double*, std::size_t);
    void (*adam_update)(double*, double*, double*, const double*, std::size_t,
                        double, double, double, double, double, double, double);
};
const Ops& scalar_ops();
const Ops& avx2_ops();  // only valid to call through if cpu_supports_avx2()
}  // namespace detail

}  // namespace dsi::kernels
