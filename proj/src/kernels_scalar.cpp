// Scalar reference backend. The loop orders here define the numeric contract:
// gemm_nn/gemm_tn accumulate each output strictly in ascending l, and the
// reductions (gemm_nt, sum_squared) use 4 stripes over the multiple-of-4
// prefix combined as (s0+s2)+(s1+s3), then a sequential tail -- the same
// order the AVX2 backend produces with one 256-bit accumulator.

#include "dsi/kernels.hpp"

#include <cmath>

namespace dsi::kernels::detail {
namespace {

void s_gemm_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void s_gemm_tn(const double* a, const double* b, double* c,
               std::size_t k, std::size_t m, std::size_t n) {
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

double striped_dot(const double* x, const double* y, std::size_t k) {
    const std::size_t k4 = k & ~std::size_t(3);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t l = 0; l < k4; l += 4) {
        s0 += x[l] * y[l];
        s1 += x[l + 1] * y[l + 1];
        s2 += x[l + 2] * y[l + 2];
        s3 += x[l + 3] * y[l + 3];
    }
    double t = (s0 + s2) + (s1 + s3);
    for (std::size_t l = k4; l < k; ++l) t += x[l] * y[l];
    return t;
}

void s_gemm_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            c[i * n + j] += striped_dot(arow, b + j * k, k);
        }
    }
}

void s_add_bias_rows(double* x, const double* bias,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* xr = x + r * cols;
        for (std::size_t j = 0; j < cols; ++j) xr[j] += bias[j];
    }
}

void s_tanh_backward(double* delta, const double* act, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) delta[i] *= 1.0 - act[i] * act[i];
}

void s_relu_forward(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_backward(double* delta, const double* act, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) delta[i] = act[i] > 0.0 ? delta[i] : 0.0;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scale(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double s_sum_squared(const double* x, std::size_t n) {
    return striped_dot(x, x, n);
}

void s_adam_update(double* p, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double inv_bc1, double inv_bc2,
                   double weight_decay) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double mhat = m[i] * inv_bc1;
        const double vhat = v[i] * inv_bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
        if (weight_decay != 0.0) p[i] -= lr * weight_decay * p[i];
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{
        s_gemm_nn, s_gemm_tn, s_gemm_nt, s_add_bias_rows, s_tanh_backward,
        s_relu_forward, s_relu_backward, s_axpy, s_scale, s_sum_squared,
        s_adam_update,
    };
    return ops;
}

}  // namespace dsi::kernels::detail
