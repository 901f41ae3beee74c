// AVX2 backend. Compiled with -mavx2 (no FMA: fused ops would round once
// where the scalar reference rounds twice). Only reachable after the CPUID
// check in the dispatcher.

#include "dsi/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

namespace dsi::kernels::detail {
namespace {

inline double hsum4(__m256d acc) {
    // lanes (s0,s1,s2,s3) -> (s0+s2, s1+s3) -> (s0+s2)+(s1+s3)
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

void v_gemm_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            const __m256d va = _mm256_set1_pd(av);
            const double* brow = b + l * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, _mm256_loadu_pd(brow + j)));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void v_gemm_tn(const double* a, const double* b, double* c,
               std::size_t k, std::size_t m, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            const __m256d va = _mm256_set1_pd(av);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, _mm256_loadu_pd(brow + j)));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

double v_striped_dot(const double* x, const double* y, std::size_t k) {
    const std::size_t k4 = k & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t l = 0; l < k4; l += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + l),
                                               _mm256_loadu_pd(y + l)));
    }
    double t = hsum4(acc);
    for (std::size_t l = k4; l < k; ++l) t += x[l] * y[l];
    return t;
}

void v_gemm_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            c[i * n + j] += v_striped_dot(arow, b + j * k, k);
        }
    }
}

void v_add_bias_rows(double* x, const double* bias,
                     std::size_t rows, std::size_t cols) {
    const std::size_t c4 = cols & ~std::size_t(3);
    for (std::size_t r = 0; r < rows; ++r) {
        double* xr = x + r * cols;
        std::size_t j = 0;
        for (; j < c4; j += 4) {
            _mm256_storeu_pd(xr + j, _mm256_add_pd(_mm256_loadu_pd(xr + j),
                                                   _mm256_loadu_pd(bias + j)));
        }
        for (; j < cols; ++j) xr[j] += bias[j];
    }
}

void v_tanh_backward(double* delta, const double* act, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d va = _mm256_loadu_pd(act + i);
        __m256d vd = _mm256_loadu_pd(delta + i);
        vd = _mm256_mul_pd(vd, _mm256_sub_pd(one, _mm256_mul_pd(va, va)));
        _mm256_storeu_pd(delta + i, vd);
    }
    for (; i < n; ++i) delta[i] *= 1.0 - act[i] * act[i];
}

void v_relu_forward(double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_backward(double* delta, const double* act, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(delta + i,
                         _mm256_and_pd(_mm256_loadu_pd(delta + i), mask));
    }
    for (; i < n; ++i) delta[i] = act[i] > 0.0 ? delta[i] : 0.0;
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_scale(double* x, double a, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) x[i] *= a;
}

double v_sum_squared(const double* x, std::size_t n) {
    return v_striped_dot(x, x, n);
}

void v_adam_update(double* p, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double inv_bc1, double inv_bc2,
                   double weight_decay) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
    const __m256d vbc1 = _mm256_set1_pd(inv_bc1);
    const __m256d vbc2 = _mm256_set1_pd(inv_bc2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vwd = _mm256_set1_pd(lr * weight_decay);
    const std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                   _mm256_mul_pd(vb1c, vg));
        __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                   _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_mul_pd(vm, vbc1);
        __m256d vhat = _mm256_mul_pd(vv, vbc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        __m256d vp = _mm256_loadu_pd(p + i);
        vp = _mm256_sub_pd(vp, _mm256_mul_pd(vlr, _mm256_div_pd(mhat, denom)));
        if (weight_decay != 0.0) vp = _mm256_sub_pd(vp, _mm256_mul_pd(vwd, vp));
        _mm256_storeu_pd(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double mhat = m[i] * inv_bc1;
        const double vhat = v[i] * inv_bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
        if (weight_decay != 0.0) p[i] -= lr * weight_decay * p[i];
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{
        v_gemm_nn, v_gemm_tn, v_gemm_nt, v_add_bias_rows, v_tanh_backward,
        v_relu_forward, v_relu_backward, v_axpy, v_scale, v_sum_squared,
        v_adam_update,
    };
    return ops;
}

}  // namespace dsi::kernels::detail

#else  // non-x86: never selected, satisfy the linker

namespace dsi::kernels::detail {
const Ops& avx2_ops() { return scalar_ops(); }
}  // namespace dsi::kernels::detail

#endif
