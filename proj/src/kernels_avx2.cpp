// AVX2+FMA float kernels. Compiled with -mavx2 -mfma; only dispatched to
// after a runtime cpuid check. Elementwise kernels mirror the scalar ops
// exactly (separate mul/add, no contraction) so they are bit-exact against
// the scalar backend; the GEMMs use FMA and are equivalence-tested with a
// small tolerance instead.
#ifndef TDCN_REAL_DOUBLE

#include "tdcn/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace tdcn::kernels::avx2 {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, sums);
    sums = _mm_add_ss(sums, sh);
    return _mm_cvtss_f32(sums);
}

template <int MR>
inline void nn_tile(int64_t K, int64_t N, const float* A, const float* B,
                    float* C, int64_t j0, bool accumulate) {
    __m256 acc[MR][2];
    for (int r = 0; r < MR; ++r) {
        if (accumulate) {
            acc[r][0] = _mm256_loadu_ps(C + r * N + j0);
            acc[r][1] = _mm256_loadu_ps(C + r * N + j0 + 8);
        } else {
            acc[r][0] = _mm256_setzero_ps();
            acc[r][1] = _mm256_setzero_ps();
        }
    }
    for (int64_t k = 0; k < K; ++k) {
        __m256 b0 = _mm256_loadu_ps(B + k * N + j0);
        __m256 b1 = _mm256_loadu_ps(B + k * N + j0 + 8);
        for (int r = 0; r < MR; ++r) {
            __m256 a = _mm256_set1_ps(A[r * K + k]);
            acc[r][0] = _mm256_fmadd_ps(a, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_ps(a, b1, acc[r][1]);
        }
    }
    for (int r = 0; r < MR; ++r) {
        _mm256_storeu_ps(C + r * N + j0, acc[r][0]);
        _mm256_storeu_ps(C + r * N + j0 + 8, acc[r][1]);
    }
}

} // namespace

void gemm_nn(int64_t M, int64_t N, int64_t K, const float* A, const float* B,
             float* C, bool accumulate) {
    int64_t i0 = 0;
    for (; i0 < M; i0 += 4) {
        int mr = int(std::min<int64_t>(4, M - i0));
        const float* a = A + i0 * K;
        float* c = C + i0 * N;
        int64_t j0 = 0;
        for (; j0 + 16 <= N; j0 += 16) {
            switch (mr) {
                case 1: nn_tile<1>(K, N, a, B, c, j0, accumulate); break;
                case 2: nn_tile<2>(K, N, a, B, c, j0, accumulate); break;
                case 3: nn_tile<3>(K, N, a, B, c, j0, accumulate); break;
                default: nn_tile<4>(K, N, a, B, c, j0, accumulate); break;
            }
        }
        // Column tail: scalar (same serial k order).
        for (int r = 0; r < mr; ++r) {
            for (int64_t j = j0; j < N; ++j) {
                float acc = accumulate ? c[r * N + j] : 0.0f;
                for (int64_t k = 0; k < K; ++k) acc += a[r * K + k] * B[k * N + j];
                c[r * N + j] = acc;
            }
        }
    }
}

void gemm_tn(int64_t M, int64_t N, int64_t K, const float* A, const float* B,
             float* C, bool accumulate) {
    for (int64_t i = 0; i < M; ++i) {
        float* c = C + i * N;
        int64_t j0 = 0;
        for (; j0 + 8 <= N; j0 += 8) {
            __m256 acc = accumulate ? _mm256_loadu_ps(c + j0) : _mm256_setzero_ps();
            for (int64_t k = 0; k < K; ++k) {
                __m256 a = _mm256_set1_ps(A[k * M + i]);
                acc = _mm256_fmadd_ps(a, _mm256_loadu_ps(B + k * N + j0), acc);
            }
            _mm256_storeu_ps(c + j0, acc);
        }
        for (int64_t j = j0; j < N; ++j) {
            float acc = accumulate ? c[j] : 0.0f;
            for (int64_t k = 0; k < K; ++k) acc += A[k * M + i] * B[k * N + j];
            c[j] = acc;
        }
    }
}

void gemm_nt(int64_t M, int64_t N, int64_t K, const float* A, const float* B,
             float* C, bool accumulate) {
    for (int64_t i = 0; i < M; ++i) {
        const float* a = A + i * K;
        for (int64_t j = 0; j < N; ++j) {
            const float* b = B + j * K;
            __m256 vacc = _mm256_setzero_ps();
            int64_t k = 0;
            for (; k + 8 <= K; k += 8)
                vacc = _mm256_fmadd_ps(_mm256_loadu_ps(a + k),
                                       _mm256_loadu_ps(b + k), vacc);
            float acc = hsum(vacc);
            for (; k < K; ++k) acc += a[k] * b[k];
            float* c = C + i * N + j;
            *c = accumulate ? *c + acc : acc;
        }
    }
}

void vadd(int64_t n, const float* a, const float* b, float* out) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul(int64_t n, const float* a, const float* b, float* out) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                                _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vmuladd(int64_t n, const float* a, const float* b, float* dst) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_loadu_ps(dst + i), prod));
    }
    for (; i < n; ++i) dst[i] += a[i] * b[i];
}

void vaccum(int64_t n, const float* src, float* dst) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_loadu_ps(dst + i),
                                                _mm256_loadu_ps(src + i)));
    for (; i < n; ++i) dst[i] += src[i];
}

void vscale(int64_t n, float alpha, const float* x, float* out) {
    __m256 va = _mm256_set1_ps(alpha);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void vaxpy(int64_t n, float alpha, const float* x, float* y) {
    __m256 va = _mm256_set1_ps(alpha);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void vrelu(int64_t n, const float* x, float* out) {
    __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void vrelu_bwd(int64_t n, const float* out, const float* gy, float* gx) {
    __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(out + i), zero, _CMP_GT_OQ);
        __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gy + i));
        _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
    }
    for (; i < n; ++i)
        if (out[i] > 0.0f) gx[i] += gy[i];
}

void vadam(int64_t n, float* p, const float* g, float* m, float* v, float lr,
           float beta1, float beta2, float eps, float bc1, float bc2) {
    __m256 vb1 = _mm256_set1_ps(beta1);
    __m256 vb2 = _mm256_set1_ps(beta2);
    __m256 vc1 = _mm256_set1_ps(1.0f - beta1);
    __m256 vc2 = _mm256_set1_ps(1.0f - beta2);
    __m256 vlr = _mm256_set1_ps(lr);
    __m256 veps = _mm256_set1_ps(eps);
    __m256 vbc1 = _mm256_set1_ps(bc1);
    __m256 vbc2 = _mm256_set1_ps(bc2);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)),
                                  _mm256_mul_ps(vc1, gi));
        __m256 vi = _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)),
                                  _mm256_mul_ps(vc2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        __m256 mhat = _mm256_div_ps(mi, vbc1);
        __m256 vhat = _mm256_div_ps(vi, vbc2);
        __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        __m256 step = _mm256_mul_ps(vlr, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * (g[i] * g[i]);
        float mhat = m[i] / bc1;
        float vhat = v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace tdcn::kernels::avx2

#endif // !TDCN_REAL_DOUBLE
