#include "tdcn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace tdcn::kernels::scalar {

void gemm_nn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate) {
    for (int64_t i = 0; i < M; ++i) {
        real* c = C + i * N;
        if (!accumulate) std::fill(c, c + N, real(0));
        const real* a = A + i * K;
        for (int64_t k = 0; k < K; ++k) {
            real av = a[k];
            const real* b = B + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

void gemm_tn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate) {
    if (!accumulate) std::fill(C, C + M * N, real(0));
    for (int64_t k = 0; k < K; ++k) {
        const real* a = A + k * M;
        const real* b = B + k * N;
        for (int64_t i = 0; i < M; ++i) {
            real av = a[i];
            real* c = C + i * N;
            for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

void gemm_nt(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate) {
    for (int64_t i = 0; i < M; ++i) {
        const real* a = A + i * K;
        for (int64_t j = 0; j < N; ++j) {
            const real* b = B + j * K;
            real acc = 0;
            for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
            real* c = C + i * N + j;
            *c = accumulate ? *c + acc : acc;
        }
    }
}

void vadd(int64_t n, const real* a, const real* b, real* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul(int64_t n, const real* a, const real* b, real* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vmuladd(int64_t n, const real* a, const real* b, real* dst) {
    for (int64_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}

void vaccum(int64_t n, const real* src, real* dst) {
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

void vscale(int64_t n, real alpha, const real* x, real* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void vaxpy(int64_t n, real alpha, const real* x, real* y) {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vrelu(int64_t n, const real* x, real* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = x[i] > real(0) ? x[i] : real(0);
}

void vrelu_bwd(int64_t n, const real* out, const real* gy, real* gx) {
    for (int64_t i = 0; i < n; ++i)
        if (out[i] > real(0)) gx[i] += gy[i];
}

void vadam(int64_t n, real* p, const real* g, real* m, real* v, real lr,
           real beta1, real beta2, real eps, real bc1, real bc2) {
    for (int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (real(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (real(1) - beta2) * (g[i] * g[i]);
        real mhat = m[i] / bc1;
        real vhat = v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace tdcn::kernels::scalar

namespace tdcn::kernels {

void im2col(const real* x, int C, int H, int W, int K, int stride, int pad,
            real* P) {
    int Ho = (H + 2 * pad - K) / stride + 1;
    int Wo = (W + 2 * pad - K) / stride + 1;
    int64_t HWo = int64_t(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        const real* xc = x + int64_t(c) * H * W;
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                real* row = P + (int64_t(c) * K * K + ky * K + kx) * HWo;
                for (int oy = 0; oy < Ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    real* r = row + int64_t(oy) * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(r, r + Wo, real(0));
                        continue;
                    }
                    const real* xrow = xc + int64_t(iy) * W;
                    if (stride == 1) {
                        // valid ox range is contiguous: copy it, zero the rest
                        int lo = std::max(0, pad - kx);
                        int hi = std::min(Wo, W + pad - kx);
                        if (lo > 0) std::fill(r, r + lo, real(0));
                        if (hi > lo)
                            std::memcpy(r + lo, xrow + lo + kx - pad,
                                        size_t(hi - lo) * sizeof(real));
                        if (hi < Wo) std::fill(r + std::max(hi, lo), r + Wo, real(0));
                    } else {
                        for (int ox = 0; ox < Wo; ++ox) {
                            int ix = ox * stride + kx - pad;
                            r[ox] = (ix >= 0 && ix < W) ? xrow[ix] : real(0);
                        }
                    }
                }
            }
        }
    }
}

void col2im(const real* gP, int C, int H, int W, int K, int stride, int pad,
            real* gx) {
    int Ho = (H + 2 * pad - K) / stride + 1;
    int Wo = (W + 2 * pad - K) / stride + 1;
    int64_t HWo = int64_t(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        real* xc = gx + int64_t(c) * H * W;
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                const real* row = gP + (int64_t(c) * K * K + ky * K + kx) * HWo;
                for (int oy = 0; oy < Ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    const real* r = row + int64_t(oy) * Wo;
                    real* xrow = xc + int64_t(iy) * W;
                    if (stride == 1) {
                        int lo = std::max(0, pad - kx);
                        int hi = std::min(Wo, W + pad - kx);
                        if (hi > lo) {
                            real* dst = xrow + lo + kx - pad;
                            const real* src = r + lo;
                            for (int i = 0; i < hi - lo; ++i) dst[i] += src[i];
                        }
                    } else {
                        for (int ox = 0; ox < Wo; ++ox) {
                            int ix = ox * stride + kx - pad;
                            if (ix >= 0 && ix < W) xrow[ix] += r[ox];
                        }
                    }
                }
            }
        }
    }
}

void maxpool_fwd(const real* x, int C, int H, int W, int k, real* out,
                 uint32_t* argmax) {
    int Ho = H / k, Wo = W / k;
    for (int c = 0; c < C; ++c) {
        const real* xc = x + int64_t(c) * H * W;
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                int iy0 = oy * k, ix0 = ox * k;
                real best = xc[int64_t(iy0) * W + ix0];
                uint32_t besti = uint32_t(int64_t(c) * H * W + int64_t(iy0) * W + ix0);
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        int64_t idx = int64_t(iy0 + dy) * W + (ix0 + dx);
                        real v = xc[idx];
                        if (v > best) { // strict: first index wins ties
                            best = v;
                            besti = uint32_t(int64_t(c) * H * W + idx);
                        }
                    }
                }
                int64_t o = int64_t(c) * Ho * Wo + int64_t(oy) * Wo + ox;
                out[o] = best;
                argmax[o] = besti;
            }
        }
    }
}

void maxpool_bwd(const real* gy, const uint32_t* argmax, int64_t out_n,
                 real* gx) {
    for (int64_t i = 0; i < out_n; ++i) gx[argmax[i]] += gy[i];
}

void upsample_fwd(const real* x, int C, int H, int W, int f, real* out) {
    int Ho = H * f, Wo = W * f;
    for (int c = 0; c < C; ++c) {
        const real* xc = x + int64_t(c) * H * W;
        real* oc = out + int64_t(c) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
            const real* xrow = xc + int64_t(oy / f) * W;
            real* orow = oc + int64_t(oy) * Wo;
            for (int ox = 0; ox < Wo; ++ox) orow[ox] = xrow[ox / f];
        }
    }
}

void upsample_bwd(const real* gy, int C, int H, int W, int f, real* gx) {
    int Ho = H * f, Wo = W * f;
    for (int c = 0; c < C; ++c) {
        const real* gc = gy + int64_t(c) * Ho * Wo;
        real* xc = gx + int64_t(c) * H * W;
        for (int oy = 0; oy < Ho; ++oy) {
            const real* grow = gc + int64_t(oy) * Wo;
            real* xrow = xc + int64_t(oy / f) * W;
            for (int ox = 0; ox < Wo; ++ox) xrow[ox / f] += grow[ox];
        }
    }
}

} // namespace tdcn::kernels
