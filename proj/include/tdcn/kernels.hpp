#pragma once

#include <cstdint>

namespace tdcn {

#ifdef TDCN_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

namespace kernels {

// Row-major GEMM family, tight leading dimensions. The k-loop of every
// output element runs serially inside one thread, so results do not depend
// on the worker count.
//
//   gemm_nn: C(MxN)  = A(MxK)  * B(KxN)    [+= when accumulate]
//   gemm_tn: C(MxN)  = A(KxM)^T * B(KxN)   [+= when accumulate]
//   gemm_nt: C(MxN)  = A(MxK)  * B(NxK)^T  [+= when accumulate]
void gemm_nn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate);
void gemm_tn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate);
void gemm_nt(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate);

// Elementwise. The SIMD variants perform the same per-element operations in
// the same order as the scalar ones (no FMA contraction), so they are
// bit-exact equals.
void vadd(int64_t n, const real* a, const real* b, real* out);
void vmul(int64_t n, const real* a, const real* b, real* out);
void vmuladd(int64_t n, const real* a, const real* b, real* dst); // dst += a*b
void vaccum(int64_t n, const real* src, real* dst);               // dst += src
void vscale(int64_t n, real alpha, const real* x, real* out);
void vaxpy(int64_t n, real alpha, const real* x, real* y);        // y += alpha*x
void vrelu(int64_t n, const real* x, real* out);
// gx += gy where out > 0 (out is the forward relu output).
void vrelu_bwd(int64_t n, const real* out, const real* gy, real* gx);
// Bias-corrected Adam. bc1 = 1-beta1^t, bc2 = 1-beta2^t.
void vadam(int64_t n, real* p, const real* g, real* m, real* v, real lr,
           real beta1, real beta2, real eps, real bc1, real bc2);

// Active backend name: "avx2" or "scalar".
const char* backend();

namespace scalar {
void gemm_nn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate);
void gemm_tn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate);
void gemm_nt(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool accumulate);
void vadd(int64_t n, const real* a, const real* b, real* out);
void vmul(int64_t n, const real* a, const real* b, real* out);
void vmuladd(int64_t n, const real* a, const real* b, real* dst);
void vaccum(int64_t n, const real* src, real* dst);
void vscale(int64_t n, real alpha, const real* x, real* out);
void vaxpy(int64_t n, real alpha, const real* x, real* y);
void vrelu(int64_t n, const real* x, real* out);
void vrelu_bwd(int64_t n, const real* out, const real* gy, real* gx);
void vadam(int64_t n, real* p, const real* g, real* m, real* v, real lr,
           real beta1, real beta2, real eps, real bc1, real bc2);
} // namespace scalar

#ifndef TDCN_REAL_DOUBLE
// Present in the build whenever the compiler supports AVX2; call only when
// avx2_supported() (the dispatcher already honors this).
bool avx2_supported();
namespace avx2 {
void gemm_nn(int64_t M, int64_t N, int64_t K, const float* A, const float* B,
             float* C, bool accumulate);
void gemm_tn(int64_t M, int64_t N, int64_t K, const float* A, const float* B,
             float* C, bool accumulate);
void gemm_nt(int64_t M, int64_t N, int64_t K, const float* A, const float* B,
             float* C, bool accumulate);
void vadd(int64_t n, const float* a, const float* b, float* out);
void vmul(int64_t n, const float* a, const float* b, float* out);
void vmuladd(int64_t n, const float* a, const float* b, float* dst);
void vaccum(int64_t n, const float* src, float* dst);
void vscale(int64_t n, float alpha, const float* x, float* out);
void vaxpy(int64_t n, float alpha, const float* x, float* y);
void vrelu(int64_t n, const float* x, float* out);
void vrelu_bwd(int64_t n, const float* out, const float* gy, float* gx);
void vadam(int64_t n, float* p, const float* g, float* m, float* v, float lr,
           float beta1, float beta2, float eps, float bc1, float bc2);
} // namespace avx2
#endif

// Layout helpers shared by conv and pool code (scalar; memory movement).
// im2col writes patches as rows: P is (C*K*K) x (Hout*Wout).
void im2col(const real* x, int C, int H, int W, int K, int stride, int pad,
            real* P);
// col2im accumulates gP (same layout) back into gx (C x H x W).
void col2im(const real* gP, int C, int H, int W, int K, int stride, int pad,
            real* gx);
// Non-overlapping kxk max pool over one (C,H,W) image. argmax stores the
// flat input index chosen per output cell (first index wins ties).
void maxpool_fwd(const real* x, int C, int H, int W, int k, real* out,
                 uint32_t* argmax);
void maxpool_bwd(const real* gy, const uint32_t* argmax, int64_t out_n,
                 real* gx);
void upsample_fwd(const real* x, int C, int H, int W, int f, real* out);
void upsample_bwd(const real* gy, int C, int H, int W, int f, real* gx);

} // namespace kernels
} // namespace tdcn
