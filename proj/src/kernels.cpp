#include "tdcn/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace tdcn::kernels {

#ifdef TDCN_REAL_DOUBLE

// 64-bit check builds run the scalar reference path only.
const char* backend() { return "scalar"; }

void gemm_nn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool acc) { scalar::gemm_nn(M, N, K, A, B, C, acc); }
void gemm_tn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool acc) { scalar::gemm_tn(M, N, K, A, B, C, acc); }
void gemm_nt(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool acc) { scalar::gemm_nt(M, N, K, A, B, C, acc); }
void vadd(int64_t n, const real* a, const real* b, real* o) { scalar::vadd(n, a, b, o); }
void vmul(int64_t n, const real* a, const real* b, real* o) { scalar::vmul(n, a, b, o); }
void vmuladd(int64_t n, const real* a, const real* b, real* d) { scalar::vmuladd(n, a, b, d); }
void vaccum(int64_t n, const real* s, real* d) { scalar::vaccum(n, s, d); }
void vscale(int64_t n, real al, const real* x, real* o) { scalar::vscale(n, al, x, o); }
void vaxpy(int64_t n, real al, const real* x, real* y) { scalar::vaxpy(n, al, x, y); }
void vrelu(int64_t n, const real* x, real* o) { scalar::vrelu(n, x, o); }
void vrelu_bwd(int64_t n, const real* ot, const real* gy, real* gx) {
    scalar::vrelu_bwd(n, ot, gy, gx);
}
void vadam(int64_t n, real* p, const real* g, real* m, real* v, real lr,
           real b1, real b2, real eps, real bc1, real bc2) {
    scalar::vadam(n, p, g, m, v, lr, b1, b2, eps, bc1, bc2);
}

#else

bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

struct Table {
    decltype(&scalar::gemm_nn) gemm_nn;
    decltype(&scalar::gemm_tn) gemm_tn;
    decltype(&scalar::gemm_nt) gemm_nt;
    decltype(&scalar::vadd) vadd;
    decltype(&scalar::vmul) vmul;
    decltype(&scalar::vmuladd) vmuladd;
    decltype(&scalar::vaccum) vaccum;
    decltype(&scalar::vscale) vscale;
    decltype(&scalar::vaxpy) vaxpy;
    decltype(&scalar::vrelu) vrelu;
    decltype(&scalar::vrelu_bwd) vrelu_bwd;
    decltype(&scalar::vadam) vadam;
    const char* name;
};

constexpr Table kScalar = {
    scalar::gemm_nn, scalar::gemm_tn, scalar::gemm_nt,
    scalar::vadd,    scalar::vmul,    scalar::vmuladd, scalar::vaccum,
    scalar::vscale,  scalar::vaxpy,   scalar::vrelu,   scalar::vrelu_bwd,
    scalar::vadam,   "scalar"};

constexpr Table kAvx2 = {
    avx2::gemm_nn, avx2::gemm_tn, avx2::gemm_nt,
    avx2::vadd,    avx2::vmul,    avx2::vmuladd, avx2::vaccum,
    avx2::vscale,  avx2::vaxpy,   avx2::vrelu,   avx2::vrelu_bwd,
    avx2::vadam,   "avx2"};

const Table& active() {
    static const Table& t = []() -> const Table& {
        if (const char* env = std::getenv("TDCN_SIMD")) {
            if (std::strcmp(env, "scalar") == 0) return kScalar;
            if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return kAvx2;
        }
        return avx2_supported() ? kAvx2 : kScalar;
    }();
    return t;
}

} // namespace

const char* backend() { return active().name; }

void gemm_nn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool acc) { active().gemm_nn(M, N, K, A, B, C, acc); }
void gemm_tn(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool acc) { active().gemm_tn(M, N, K, A, B, C, acc); }
void gemm_nt(int64_t M, int64_t N, int64_t K, const real* A, const real* B,
             real* C, bool acc) { active().gemm_nt(M, N, K, A, B, C, acc); }
void vadd(int64_t n, const real* a, const real* b, real* o) { active().vadd(n, a, b, o); }
void vmul(int64_t n, const real* a, const real* b, real* o) { active().vmul(n, a, b, o); }
void vmuladd(int64_t n, const real* a, const real* b, real* d) { active().vmuladd(n, a, b, d); }
void vaccum(int64_t n, const real* s, real* d) { active().vaccum(n, s, d); }
void vscale(int64_t n, real al, const real* x, real* o) { active().vscale(n, al, x, o); }
void vaxpy(int64_t n, real al, const real* x, real* y) { active().vaxpy(n, al, x, y); }
void vrelu(int64_t n, const real* x, real* o) { active().vrelu(n, x, o); }
void vrelu_bwd(int64_t n, const real* ot, const real* gy, real* gx) {
    active().vrelu_bwd(n, ot, gy, gx);
}
void vadam(int64_t n, real* p, const real* g, real* m, real* v, real lr,
           real b1, real b2, real eps, real bc1, real bc2) {
    active().vadam(n, p, g, m, v, lr, b1, b2, eps, bc1, bc2);
}

#endif // TDCN_REAL_DOUBLE

} // namespace tdcn::kernels
