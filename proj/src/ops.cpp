#include "tdcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tdcn/threadpool.hpp"

namespace tdcn {

namespace {

using kernels::im2col;

constexpr real kProbFloor = real(1e-12);
constexpr int kConvChunk = 8; // images per worker chunk in conv loops

void check_rank(const Tensor& t, int rank, const char* what) {
    if (t.shape().rank() != rank)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + t.shape().str());
}

bool want_grad(Tape* tape, std::initializer_list<const Tensor*> ins) {
    if (!tape) return false;
    for (const Tensor* t : ins)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

} // namespace

Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b,
              int stride, int pad) {
    check_rank(x, 4, "conv2d input");
    check_rank(w, 4, "conv2d weight");
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (pad < 0) throw ShapeError("conv2d: pad must be >= 0");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int O = w.dim(0), I = w.dim(1), K = w.dim(2);
    if (w.dim(3) != K)
        throw ShapeError("conv2d: kernel must be square, got " + w.shape().str());
    if (I != C)
        throw ShapeError("conv2d: input channels " + std::to_string(C) +
                         " != weight in-channels " + std::to_string(I));
    if (b.defined() && (b.shape().rank() != 1 || b.dim(0) != O))
        throw ShapeError("conv2d: bias shape " + b.shape().str() + " != (" +
                         std::to_string(O) + ")");
    if (H + 2 * pad < K || W + 2 * pad < K)
        throw ShapeError("conv2d: kernel " + std::to_string(K) +
                         " larger than padded input " + x.shape().str());

    int Ho = (H + 2 * pad - K) / stride + 1;
    int Wo = (W + 2 * pad - K) / stride + 1;
    int64_t HWo = int64_t(Ho) * Wo;
    int64_t CKK = int64_t(C) * K * K;
    int64_t in_sz = int64_t(C) * H * W;
    int64_t out_sz = int64_t(O) * HWo;

    // 1x1 stride-1 unpadded convolutions (laterals, gates, heads) skip the
    // patch lowering entirely: the input already is the patch matrix.
    bool pointwise = K == 1 && stride == 1 && pad == 0;

    Tensor out({N, O, Ho, Wo});
    const real* xp = x.data();
    const real* wp = w.data();
    const real* bp = b.defined() ? b.data() : nullptr;
    real* op = out.data();

    parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
        std::vector<real> col(pointwise ? 0 : CKK * HWo);
        for (int64_t n = nb; n < ne; ++n) {
            const real* patches = xp + n * in_sz;
            if (!pointwise) {
                im2col(patches, C, H, W, K, stride, pad, col.data());
                patches = col.data();
            }
            real* o = op + n * out_sz;
            kernels::gemm_nn(O, HWo, CKK, wp, patches, o, false);
            if (bp)
                for (int oc = 0; oc < O; ++oc) {
                    real bv = bp[oc];
                    real* row = o + int64_t(oc) * HWo;
                    for (int64_t j = 0; j < HWo; ++j) row[j] += bv;
                }
        }
    });

    if (want_grad(tape, {&x, &w, &b})) {
        out.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, oc = out;
        tape->record(
            [xc, wc, bc, oc, N, C, H, W, O, K, stride, pad, Ho, Wo]() mutable {
                int64_t HWo = int64_t(Ho) * Wo;
                int64_t CKK = int64_t(C) * K * K;
                int64_t in_sz = int64_t(C) * H * W;
                int64_t out_sz = int64_t(O) * HWo;
                const real* gy = oc.grad();
                const real* xp = xc.data();
                const real* wp = wc.data();
                bool pointwise = K == 1 && stride == 1 && pad == 0;

                if (xc.requires_grad()) {
                    real* gx = xc.grad();
                    parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
                        std::vector<real> gcol(pointwise ? 0 : CKK * HWo);
                        for (int64_t n = nb; n < ne; ++n) {
                            if (pointwise) {
                                kernels::gemm_tn(CKK, HWo, O, wp, gy + n * out_sz,
                                                 gx + n * in_sz, true);
                            } else {
                                kernels::gemm_tn(CKK, HWo, O, wp, gy + n * out_sz,
                                                 gcol.data(), false);
                                kernels::col2im(gcol.data(), C, H, W, K, stride, pad,
                                                gx + n * in_sz);
                            }
                        }
                    });
                }
                if (wc.requires_grad()) {
                    // Per-chunk partials, reduced serially in chunk order so the
                    // result is independent of the worker count.
                    int64_t chunks = chunk_count(N, kConvChunk);
                    std::vector<std::vector<real>> partial(chunks);
                    parallel_chunks(N, kConvChunk, [&](int64_t c, int64_t nb, int64_t ne) {
                        partial[c].assign(wc.numel(), real(0));
                        std::vector<real> col(pointwise ? 0 : CKK * HWo);
                        for (int64_t n = nb; n < ne; ++n) {
                            const real* patches = xp + n * in_sz;
                            if (!pointwise) {
                                im2col(patches, C, H, W, K, stride, pad, col.data());
                                patches = col.data();
                            }
                            kernels::gemm_nt(O, CKK, HWo, gy + n * out_sz, patches,
                                             partial[c].data(), true);
                        }
                    });
                    real* gw = wc.grad();
                    for (int64_t c = 0; c < chunks; ++c)
                        kernels::vaccum(wc.numel(), partial[c].data(), gw);
                }
                if (bc.defined() && bc.requires_grad()) {
                    // Per-chunk partials over the batch, reduced in chunk order.
                    int64_t chunks = chunk_count(N, kConvChunk);
                    std::vector<std::vector<real>> partial(chunks);
                    parallel_chunks(N, kConvChunk, [&](int64_t c, int64_t nb, int64_t ne) {
                        partial[c].assign(size_t(O), real(0));
                        for (int64_t n = nb; n < ne; ++n)
                            for (int o = 0; o < O; ++o) {
                                const real* row = gy + n * out_sz + int64_t(o) * HWo;
                                real acc = 0;
                                for (int64_t j = 0; j < HWo; ++j) acc += row[j];
                                partial[c][o] += acc;
                            }
                    });
                    real* gb = bc.grad();
                    for (int64_t c = 0; c < chunks; ++c)
                        kernels::vaccum(O, partial[c].data(), gb);
                }
            },
            {&x, &w, &b}, out);
    }
    return out;
}

Tensor linear(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank(x, 2, "linear input");
    check_rank(w, 2, "linear weight");
    int N = x.dim(0), D = x.dim(1);
    int M = w.dim(0);
    if (w.dim(1) != D)
        throw ShapeError("linear: input dim " + std::to_string(D) +
                         " != weight in-dim " + std::to_string(w.dim(1)));
    if (b.defined() && (b.shape().rank() != 1 || b.dim(0) != M))
        throw ShapeError("linear: bias shape " + b.shape().str() + " != (" +
                         std::to_string(M) + ")");

    Tensor out({N, M});
    kernels::gemm_nt(N, M, D, x.data(), w.data(), out.data(), false);
    if (b.defined()) {
        real* op = out.data();
        const real* bp = b.data();
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m) op[int64_t(n) * M + m] += bp[m];
    }

    if (want_grad(tape, {&x, &w, &b})) {
        out.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, oc = out;
        tape->record(
            [xc, wc, bc, oc, N, D, M]() mutable {
                const real* gy = oc.grad();
                if (xc.requires_grad())
                    kernels::gemm_nn(N, D, M, gy, wc.data(), xc.grad(), true);
                if (wc.requires_grad())
                    kernels::gemm_tn(M, D, N, gy, xc.data(), wc.grad(), true);
                if (bc.defined() && bc.requires_grad()) {
                    real* gb = bc.grad();
                    for (int n = 0; n < N; ++n)
                        for (int m = 0; m < M; ++m) gb[m] += gy[int64_t(n) * M + m];
                }
            },
            {&x, &w, &b}, out);
    }
    return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
    Tensor out(x.shape());
    const real* xp = x.data();
    real* op = out.data();
    parallel_for(x.numel(), [&](int64_t b, int64_t e) {
        kernels::vrelu(e - b, xp + b, op + b);
    });
    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record(
            [xc, oc]() mutable {
                // out > 0 iff x > 0, so the output doubles as the mask; the
                // gradient at exactly 0 is 0.
                const real* o = oc.data();
                const real* gy = oc.grad();
                real* gx = xc.grad();
                parallel_for(oc.numel(), [&](int64_t b, int64_t e) {
                    kernels::vrelu_bwd(e - b, o + b, gy + b, gx + b);
                });
            },
            {&x}, out);
    }
    return out;
}

Tensor maxpool2d(Tape* tape, const Tensor& x, int k) {
    check_rank(x, 4, "maxpool2d input");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (k < 1) throw ShapeError("maxpool2d: k must be >= 1");
    if (H % k != 0)
        throw ShapeError("maxpool2d: height " + std::to_string(H) +
                         " not divisible by " + std::to_string(k));
    if (W % k != 0)
        throw ShapeError("maxpool2d: width " + std::to_string(W) +
                         " not divisible by " + std::to_string(k));
    int Ho = H / k, Wo = W / k;
    Tensor out({N, C, Ho, Wo});
    int64_t in_sz = int64_t(C) * H * W;
    int64_t out_sz = int64_t(C) * Ho * Wo;
    auto argmax = std::make_shared<std::vector<uint32_t>>(int64_t(N) * out_sz);

    const real* xp = x.data();
    real* op = out.data();
    parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
        for (int64_t n = nb; n < ne; ++n)
            kernels::maxpool_fwd(xp + n * in_sz, C, H, W, k, op + n * out_sz,
                                 argmax->data() + n * out_sz);
    });

    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record(
            [xc, oc, argmax, N, in_sz, out_sz]() mutable {
                const real* gy = oc.grad();
                real* gx = xc.grad();
                parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
                    for (int64_t n = nb; n < ne; ++n)
                        kernels::maxpool_bwd(gy + n * out_sz,
                                             argmax->data() + n * out_sz, out_sz,
                                             gx + n * in_sz);
                });
            },
            {&x}, out);
    }
    return out;
}

Tensor upsample_nearest(Tape* tape, const Tensor& x, int factor) {
    check_rank(x, 4, "upsample_nearest input");
    if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out({N, C, H * factor, W * factor});
    int64_t in_sz = int64_t(C) * H * W;
    int64_t out_sz = in_sz * factor * factor;
    const real* xp = x.data();
    real* op = out.data();
    parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
        for (int64_t n = nb; n < ne; ++n)
            kernels::upsample_fwd(xp + n * in_sz, C, H, W, factor, op + n * out_sz);
    });

    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record(
            [xc, oc, N, C, H, W, factor, in_sz, out_sz]() mutable {
                const real* gy = oc.grad();
                real* gx = xc.grad();
                parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
                    for (int64_t n = nb; n < ne; ++n)
                        kernels::upsample_bwd(gy + n * out_sz, C, H, W, factor,
                                              gx + n * in_sz);
                });
            },
            {&x}, out);
    }
    return out;
}

namespace {

// Softmax groups: `rows` independent groups of `len` contiguous elements.
void softmax_rows(const real* x, real* y, int64_t rows, int64_t len) {
    for (int64_t r = 0; r < rows; ++r) {
        const real* xr = x + r * len;
        real* yr = y + r * len;
        real mx = xr[0];
        for (int64_t i = 1; i < len; ++i) mx = std::max(mx, xr[i]);
        double sum = 0;
        for (int64_t i = 0; i < len; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            sum += yr[i];
        }
        real inv = real(1.0 / sum);
        for (int64_t i = 0; i < len; ++i) yr[i] *= inv;
    }
}

} // namespace

Tensor softmax(Tape* tape, const Tensor& x, SoftmaxAxis axis) {
    int64_t rows, len;
    if (axis == SoftmaxAxis::Classes) {
        check_rank(x, 2, "softmax(classes) input");
        rows = x.dim(0);
        len = x.dim(1);
    } else {
        check_rank(x, 4, "softmax(spatial) input");
        rows = int64_t(x.dim(0)) * x.dim(1);
        len = int64_t(x.dim(2)) * x.dim(3);
    }
    Tensor out(x.shape());
    {
        const real* xp = x.data();
        real* op = out.data();
        parallel_chunks(rows, 8, [&](int64_t, int64_t rb, int64_t re) {
            softmax_rows(xp + rb * len, op + rb * len, re - rb, len);
        });
    }

    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record(
            [xc, oc, rows, len]() mutable {
                const real* y = oc.data();
                const real* gy = oc.grad();
                real* gx = xc.grad();
                parallel_chunks(rows, 8, [&](int64_t, int64_t rb, int64_t re) {
                    for (int64_t r = rb; r < re; ++r) {
                        const real* yr = y + r * len;
                        const real* gr = gy + r * len;
                        real* xr = gx + r * len;
                        double dot = 0;
                        for (int64_t i = 0; i < len; ++i) dot += double(gr[i]) * yr[i];
                        real d = real(dot);
                        for (int64_t i = 0; i < len; ++i) xr[i] += yr[i] * (gr[i] - d);
                    }
                });
            },
            {&x}, out);
    }
    return out;
}

Tensor cross_entropy_hard(Tape* tape, const Tensor& probs,
                          const std::vector<int>& targets) {
    check_rank(probs, 2, "cross_entropy(hard) probs");
    int N = probs.dim(0), D = probs.dim(1);
    if (static_cast<int>(targets.size()) != N)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for batch " + std::to_string(N));
    for (int n = 0; n < N; ++n)
        if (targets[n] < 0 || targets[n] >= D)
            throw ShapeError("cross_entropy: target " + std::to_string(targets[n]) +
                             " out of range [0," + std::to_string(D) + ")");

    const real* p = probs.data();
    double loss = 0;
    for (int n = 0; n < N; ++n) {
        real pv = std::clamp(p[int64_t(n) * D + targets[n]], kProbFloor, real(1));
        loss -= std::log(double(pv));
    }
    Tensor out = Tensor::from({1}, {real(loss / N)});

    if (want_grad(tape, {&probs})) {
        out.set_requires_grad(true);
        Tensor pc = probs, oc = out;
        auto tgt = std::make_shared<std::vector<int>>(targets);
        tape->record(
            [pc, oc, tgt, N, D]() mutable {
                real go = oc.grad()[0];
                const real* p = pc.data();
                real* gp = pc.grad();
                for (int n = 0; n < N; ++n) {
                    int64_t idx = int64_t(n) * D + (*tgt)[n];
                    if (p[idx] >= kProbFloor) // clamped region has zero slope
                        gp[idx] -= go / (real(N) * std::min(p[idx], real(1)));
                }
            },
            {&probs}, out);
    }
    return out;
}

Tensor cross_entropy_soft(Tape* tape, const Tensor& probs, const Tensor& target) {
    if (probs.shape() != target.shape())
        throw ShapeError("cross_entropy(soft): probs " + probs.shape().str() +
                         " vs target " + target.shape().str());
    if (probs.shape().rank() < 2)
        throw ShapeError("cross_entropy(soft): expected batched input, got " +
                         probs.shape().str());
    int N = probs.dim(0);
    int64_t S = probs.numel() / N;
    const real* t = target.data();
    for (int n = 0; n < N; ++n) {
        double tsum = 0;
        for (int64_t i = 0; i < S; ++i) {
            real tv = t[n * S + i];
            if (tv < 0)
                throw Error("cross_entropy(soft): negative target value at sample " +
                            std::to_string(n));
            tsum += tv;
        }
        if (std::abs(tsum - 1.0) > 1e-5)
            throw Error("cross_entropy(soft): target of sample " + std::to_string(n) +
                        " sums to " + std::to_string(tsum) + ", not 1");
    }

    const real* p = probs.data();
    double loss = 0;
    for (int64_t i = 0; i < int64_t(N) * S; ++i) {
        if (t[i] == real(0)) continue;
        real pv = std::clamp(p[i], kProbFloor, real(1));
        loss -= double(t[i]) * std::log(double(pv));
    }
    Tensor out = Tensor::from({1}, {real(loss / N)});

    if (want_grad(tape, {&probs, &target})) {
        out.set_requires_grad(true);
        Tensor pc = probs, tc = target, oc = out;
        tape->record(
            [pc, tc, oc, N, S]() mutable {
                real go = oc.grad()[0];
                const real* p = pc.data();
                const real* t = tc.data();
                if (pc.requires_grad()) {
                    real* gp = pc.grad();
                    for (int64_t i = 0; i < int64_t(N) * S; ++i) {
                        if (t[i] == real(0) || p[i] < kProbFloor) continue;
                        gp[i] -= go * t[i] / (real(N) * std::min(p[i], real(1)));
                    }
                }
                if (tc.requires_grad()) {
                    real* gt = tc.grad();
                    for (int64_t i = 0; i < int64_t(N) * S; ++i) {
                        real pv = std::clamp(p[i], kProbFloor, real(1));
                        gt[i] -= go * std::log(pv) / real(N);
                    }
                }
            },
            {&probs, &target}, out);
    }
    return out;
}

namespace {

enum class Bcast { Equal, Channel, Tail };

Bcast resolve_bcast(const Shape& a, const Shape& b) {
    if (a == b) return Bcast::Equal;
    if (b.rank() == 1 && (a.rank() == 3 || a.rank() == 4)) {
        int cdim = a.rank() == 4 ? 1 : 0;
        if (a[cdim] == b[0]) return Bcast::Channel;
    }
    if (b.rank() == a.rank() - 1) {
        bool ok = true;
        for (int i = 0; i < b.rank(); ++i) ok = ok && a[i + 1] == b[i];
        if (ok) return Bcast::Tail;
    }
    throw ShapeError("ewise: cannot broadcast " + b.str() + " over " + a.str());
}

} // namespace

Tensor ewise(Tape* tape, const Tensor& a, const Tensor& b, EwiseOp op) {
    Bcast kind = resolve_bcast(a.shape(), b.shape());
    Tensor out(a.shape());
    const real* ap = a.data();
    const real* bp = b.data();
    real* op_ = out.data();
    int64_t n_total = a.numel();

    if (kind == Bcast::Equal) {
        parallel_for(n_total, [&](int64_t lo, int64_t hi) {
            if (op == EwiseOp::Add)
                kernels::vadd(hi - lo, ap + lo, bp + lo, op_ + lo);
            else
                kernels::vmul(hi - lo, ap + lo, bp + lo, op_ + lo);
        });
    } else if (kind == Bcast::Channel) {
        int rank = a.shape().rank();
        int64_t N = rank == 4 ? a.dim(0) : 1;
        int64_t C = rank == 4 ? a.dim(1) : a.dim(0);
        int64_t S = a.numel() / (N * C);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const real* as = ap + (n * C + c) * S;
                real* os = op_ + (n * C + c) * S;
                real bv = bp[c];
                if (op == EwiseOp::Add)
                    for (int64_t i = 0; i < S; ++i) os[i] = as[i] + bv;
                else
                    kernels::vscale(S, bv, as, os);
            }
    } else { // Tail
        int64_t N = a.dim(0);
        int64_t S = b.numel();
        parallel_chunks(N, kConvChunk, [&](int64_t, int64_t nb, int64_t ne) {
            for (int64_t n = nb; n < ne; ++n) {
                if (op == EwiseOp::Add)
                    kernels::vadd(S, ap + n * S, bp, op_ + n * S);
                else
                    kernels::vmul(S, ap + n * S, bp, op_ + n * S);
            }
        });
    }

    if (want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        tape->record(
            [ac, bc, oc, op, kind]() mutable {
                const real* gy = oc.grad();
                int64_t n_total = ac.numel();
                if (kind == Bcast::Equal) {
                    real* ga = ac.requires_grad() ? ac.grad() : nullptr;
                    real* gb = bc.requires_grad() ? bc.grad() : nullptr;
                    const real* ad = ac.data();
                    const real* bd = bc.data();
                    parallel_for(n_total, [&](int64_t lo, int64_t hi) {
                        if (op == EwiseOp::Add) {
                            if (ga) kernels::vaccum(hi - lo, gy + lo, ga + lo);
                            if (gb) kernels::vaccum(hi - lo, gy + lo, gb + lo);
                        } else {
                            if (ga) kernels::vmuladd(hi - lo, gy + lo, bd + lo, ga + lo);
                            if (gb) kernels::vmuladd(hi - lo, gy + lo, ad + lo, gb + lo);
                        }
                    });
                    return;
                }
                if (kind == Bcast::Channel) {
                    int rank = ac.shape().rank();
                    int64_t N = rank == 4 ? ac.dim(0) : 1;
                    int64_t C = rank == 4 ? ac.dim(1) : ac.dim(0);
                    int64_t S = n_total / (N * C);
                    for (int64_t n = 0; n < N; ++n)
                        for (int64_t c = 0; c < C; ++c) {
                            const real* gs = gy + (n * C + c) * S;
                            if (op == EwiseOp::Add) {
                                if (ac.requires_grad())
                                    kernels::vaccum(S, gs, ac.grad() + (n * C + c) * S);
                                if (bc.requires_grad()) {
                                    double acc = 0;
                                    for (int64_t i = 0; i < S; ++i) acc += gs[i];
                                    bc.grad()[c] += real(acc);
                                }
                            } else {
                                if (ac.requires_grad())
                                    kernels::vaxpy(S, bc.data()[c], gs,
                                                   ac.grad() + (n * C + c) * S);
                                if (bc.requires_grad()) {
                                    const real* as = ac.data() + (n * C + c) * S;
                                    double acc = 0;
                                    for (int64_t i = 0; i < S; ++i)
                                        acc += double(gs[i]) * as[i];
                                    bc.grad()[c] += real(acc);
                                }
                            }
                        }
                    return;
                }
                // Tail
                int64_t N = ac.dim(0);
                int64_t S = bc.numel();
                for (int64_t n = 0; n < N; ++n) {
                    const real* gs = gy + n * S;
                    if (op == EwiseOp::Add) {
                        if (ac.requires_grad()) kernels::vaccum(S, gs, ac.grad() + n * S);
                        if (bc.requires_grad()) kernels::vaccum(S, gs, bc.grad());
                    } else {
                        if (ac.requires_grad())
                            kernels::vmuladd(S, gs, bc.data(), ac.grad() + n * S);
                        if (bc.requires_grad())
                            kernels::vmuladd(S, gs, ac.data() + n * S, bc.grad());
                    }
                }
            },
            {&a, &b}, out);
    }
    return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
    double acc = 0;
    const real* xp = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) acc += xp[i];
    Tensor out = Tensor::from({1}, {real(acc)});
    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record(
            [xc, oc]() mutable {
                real go = oc.grad()[0];
                real* gx = xc.grad();
                for (int64_t i = 0; i < xc.numel(); ++i) gx[i] += go;
            },
            {&x}, out);
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& x, real alpha) {
    Tensor out(x.shape());
    kernels::vscale(x.numel(), alpha, x.data(), out.data());
    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record(
            [xc, oc, alpha]() mutable {
                kernels::vaxpy(xc.numel(), alpha, oc.grad(), xc.grad());
            },
            {&x}, out);
    }
    return out;
}

Tensor embed_row_broadcast(Tape* tape, const Tensor& E, int row, int H, int W) {
    check_rank(E, 2, "embed table");
    int T = E.dim(0), C = E.dim(1);
    if (row < 0 || row >= T)
        throw ShapeError("embed: row " + std::to_string(row) + " out of range [0," +
                         std::to_string(T) + ")");
    Tensor out({C, H, W});
    int64_t S = int64_t(H) * W;
    const real* e = E.data() + int64_t(row) * C;
    real* op = out.data();
    for (int c = 0; c < C; ++c) std::fill(op + c * S, op + (c + 1) * S, e[c]);

    if (want_grad(tape, {&E})) {
        out.set_requires_grad(true);
        Tensor ec = E, oc = out;
        tape->record(
            [ec, oc, row, C, S]() mutable {
                const real* gy = oc.grad();
                real* ge = ec.grad() + int64_t(row) * C;
                for (int c = 0; c < C; ++c) {
                    double acc = 0;
                    for (int64_t i = 0; i < S; ++i) acc += gy[c * S + i];
                    ge[c] += real(acc);
                }
            },
            {&E}, out);
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& t) {
    check_rank(t, 2, "argmax_rows input");
    int N = t.dim(0), D = t.dim(1);
    std::vector<int> out(N);
    const real* p = t.data();
    for (int n = 0; n < N; ++n) {
        const real* row = p + int64_t(n) * D;
        int best = 0;
        for (int d = 1; d < D; ++d)
            if (row[d] > row[best]) best = d;
        out[n] = best;
    }
    return out;
}

} // namespace tdcn
