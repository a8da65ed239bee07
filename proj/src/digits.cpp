#include "tdcn/digits.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tdcn/rng.hpp"

namespace tdcn {

namespace {

struct Seg {
    double x0, y0, x1, y1;
};

// Seven-segment layout in unit coordinates (y grows downward):
//   T: top bar, M: middle, B: bottom, TL/TR: upper verticals,
//   BL/BR: lower verticals.
constexpr Seg kT{0.25, 0.15, 0.75, 0.15};
constexpr Seg kM{0.25, 0.50, 0.75, 0.50};
constexpr Seg kB{0.25, 0.85, 0.75, 0.85};
constexpr Seg kTL{0.25, 0.15, 0.25, 0.50};
constexpr Seg kTR{0.75, 0.15, 0.75, 0.50};
constexpr Seg kBL{0.25, 0.50, 0.25, 0.85};
constexpr Seg kBR{0.75, 0.50, 0.75, 0.85};

const std::vector<Seg> kGlyphs[10] = {
    {kT, kB, kTL, kTR, kBL, kBR},       // 0
    {kTR, kBR},                         // 1
    {kT, kTR, kM, kBL, kB},             // 2
    {kT, kTR, kM, kBR, kB},             // 3
    {kTL, kTR, kM, kBR},                // 4
    {kT, kTL, kM, kBR, kB},             // 5
    {kT, kTL, kM, kBL, kBR, kB},        // 6
    {kT, kTR, kBR},                     // 7
    {kT, kM, kB, kTL, kTR, kBL, kBR},   // 8
    {kT, kTL, kTR, kM, kBR, kB},        // 9
};

double dist_to_seg(double px, double py, const Seg& s) {
    double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
    return std::hypot(px - cx, py - cy);
}

void render_digit(int digit, Xoshiro256& rng, uint8_t* out /* 28*28 */) {
    double theta = rng.uniform(-0.18, 0.18);
    double s = rng.uniform(0.82, 1.12);
    double dx = rng.uniform(-0.08, 0.08);
    double dy = rng.uniform(-0.08, 0.08);
    double thick = rng.uniform(1.5, 2.5);     // stroke half-width target, px
    double base = rng.uniform(170.0, 255.0);  // peak intensity
    double ct = std::cos(theta), st = std::sin(theta);

    // Jittered copy of the glyph, mapped to pixel space (22px box + margin).
    std::vector<Seg> segs = kGlyphs[digit];
    for (auto& g : segs) {
        auto warp = [&](double& x, double& y) {
            double ux = (x - 0.5) * s, uy = (y - 0.5) * s;
            double rx = ux * ct - uy * st, ry = ux * st + uy * ct;
            x = (rx + 0.5 + dx) * 22.0 + 3.0;
            y = (ry + 0.5 + dy) * 22.0 + 3.0;
        };
        warp(g.x0, g.y0);
        warp(g.x1, g.y1);
    }

    for (int py = 0; py < 28; ++py) {
        for (int px = 0; px < 28; ++px) {
            double d = 1e9;
            for (const auto& g : segs) d = std::min(d, dist_to_seg(px, py, g));
            // Soft-edged stroke.
            double v = base * std::clamp(1.0 - (d - thick * 0.5) / 1.2, 0.0, 1.0);
            v += rng.uniform(-10.0, 10.0);
            out[py * 28 + px] = uint8_t(std::clamp(v, 0.0, 255.0));
        }
    }
}

} // namespace

MnistData synth_digit_corpus(int n, uint64_t seed) {
    MnistData d;
    d.count = n;
    d.rows = 28;
    d.cols = 28;
    d.images.resize(size_t(n) * 28 * 28);
    d.labels.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        Xoshiro256 rng(derive_seed(seed, uint64_t(i)));
        int digit = int(rng.next_below(10));
        d.labels[i] = uint8_t(digit);
        render_digit(digit, rng, d.images.data() + size_t(i) * 28 * 28);
    }
    d.build_class_index();
    return d;
}

void write_digit_corpus(const MnistData& data, const std::string& dir, bool train) {
    std::string prefix = dir + "/" + (train ? "train" : "t10k");
    write_idx_images(prefix + "-images-idx3-ubyte", data.images, data.count,
                     data.rows, data.cols);
    write_idx_labels(prefix + "-labels-idx1-ubyte", data.labels);
}

} // namespace tdcn
