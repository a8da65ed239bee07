#pragma once

#include <algorithm>
#include <fstream>
#include <string>

#include "tdcn/errors.hpp"
#include "tdcn/tensor.hpp"

namespace tdcn {

// 8-bit binary PGM (P5) of a single-channel map, max-normalized.
inline void write_pgm(const std::string& path, const Tensor& map) {
    int rank = map.shape().rank();
    int h, w;
    if (rank == 2) {
        h = map.dim(0);
        w = map.dim(1);
    } else if (rank == 4 && map.dim(0) == 1 && map.dim(1) == 1) {
        h = map.dim(2);
        w = map.dim(3);
    } else {
        throw ShapeError("pgm: expected (H,W) or (1,1,H,W) map, got " +
                         map.shape().str());
    }
    const real* p = map.data();
    real mx = 0;
    for (int64_t i = 0; i < map.numel(); ++i) mx = std::max(mx, p[i]);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("pgm: cannot write " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    for (int64_t i = 0; i < map.numel(); ++i) {
        double v = mx > 0 ? double(p[i]) / double(mx) : 0.0;
        f.put(char(uint8_t(std::clamp(v * 255.0 + 0.5, 0.0, 255.0))));
    }
    if (!f) throw FormatError("pgm: write failed for " + path);
}

} // namespace tdcn
