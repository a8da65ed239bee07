#pragma once

#include <cstdint>

#include "tdcn/idx.hpp"

namespace tdcn {

// Deterministic procedural 28x28 digit corpus: seven-segment style glyphs
// with per-sample rotation, scale, shift, stroke width, intensity and pixel
// noise. Stands in for MNIST where the real files are unavailable; same
// shapes, labels and IDX layout.
MnistData synth_digit_corpus(int n, uint64_t seed);

// Writes a corpus as a standard IDX pair under dir using the MNIST
// filenames (train or t10k prefix).
void write_digit_corpus(const MnistData& data, const std::string& dir, bool train);

} // namespace tdcn
