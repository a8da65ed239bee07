#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tdcn {

// MNIST-style source corpus: 28x28 u8 images with digit labels, plus
// per-class index lists for class-uniform draws.
struct MnistData {
    int count = 0;
    int rows = 0, cols = 0;
    std::vector<uint8_t> images; // count * rows * cols
    std::vector<uint8_t> labels; // count
    std::array<std::vector<int>, 10> by_class;

    const uint8_t* image(int i) const { return images.data() + int64_t(i) * rows * cols; }
    void build_class_index();
};

// Big-endian IDX readers; magic 0x00000803 (images) / 0x00000801 (labels).
std::vector<uint8_t> read_idx_images(const std::string& path, int& n, int& rows,
                                     int& cols);
std::vector<uint8_t> read_idx_labels(const std::string& path, int& n);

void write_idx_images(const std::string& path, const std::vector<uint8_t>& images,
                      int n, int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels);

// Loads an image/label pair, validating magics, sizes, the image/label count
// match and the 0..9 label range.
MnistData load_mnist(const std::string& images_path, const std::string& labels_path);

// Standard filenames under a directory: train-images-idx3-ubyte etc.
MnistData load_mnist_dir(const std::string& dir, bool train = true);

} // namespace tdcn
