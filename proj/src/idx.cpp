#include "tdcn/idx.hpp"

#include <cstdio>
#include <fstream>

#include "tdcn/errors.hpp"

namespace tdcn {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("idx: truncated header in " + path);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) |
           uint32_t(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

std::string hex(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

} // namespace

void MnistData::build_class_index() {
    for (auto& v : by_class) v.clear();
    for (int i = 0; i < count; ++i) by_class[labels[i]].push_back(i);
}

std::vector<uint8_t> read_idx_images(const std::string& path, int& n, int& rows,
                                     int& cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("idx: cannot open " + path);
    uint32_t magic = read_be32(in, path);
    if (magic != kImagesMagic)
        throw FormatError("idx: bad image magic in " + path + ": expected " +
                          hex(kImagesMagic) + ", got " + hex(magic));
    n = int(read_be32(in, path));
    rows = int(read_be32(in, path));
    cols = int(read_be32(in, path));
    std::vector<uint8_t> data(size_t(n) * rows * cols);
    if (!in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size())))
        throw FormatError("idx: truncated image data in " + path + " (expected " +
                          std::to_string(data.size()) + " bytes)");
    return data;
}

std::vector<uint8_t> read_idx_labels(const std::string& path, int& n) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("idx: cannot open " + path);
    uint32_t magic = read_be32(in, path);
    if (magic != kLabelsMagic)
        throw FormatError("idx: bad label magic in " + path + ": expected " +
                          hex(kLabelsMagic) + ", got " + hex(magic));
    n = int(read_be32(in, path));
    std::vector<uint8_t> data(static_cast<size_t>(n), uint8_t(0));
    if (!in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size())))
        throw FormatError("idx: truncated label data in " + path);
    return data;
}

void write_idx_images(const std::string& path, const std::vector<uint8_t>& images,
                      int n, int rows, int cols) {
    if (images.size() != size_t(n) * rows * cols)
        throw FormatError("idx: image buffer size mismatch for " + path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("idx: cannot write " + path);
    write_be32(out, kImagesMagic);
    write_be32(out, uint32_t(n));
    write_be32(out, uint32_t(rows));
    write_be32(out, uint32_t(cols));
    out.write(reinterpret_cast<const char*>(images.data()),
              std::streamsize(images.size()));
}

void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("idx: cannot write " + path);
    write_be32(out, kLabelsMagic);
    write_be32(out, uint32_t(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              std::streamsize(labels.size()));
}

MnistData load_mnist(const std::string& images_path, const std::string& labels_path) {
    MnistData d;
    d.images = read_idx_images(images_path, d.count, d.rows, d.cols);
    int label_count = 0;
    d.labels = read_idx_labels(labels_path, label_count);
    if (label_count != d.count)
        throw FormatError("idx: " + std::to_string(d.count) + " images but " +
                          std::to_string(label_count) + " labels");
    for (int i = 0; i < d.count; ++i)
        if (d.labels[i] > 9)
            throw FormatError("idx: label " + std::to_string(int(d.labels[i])) +
                              " at index " + std::to_string(i) + " outside 0..9");
    d.build_class_index();
    return d;
}

MnistData load_mnist_dir(const std::string& dir, bool train) {
    std::string prefix = dir + "/" + (train ? "train" : "t10k");
    return load_mnist(prefix + "-images-idx3-ubyte", prefix + "-labels-idx1-ubyte");
}

} // namespace tdcn
