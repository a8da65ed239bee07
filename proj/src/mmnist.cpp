#include "tdcn/mmnist.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tdcn/errors.hpp"
#include "tdcn/rng.hpp"
#include "tdcn/threadpool.hpp"

namespace tdcn {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'N', 'I', 'S', 'T', '0', '1'};
constexpr uint32_t kVersion = 1;

void check_grid(int rows, int cols) {
    bool ok = (rows == 1 && cols == 2) || (rows == 2 && cols == 2) ||
              (rows == 3 && cols == 3);
    if (!ok)
        throw Error("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " unsupported; use 1x2, 2x2 or 3x3");
}

// Pastes a 28x28 digit at cell (r,c); overlapping strokes keep the brighter
// pixel.
void paste(MultiMnistSample& s, int W, int r, int c, const uint8_t* digit) {
    int y0 = r * kGridStride, x0 = c * kGridStride;
    for (int y = 0; y < kDigitSize; ++y) {
        uint8_t* row = s.pixels.data() + size_t(y0 + y) * W + x0;
        const uint8_t* src = digit + y * kDigitSize;
        for (int x = 0; x < kDigitSize; ++x) row[x] = std::max(row[x], src[x]);
    }
}

MultiMnistSample blank_sample(int rows, int cols, int H, int W) {
    MultiMnistSample s;
    s.pixels.assign(size_t(H) * W, 0);
    s.cell_labels.assign(size_t(rows) * cols, 0);
    s.centers.resize(size_t(rows) * cols);
    return s;
}

void place_cell(MultiMnistSample& s, const MnistData& mnist, int cols, int W,
                int r, int c, int digit_class, Xoshiro256& rng) {
    const auto& pool = mnist.by_class[digit_class];
    int img = pool[rng.next_below(pool.size())];
    paste(s, W, r, c, mnist.image(img));
    int cell = r * cols + c;
    s.cell_labels[cell] = uint8_t(digit_class);
    s.centers[cell] = {uint16_t(r * kGridStride + kDigitSize / 2),
                       uint16_t(c * kGridStride + kDigitSize / 2)};
}

void check_source(const MnistData& mnist) {
    if (mnist.count == 0) throw Error("empty MNIST source");
    for (int c = 0; c < 10; ++c)
        if (mnist.by_class[c].empty())
            throw Error("MNIST source has no images of digit " + std::to_string(c));
    if (mnist.rows != kDigitSize || mnist.cols != kDigitSize)
        throw Error("MNIST source images must be 28x28");
}

} // namespace

MultiMnistDataset gen_by_loc(const MnistData& mnist, int rows, int cols, int n,
                             uint64_t seed) {
    check_grid(rows, cols);
    check_source(mnist);
    MultiMnistDataset ds;
    ds.n = uint32_t(n);
    ds.H = uint16_t(canvas_height(rows));
    ds.W = uint16_t(canvas_width(cols));
    ds.rows = uint8_t(rows);
    ds.cols = uint8_t(cols);
    ds.family = TaskFamily::ByLoc;
    ds.seed = seed;
    ds.samples.resize(n);
    parallel_chunks(n, 256, [&](int64_t, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            Xoshiro256 rng(derive_seed(seed, uint64_t(i)));
            MultiMnistSample s = blank_sample(rows, cols, ds.H, ds.W);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    int cls = int(rng.next_below(10));
                    place_cell(s, mnist, cols, ds.W, r, c, cls, rng);
                }
            ds.samples[i] = std::move(s);
        }
    });
    return ds;
}

MultiMnistDataset gen_by_ref(const MnistData& mnist, int rows, int cols, int n,
                             uint64_t seed) {
    if (rows != 3 || cols != 3) throw Error("by-ref datasets use the 3x3 grid");
    check_source(mnist);
    MultiMnistDataset ds;
    ds.n = uint32_t(n);
    ds.H = uint16_t(canvas_height(rows));
    ds.W = uint16_t(canvas_width(cols));
    ds.rows = uint8_t(rows);
    ds.cols = uint8_t(cols);
    ds.family = TaskFamily::ByRef;
    ds.seed = seed;
    ds.samples.resize(n);
    parallel_chunks(n, 256, [&](int64_t, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            Xoshiro256 rng(derive_seed(seed, uint64_t(i)));
            int ref = int(i % 10); // balanced per-task splits
            MultiMnistSample s = blank_sample(rows, cols, ds.H, ds.W);
            int pos = int(rng.next_below(uint64_t(rows) * (cols - 1)));
            int ref_r = pos / (cols - 1), ref_c = pos % (cols - 1);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    int cls;
                    if (r == ref_r && c == ref_c) {
                        cls = ref;
                    } else {
                        cls = int(rng.next_below(9));
                        if (cls >= ref) ++cls;
                    }
                    place_cell(s, mnist, cols, ds.W, r, c, cls, rng);
                }
            s.ref_digit = uint8_t(ref);
            s.answer = s.cell_labels[ref_r * cols + ref_c + 1];
            ds.samples[i] = std::move(s);
        }
    });
    return ds;
}

Tensor gaussian_target(int row, int col, int h, int w, double sigma) {
    if (row < 0 || row >= h || col < 0 || col >= w)
        throw Error("gaussian_target: center (" + std::to_string(row) + "," +
                    std::to_string(col) + ") outside " + std::to_string(h) + "x" +
                    std::to_string(w) + " map");
    Tensor t({1, 1, h, w});
    real* p = t.data();
    double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    double sum = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d2 = double(y - row) * (y - row) + double(x - col) * (x - col);
            double v = std::exp(-d2 * inv2s2);
            p[int64_t(y) * w + x] = real(v);
            sum += v;
        }
    real inv = real(1.0 / sum);
    for (int64_t i = 0; i < t.numel(); ++i) p[i] *= inv;
    return t;
}

namespace {

template <class T>
void put_le(std::string& out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
        out.push_back(char((uint64_t(v) >> (8 * i)) & 0xFF));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw FormatError("dataset: " + path + " truncated at byte " +
                              std::to_string(pos));
    }
    template <class T>
    T get_le() {
        need(sizeof(T));
        uint64_t v = 0;
        for (size_t i = 0; i < sizeof(T); ++i)
            v |= uint64_t(uint8_t(buf[pos + i])) << (8 * i);
        pos += sizeof(T);
        return T(v);
    }
    void get_bytes(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    }
};

} // namespace

void write_dataset(const MultiMnistDataset& ds, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_le<uint32_t>(out, kVersion);
    put_le<uint32_t>(out, ds.n);
    put_le<uint16_t>(out, ds.H);
    put_le<uint16_t>(out, ds.W);
    out.push_back(char(ds.rows));
    out.push_back(char(ds.cols));
    out.push_back(char(uint8_t(ds.family)));
    put_le<uint64_t>(out, ds.seed);
    for (const auto& s : ds.samples) {
        out.append(reinterpret_cast<const char*>(s.pixels.data()), s.pixels.size());
        out.append(reinterpret_cast<const char*>(s.cell_labels.data()),
                   s.cell_labels.size());
        for (auto [r, c] : s.centers) {
            put_le<uint16_t>(out, r);
            put_le<uint16_t>(out, c);
        }
        if (ds.family == TaskFamily::ByRef) {
            out.push_back(char(s.ref_digit));
            out.push_back(char(s.answer));
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("dataset: cannot write " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw FormatError("dataset: write failed for " + path);
}

MultiMnistDataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("dataset: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    Reader in{buf, 0, path};

    char magic[8];
    in.get_bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("dataset: bad magic in " + path + " (expected MMNIST01)");
    uint32_t version = in.get_le<uint32_t>();
    if (version != kVersion)
        throw FormatError("dataset: version " + std::to_string(version) +
                          " unsupported (expected " + std::to_string(kVersion) + ")");
    MultiMnistDataset ds;
    ds.n = in.get_le<uint32_t>();
    ds.H = in.get_le<uint16_t>();
    ds.W = in.get_le<uint16_t>();
    ds.rows = in.get_le<uint8_t>();
    ds.cols = in.get_le<uint8_t>();
    uint8_t fam = in.get_le<uint8_t>();
    if (fam > 1)
        throw FormatError("dataset: unknown task family " + std::to_string(fam));
    ds.family = TaskFamily(fam);
    ds.seed = in.get_le<uint64_t>();

    int cells = int(ds.rows) * ds.cols;
    ds.samples.resize(ds.n);
    for (auto& s : ds.samples) {
        s.pixels.resize(size_t(ds.H) * ds.W);
        in.get_bytes(s.pixels.data(), s.pixels.size());
        s.cell_labels.resize(cells);
        in.get_bytes(s.cell_labels.data(), s.cell_labels.size());
        s.centers.resize(cells);
        for (auto& [r, c] : s.centers) {
            r = in.get_le<uint16_t>();
            c = in.get_le<uint16_t>();
        }
        if (ds.family == TaskFamily::ByRef) {
            s.ref_digit = in.get_le<uint8_t>();
            s.answer = in.get_le<uint8_t>();
        }
    }
    if (in.pos != buf.size())
        throw FormatError("dataset: " + path + " has " +
                          std::to_string(buf.size() - in.pos) + " trailing bytes");
    return ds;
}

Tensor make_image_batch(const MultiMnistDataset& ds, const std::vector<int>& idx,
                        int Hp, int Wp) {
    int B = int(idx.size());
    Tensor t({B, 1, Hp, Wp});
    real* p = t.data();
    for (int b = 0; b < B; ++b) {
        const auto& s = ds.samples[idx[b]];
        real* img = p + int64_t(b) * Hp * Wp;
        for (int y = 0; y < ds.H; ++y)
            for (int x = 0; x < ds.W; ++x)
                img[int64_t(y) * Wp + x] = real(s.pixels[size_t(y) * ds.W + x]) / real(255);
    }
    return t;
}

Tensor make_image_batch_with_task_planes(const MultiMnistDataset& ds,
                                         const std::vector<int>& idx, int Hp,
                                         int Wp, int T, int selected) {
    int B = int(idx.size());
    Tensor t({B, 1 + T, Hp, Wp});
    real* p = t.data();
    int64_t plane = int64_t(Hp) * Wp;
    for (int b = 0; b < B; ++b) {
        const auto& s = ds.samples[idx[b]];
        real* img = p + int64_t(b) * (1 + T) * plane;
        for (int y = 0; y < ds.H; ++y)
            for (int x = 0; x < ds.W; ++x)
                img[int64_t(y) * Wp + x] = real(s.pixels[size_t(y) * ds.W + x]) / real(255);
        std::fill(img + (1 + selected) * plane, img + (2 + selected) * plane, real(1));
    }
    return t;
}

std::vector<int> labels_for_task(const MultiMnistDataset& ds,
                                 const std::vector<int>& idx, const TaskSpec& task) {
    std::vector<int> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& s = ds.samples[idx[i]];
        if (task.family == TaskFamily::ByLoc) {
            out[i] = s.cell_labels[task.index];
        } else {
            if (int(s.ref_digit) != task.ref_digit)
                throw Error("labels_for_task: sample " + std::to_string(idx[i]) +
                            " belongs to reference digit " +
                            std::to_string(int(s.ref_digit)) + ", not " +
                            std::to_string(task.ref_digit));
            out[i] = s.answer;
        }
    }
    return out;
}

std::pair<int, int> target_center(const MultiMnistSample& s, const TaskSpec& task,
                                  int grid_cols) {
    if (task.family == TaskFamily::ByLoc) {
        auto [r, c] = s.centers[task.index];
        return {int(r), int(c)};
    }
    for (size_t cell = 0; cell < s.cell_labels.size(); ++cell) {
        if (s.cell_labels[cell] == s.ref_digit) {
            auto [r, c] = s.centers[cell + 1];
            (void)grid_cols;
            return {int(r), int(c)};
        }
    }
    throw Error("target_center: reference digit not found in sample");
}

Tensor make_loc_target_batch(const MultiMnistDataset& ds, const std::vector<int>& idx,
                             const TaskSpec& task, int Hp, int Wp, double sigma) {
    int B = int(idx.size());
    Tensor t({B, 1, Hp, Wp});
    real* p = t.data();
    int64_t plane = int64_t(Hp) * Wp;
    parallel_chunks(B, 16, [&](int64_t, int64_t bb, int64_t be) {
        for (int64_t b = bb; b < be; ++b) {
            auto [r, c] = target_center(ds.samples[idx[b]], task, ds.cols);
            Tensor g = gaussian_target(r, c, Hp, Wp, sigma);
            std::memcpy(p + b * plane, g.data(), size_t(plane) * sizeof(real));
        }
    });
    return t;
}

std::vector<int> task_sample_indices(const MultiMnistDataset& ds, const TaskSpec& task) {
    std::vector<int> out;
    if (task.family == TaskFamily::ByLoc) {
        out.resize(ds.n);
        for (uint32_t i = 0; i < ds.n; ++i) out[i] = int(i);
    } else {
        for (uint32_t i = 0; i < ds.n; ++i)
            if (int(ds.samples[i].ref_digit) == task.ref_digit) out.push_back(int(i));
    }
    return out;
}

} // namespace tdcn
