#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tdcn/digits.hpp"
#include "tdcn/errors.hpp"
#include "tdcn/idx.hpp"
#include "tdcn/mmnist.hpp"

using namespace tdcn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "tdcn_data_tests";
    fs::create_directories(p);
    return p;
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(bool(f));
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

const MnistData& corpus() {
    static MnistData d = synth_digit_corpus(800, 101);
    return d;
}

} // namespace

TEST_CASE("idx: image/label round trip through real files") {
    auto dir = temp_dir();
    const MnistData& src = corpus();
    write_digit_corpus(src, dir.string(), true);
    MnistData back = load_mnist_dir(dir.string(), true);
    CHECK(back.count == src.count);
    CHECK(back.rows == 28);
    CHECK(back.cols == 28);
    CHECK(back.images == src.images);
    CHECK(back.labels == src.labels);
}

TEST_CASE("idx: wrong magic names expected and actual values") {
    auto p = temp_dir() / "badmagic";
    {
        std::ofstream f(p, std::ios::binary);
        const unsigned char bytes[] = {0, 0, 8, 5, 0, 0, 0, 0};
        f.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
    }
    int n, r, c;
    CHECK_THROWS_WITH_AS(read_idx_images(p.string(), n, r, c),
                         doctest::Contains("expected 0x00000803"), FormatError);
    CHECK_THROWS_WITH_AS(read_idx_labels(p.string(), n),
                         doctest::Contains("expected 0x00000801"), FormatError);
}

TEST_CASE("idx: truncated file and image/label count mismatch are rejected") {
    auto dir = temp_dir();
    write_digit_corpus(corpus(), dir.string(), true);
    auto img_path = dir / "train-images-idx3-ubyte";

    std::string bytes = file_bytes(img_path);
    auto trunc = dir / "truncated-images-idx3-ubyte";
    {
        std::ofstream f(trunc, std::ios::binary);
        f.write(bytes.data(), std::streamsize(bytes.size() / 2));
    }
    int n, r, c;
    CHECK_THROWS_AS(read_idx_images(trunc.string(), n, r, c), FormatError);

    std::vector<uint8_t> labels(corpus().labels.begin(), corpus().labels.end() - 5);
    write_idx_labels((dir / "short-labels").string(), labels);
    CHECK_THROWS_WITH_AS(
        load_mnist(img_path.string(), (dir / "short-labels").string()),
        doctest::Contains("795 labels"), FormatError);
}

TEST_CASE("idx: labels outside 0..9 are rejected by the mnist loader") {
    auto dir = temp_dir();
    std::vector<uint8_t> imgs(2 * 28 * 28, 0);
    write_idx_images((dir / "x-images").string(), imgs, 2, 28, 28);
    write_idx_labels((dir / "x-labels").string(), {3, 11});
    CHECK_THROWS_WITH_AS(load_mnist((dir / "x-images").string(),
                                    (dir / "x-labels").string()),
                         doctest::Contains("label 11"), FormatError);
}

TEST_CASE("idx: real MNIST train set when TDCN_MNIST_DIR is set") {
    const char* dir = std::getenv("TDCN_MNIST_DIR");
    if (!dir) return; // corpus not available in this environment
    MnistData d = load_mnist_dir(dir, true);
    CHECK(d.count == 60000);
    CHECK(d.rows == 28);
    CHECK(d.cols == 28);
    for (int i = 0; i < d.count; ++i) CHECK(d.labels[i] <= 9);
}

TEST_CASE("digit corpus: deterministic and class-complete") {
    MnistData a = synth_digit_corpus(200, 7);
    MnistData b = synth_digit_corpus(200, 7);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    MnistData c = synth_digit_corpus(200, 8);
    CHECK(a.images != c.images);
    for (int cls = 0; cls < 10; ++cls) CHECK(!corpus().by_class[cls].empty());
}

TEST_CASE("gen_by_loc: canvas formula and task count") {
    auto ds12 = gen_by_loc(corpus(), 1, 2, 3, 1);
    CHECK(ds12.H == 28);
    CHECK(ds12.W == 46);
    CHECK(ds12.task_count() == 2);

    auto ds22 = gen_by_loc(corpus(), 2, 2, 3, 1);
    CHECK(ds22.H == 46);
    CHECK(ds22.W == 46);

    auto ds33 = gen_by_loc(corpus(), 3, 3, 3, 1);
    CHECK(ds33.H == 64);
    CHECK(ds33.W == 64);
    CHECK(ds33.task_count() == 9);
}

TEST_CASE("gen_by_loc: n=0 gives a valid empty dataset") {
    auto ds = gen_by_loc(corpus(), 3, 3, 0, 5);
    CHECK(ds.n == 0);
    CHECK(ds.samples.empty());
    auto p = temp_dir() / "empty.mmnist";
    write_dataset(ds, p.string());
    auto back = read_dataset(p.string());
    CHECK(back.n == 0);
    CHECK(back.H == 64);
    CHECK(back.task_count() == 9);
}

TEST_CASE("gen_by_loc: same seed twice serializes byte-identically") {
    auto a = temp_dir() / "a.mmnist";
    auto b = temp_dir() / "b.mmnist";
    write_dataset(gen_by_loc(corpus(), 2, 2, 200, 33), a.string());
    write_dataset(gen_by_loc(corpus(), 2, 2, 200, 33), b.string());
    CHECK(file_bytes(a) == file_bytes(b));
    auto c = temp_dir() / "c.mmnist";
    write_dataset(gen_by_loc(corpus(), 2, 2, 200, 34), c.string());
    CHECK(file_bytes(a) != file_bytes(c));
}

TEST_CASE("gen_by_loc: centers sit at pasted digit centers") {
    auto ds = gen_by_loc(corpus(), 3, 3, 5, 9);
    for (const auto& s : ds.samples)
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                auto [cy, cx] = s.centers[r * 3 + c];
                CHECK(cy == r * 18 + 14);
                CHECK(cx == c * 18 + 14);
            }
}

TEST_CASE("gen_by_loc: per-cell digit frequencies within 3 sd of uniform") {
    int n = 10000;
    auto ds = gen_by_loc(corpus(), 2, 2, n, 77);
    double sd = std::sqrt(n * 0.1 * 0.9);
    for (int cell = 0; cell < 4; ++cell) {
        int counts[10] = {0};
        for (const auto& s : ds.samples) counts[s.cell_labels[cell]]++;
        for (int d = 0; d < 10; ++d)
            CHECK(std::abs(counts[d] - n * 0.1) <= 3 * sd);
    }
}

TEST_CASE("gen_by_ref: reference digit constraints hold for every sample") {
    auto ds = gen_by_ref(corpus(), 3, 3, 500, 3);
    CHECK(ds.task_count() == 10);
    for (uint32_t i = 0; i < ds.n; ++i) {
        const auto& s = ds.samples[i];
        CHECK(int(s.ref_digit) == int(i % 10));
        int found = 0, found_cell = -1;
        for (int cell = 0; cell < 9; ++cell)
            if (s.cell_labels[cell] == s.ref_digit) {
                ++found;
                found_cell = cell;
            }
        CHECK(found == 1);
        CHECK(found_cell % 3 != 2); // never in the last column
        CHECK(int(s.answer) == int(s.cell_labels[found_cell + 1]));
    }
}

TEST_CASE("gen_by_ref: golden checksum for seed 7, n=1000") {
    auto p = temp_dir() / "golden.mmnist";
    write_dataset(gen_by_ref(corpus(), 3, 3, 1000, 7), p.string());
    // Frozen on first generation; guards the generator + corpus + format chain.
    CHECK(fnv1a64(file_bytes(p)) == 0x094844b0115b3fd7ull);
}

TEST_CASE("gaussian_target: normalization, peak location, peak value") {
    Tensor g = gaussian_target(32, 32, 64, 64, 3.0);
    double sum = 0;
    int64_t arg = 0;
    for (int64_t i = 0; i < g.numel(); ++i) {
        sum += g.data()[i];
        if (g.data()[i] > g.data()[arg]) arg = i;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(arg == 32 * 64 + 32);
    CHECK(double(g.data()[arg]) ==
          doctest::Approx(1.0 / (2.0 * M_PI * 9.0)).epsilon(1e-4 * 2 * M_PI * 9));

    CHECK_THROWS_AS(gaussian_target(70, 3, 64, 64), Error);
}

TEST_CASE("dataset file: round trip, corruption, size formula") {
    auto ds = gen_by_ref(corpus(), 3, 3, 40, 11);
    auto p = temp_dir() / "rt.mmnist";
    write_dataset(ds, p.string());
    auto back = read_dataset(p.string());
    CHECK(back.n == ds.n);
    CHECK(back.seed == ds.seed);
    CHECK(back.family == ds.family);
    for (uint32_t i = 0; i < ds.n; ++i) {
        CHECK(back.samples[i].pixels == ds.samples[i].pixels);
        CHECK(back.samples[i].cell_labels == ds.samples[i].cell_labels);
        CHECK(back.samples[i].centers == ds.samples[i].centers);
        CHECK(back.samples[i].ref_digit == ds.samples[i].ref_digit);
        CHECK(back.samples[i].answer == ds.samples[i].answer);
    }

    // header 31 bytes; record = H*W + cells + 4*cells + 2 (by-ref)
    size_t record = size_t(ds.H) * ds.W + 9 + 4 * 9 + 2;
    CHECK(fs::file_size(p) == 31 + ds.n * record);

    std::string bytes = file_bytes(p);
    bytes[0] = 'X';
    auto bad = temp_dir() / "bad.mmnist";
    {
        std::ofstream f(bad, std::ios::binary);
        f.write(bytes.data(), std::streamsize(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(read_dataset(bad.string()), doctest::Contains("bad magic"),
                         FormatError);

    auto trunc = temp_dir() / "trunc.mmnist";
    {
        std::ofstream f(trunc, std::ios::binary);
        f.write(file_bytes(p).data(), std::streamsize(bytes.size() - 7));
    }
    CHECK_THROWS_WITH_AS(read_dataset(trunc.string()), doctest::Contains("truncated"),
                         FormatError);
}

TEST_CASE("batch assembly: [0,1] floats, zero padding, task planes") {
    auto ds = gen_by_loc(corpus(), 1, 2, 4, 21); // canvas 28x46
    int Hp = pad_up(ds.H, 8), Wp = pad_up(ds.W, 8);
    CHECK(Hp == 32);
    CHECK(Wp == 48);
    Tensor batch = make_image_batch(ds, {0, 1, 2}, Hp, Wp);
    CHECK(batch.shape() == Shape{3, 1, 32, 48});
    for (int64_t i = 0; i < batch.numel(); ++i) {
        CHECK(batch.data()[i] >= 0);
        CHECK(batch.data()[i] <= 1);
    }
    // padding region stays zero
    for (int b = 0; b < 3; ++b)
        for (int y = 28; y < 32; ++y)
            for (int x = 0; x < 48; ++x)
                CHECK(batch.data()[(int64_t(b) * 32 + y) * 48 + x] == 0);

    Tensor planes = make_image_batch_with_task_planes(ds, {0, 1}, Hp, Wp, 2, 1);
    CHECK(planes.shape() == Shape{2, 3, 32, 48});
    const real* p = planes.data();
    int64_t plane = 32 * 48;
    // channel 1 (task 0) all zero, channel 2 (task 1) all one
    for (int64_t i = 0; i < plane; ++i) {
        CHECK(p[plane + i] == 0);
        CHECK(p[2 * plane + i] == 1);
    }
}

TEST_CASE("labels and loc targets for tasks") {
    auto ds = gen_by_loc(corpus(), 2, 2, 6, 13);
    TaskSpec t3 = ds.task(3);
    CHECK(t3.row == 1);
    CHECK(t3.col == 1);
    auto labels = labels_for_task(ds, {0, 1}, t3);
    CHECK(labels[0] == int(ds.samples[0].cell_labels[3]));

    auto refds = gen_by_ref(corpus(), 3, 3, 30, 13);
    TaskSpec t7 = refds.task(7);
    auto pool = task_sample_indices(refds, t7);
    CHECK(pool.size() == 3);
    for (int i : pool) CHECK(int(refds.samples[i].ref_digit) == 7);
    auto ref_labels = labels_for_task(refds, pool, t7);
    for (size_t i = 0; i < pool.size(); ++i)
        CHECK(ref_labels[i] == int(refds.samples[pool[i]].answer));
    CHECK_THROWS_AS(labels_for_task(refds, {0, 1}, t7), Error); // wrong task split

    Tensor maps = make_loc_target_batch(ds, {0, 1}, t3, 48, 48);
    CHECK(maps.shape() == Shape{2, 1, 48, 48});
    for (int b = 0; b < 2; ++b) {
        double s = 0;
        for (int64_t i = 0; i < 48 * 48; ++i) s += maps.data()[b * 48 * 48 + i];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }
}
