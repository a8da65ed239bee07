#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdcn/idx.hpp"
#include "tdcn/tensor.hpp"

namespace tdcn {

enum class TaskFamily : uint8_t { ByLoc = 0, ByRef = 1 };

// One task: a grid cell ('by loc') or a reference digit ('by ref'), plus its
// index into the one-hot task selector.
struct TaskSpec {
    TaskFamily family = TaskFamily::ByLoc;
    int index = 0; // 0..T-1
    int row = -1, col = -1; // by-loc cell
    int ref_digit = -1;     // by-ref reference digit

    static TaskSpec by_loc(int row, int col, int grid_cols) {
        TaskSpec t;
        t.family = TaskFamily::ByLoc;
        t.row = row;
        t.col = col;
        t.index = row * grid_cols + col;
        return t;
    }
    static TaskSpec by_ref(int digit) {
        TaskSpec t;
        t.family = TaskFamily::ByRef;
        t.ref_digit = digit;
        t.index = digit;
        return t;
    }
};

struct MultiMnistSample {
    std::vector<uint8_t> pixels;                          // H*W
    std::vector<uint8_t> cell_labels;                     // rows*cols
    std::vector<std::pair<uint16_t, uint16_t>> centers;   // (row,col) per cell
    uint8_t ref_digit = 0xFF, answer = 0xFF;              // by-ref only
};

struct MultiMnistDataset {
    uint32_t n = 0;
    uint16_t H = 0, W = 0;
    uint8_t rows = 0, cols = 0;
    TaskFamily family = TaskFamily::ByLoc;
    uint64_t seed = 0;
    std::vector<MultiMnistSample> samples;

    int task_count() const {
        return family == TaskFamily::ByRef ? 10 : int(rows) * cols;
    }
    TaskSpec task(int index) const {
        return family == TaskFamily::ByRef
                   ? TaskSpec::by_ref(index)
                   : TaskSpec::by_loc(index / cols, index % cols, cols);
    }
};

// Canvas arithmetic: digits pasted on an 18px stride (10px overlap).
constexpr int kDigitSize = 28;
constexpr int kGridStride = 18;
inline int canvas_height(int rows) { return kDigitSize + (rows - 1) * kGridStride; }
inline int canvas_width(int cols) { return kDigitSize + (cols - 1) * kGridStride; }

// Grids: (1,2), (2,2), (3,3). Each cell draws a uniform digit class, then a
// uniform image of that class. Deterministic per (seed, index).
MultiMnistDataset gen_by_loc(const MnistData& mnist, int rows, int cols, int n,
                             uint64_t seed);

// 3x3 grid, 10 tasks (reference digits 0..9). Sample i is generated for task
// i mod 10: the reference digit appears exactly once, never in the last
// column; remaining cells avoid its class; answer = label to its right.
MultiMnistDataset gen_by_ref(const MnistData& mnist, int rows, int cols, int n,
                             uint64_t seed);

// Isotropic Gaussian bump at (row,col), normalized to sum 1.
Tensor gaussian_target(int row, int col, int h, int w, double sigma = 3.0);

void write_dataset(const MultiMnistDataset& ds, const std::string& path);
MultiMnistDataset read_dataset(const std::string& path);

// ---- batch assembly (floats in [0,1]; canvases zero-padded right/bottom
// ---- to a multiple of `multiple` so pooled stages stay divisible).
inline int pad_up(int v, int multiple) {
    return (v + multiple - 1) / multiple * multiple;
}

Tensor make_image_batch(const MultiMnistDataset& ds, const std::vector<int>& idx,
                        int Hp, int Wp);

// As above but with T extra constant 0/1 task planes appended (channel 0 is
// the image; plane 1+t is all-ones for the selected task).
Tensor make_image_batch_with_task_planes(const MultiMnistDataset& ds,
                                         const std::vector<int>& idx, int Hp,
                                         int Wp, int T, int selected);

// Class labels of `task` for each sample (by-ref samples must be of that task).
std::vector<int> labels_for_task(const MultiMnistDataset& ds,
                                 const std::vector<int>& idx, const TaskSpec& task);

// Center of the queried digit: the task's cell for by-loc, the answer cell
// (right of the reference) for by-ref.
std::pair<int, int> target_center(const MultiMnistSample& s, const TaskSpec& task,
                                  int grid_cols);

// (B,1,Hp,Wp) stack of normalized Gaussian maps at each sample's target center.
Tensor make_loc_target_batch(const MultiMnistDataset& ds, const std::vector<int>& idx,
                             const TaskSpec& task, int Hp, int Wp,
                             double sigma = 3.0);

// Samples usable for a task: all of them for by-loc, the task's own split for
// by-ref.
std::vector<int> task_sample_indices(const MultiMnistDataset& ds, const TaskSpec& task);

} // namespace tdcn
