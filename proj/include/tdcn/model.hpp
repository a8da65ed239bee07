#pragma once

#include <memory>

#include "tdcn/backbone.hpp"
#include "tdcn/mmnist.hpp"

namespace tdcn {

enum class ModelKind : uint8_t {
    Single = 0,
    MultiBranch = 1,
    ChMod = 2,
    ChModExt = 3,
    ControlNet = 4,
    TdOnly = 5,
    BuOnly = 6,
};

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::ControlNet;
    TaskFamily family = TaskFamily::ByLoc;
    int task_count = 0;
    BackboneConfig backbone; // canvas dims are the padded network input dims
    int td_width = 0;        // 0 = replica of the backbone widths, reversed
    double lambda_loc = 1.0;
};

struct ModelOutput {
    Tensor logits;     // (batch, classes)
    Tensor loc_logits; // (batch, 1, H, W) when the model has a TD head
    Tensor hidden;     // final pre-logit representation (batch, fc_hidden)
};

class Model {
public:
    virtual ~Model() = default;
    virtual const ModelConfig& config() const = 0;
    virtual ParamStore& params() = 0;
    const ParamStore& params() const { return const_cast<Model*>(this)->params(); }

    // One selected task per forward pass.
    virtual ModelOutput forward(Tape* tape, const Tensor& input, int task) const = 0;

    // Input assembly; BuOnly appends task planes, everything else feeds the
    // plain image batch.
    virtual Tensor make_input(const MultiMnistDataset& ds, const std::vector<int>& idx,
                              int task) const {
        (void)task;
        return make_image_batch(ds, idx, config().backbone.canvas_h,
                                config().backbone.canvas_w);
    }

    virtual bool has_loc_head() const { return false; }
};

// Builds any model kind with parameters drawn deterministically from seed.
std::unique_ptr<Model> build_model(const ModelConfig& cfg, uint64_t seed);

// ch-mod (extended): stage widths scaled the way the wider comparison net
// scales 10/20 to 15/25 (x1.5 at the first stage down to x1.25 at the last).
std::vector<int> extended_widths(const std::vector<int>& base);

} // namespace tdcn
