#pragma once

#include "tdcn/model.hpp"

namespace tdcn {

// The full three-stream model: BU1 -> TD -> BU2 with shared BU weights.
// Additive 1x1 laterals feed BU1 stage activations into the TD stream; the
// TD stream runs top-down from the task embedding with conv+relu+upsample
// per stage; multiplicative 1x1 laterals gate every BU2 stage activation
// elementwise. A 1x1 head on the full-resolution TD output emits the
// localization map. Built without the BU1 laterals this is the TD-only
// ablation (task-driven control, no image content).
class ControlNet : public Model {
public:
    ControlNet(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return store_; }
    ModelOutput forward(Tape* tape, const Tensor& input, int task) const override;
    bool has_loc_head() const override { return true; }

    // Gate convs producing exactly 1 everywhere (zero weights, unit bias);
    // this is also the initial state.
    void reset_gates_to_identity();

    const Backbone& backbone() const { return bu_; }
    bool uses_bu1_laterals() const { return bu1_laterals_; }

    // TD channel count at stage level k (replica width or the reduced width).
    int td_channels(int k) const;
    int td_bottom_channels() const;

private:
    ModelConfig cfg_;
    bool bu1_laterals_;
    ParamStore store_;
    Backbone bu_;
    Tensor embed_;                     // T x td_channels(top)
    std::vector<ConvStage> lat_;       // 1x1, C_k -> td_ch(k); empty for TD-only
    std::vector<Tensor> td_w_, td_b_;  // 5x5, td level k -> level k-1
    std::vector<Tensor> gate_w_, gate_b_; // 1x1, td_ch(k) -> C_k
    Tensor loc_w_, loc_b_;             // 1x1 -> 1 channel at canvas resolution
};

// classification CE + lambda_loc * soft CE between the spatial softmax of
// loc_logits and target_map. Undefined loc/target or lambda 0 disables the
// localization term.
Tensor control_loss(Tape* tape, const Tensor& logits, const std::vector<int>& labels,
                    const Tensor& loc_logits, const Tensor& target_map,
                    double lambda_loc);

// Normalized task-dependent spatial map (spatial softmax of the TD head).
Tensor extract_map(const Model& model, const Tensor& image, int task);

} // namespace tdcn
