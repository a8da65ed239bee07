#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tdcn/ops.hpp"
#include "tdcn/params.hpp"

namespace tdcn {

struct StageSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 5;
    int padding = 2; // same-padding so lateral tensors align across streams
    int pool = 2;
};

struct BackboneConfig {
    std::vector<StageSpec> stages;
    int fc_hidden = 16;
    int num_classes = 10;
    int canvas_h = 0, canvas_w = 0; // padded input dims

    // Artifact default: three stages 1->6->12->24, fc 16. Conv-heavy enough
    // that the control stream's replica cost lands near the reported ~1.3-1.4x
    // parameter ratio.
    static BackboneConfig lenet_default(int canvas_h, int canvas_w);
    // Two-stage 1->10->20, fc 50 preset.
    static BackboneConfig lenet_10_20(int canvas_h, int canvas_w);

    int pool_product() const {
        int p = 1;
        for (const auto& s : stages) p *= s.pool;
        return p;
    }
    int top_channels() const { return stages.back().out_channels; }
    std::pair<int, int> top_dims() const {
        return {canvas_h / pool_product(), canvas_w / pool_product()};
    }
    int64_t flatten_size() const {
        auto [h, w] = top_dims();
        return int64_t(top_channels()) * h * w;
    }
    void validate() const;
};

// conv -> relu -> pool. The post-pool activation is the stage output that
// lateral connections tap.
struct ConvStage {
    Tensor w, b;
    int padding = 2, pool = 2;

    Tensor forward(Tape* tape, const Tensor& x) const {
        Tensor y = relu(tape, conv2d(tape, x, w, b, 1, padding));
        return pool > 1 ? maxpool2d(tape, y, pool) : y;
    }
};

struct Dense {
    Tensor w, b;
    Tensor forward(Tape* tape, const Tensor& x) const { return linear(tape, x, w, b); }
};

ConvStage make_conv_stage(ParamStore& store, const std::string& prefix,
                          const StageSpec& spec, Xoshiro256& rng);
Dense make_dense(ParamStore& store, const std::string& prefix, int out, int in,
                 Xoshiro256& rng);

struct BackboneActs {
    std::vector<Tensor> stage_acts; // post-pool, post-relu per stage
    Tensor hidden;                  // fc_hidden relu output (pre-logit)
    Tensor logits;                  // (batch, num_classes)
};

// The bottom-up recognition stack; one instance serves as BU1, BU2 and the
// plain single-task net (BU1/BU2 weight sharing is sharing this object).
class Backbone {
public:
    Backbone(const BackboneConfig& cfg, ParamStore& store, const std::string& prefix,
             Xoshiro256& rng);

    BackboneActs forward(Tape* tape, const Tensor& images) const;

    // Pieces for stream compositions that interleave extra work per stage.
    int num_stages() const { return int(stages_.size()); }
    Tensor stage_forward(Tape* tape, int k, const Tensor& in) const {
        return stages_[k].forward(tape, in);
    }
    // flatten -> fc1 -> relu (the final pre-logit representation).
    Tensor head_hidden(Tape* tape, const Tensor& top_act) const;
    Tensor head_logits(Tape* tape, const Tensor& hidden) const {
        return fc2_.forward(tape, hidden);
    }

    const BackboneConfig& config() const { return cfg_; }

private:
    BackboneConfig cfg_;
    std::vector<ConvStage> stages_;
    Dense fc1_, fc2_;
};

} // namespace tdcn
