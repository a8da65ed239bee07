#include "tdcn/backbone.hpp"

#include "tdcn/errors.hpp"

namespace tdcn {

BackboneConfig BackboneConfig::lenet_default(int canvas_h, int canvas_w) {
    BackboneConfig cfg;
    cfg.stages = {{1, 6}, {6, 12}, {12, 24}};
    cfg.fc_hidden = 16;
    cfg.canvas_h = canvas_h;
    cfg.canvas_w = canvas_w;
    return cfg;
}

BackboneConfig BackboneConfig::lenet_10_20(int canvas_h, int canvas_w) {
    BackboneConfig cfg;
    cfg.stages = {{1, 10}, {10, 20}};
    cfg.fc_hidden = 50;
    cfg.canvas_h = canvas_h;
    cfg.canvas_w = canvas_w;
    return cfg;
}

void BackboneConfig::validate() const {
    if (stages.empty()) throw Error("backbone: no stages configured");
    for (size_t k = 0; k < stages.size(); ++k) {
        const auto& s = stages[k];
        if (s.in_channels <= 0 || s.out_channels <= 0)
            throw Error("backbone: stage " + std::to_string(k) +
                        " has non-positive channel count");
        if (k > 0 && stages[k - 1].out_channels != s.in_channels)
            throw Error("backbone: stage " + std::to_string(k) + " expects " +
                        std::to_string(s.in_channels) + " channels but stage " +
                        std::to_string(k - 1) + " yields " +
                        std::to_string(stages[k - 1].out_channels));
    }
    if (fc_hidden <= 0) throw Error("backbone: fc_hidden must be positive");
    int p = pool_product();
    if (canvas_h <= 0 || canvas_w <= 0 || canvas_h % p != 0 || canvas_w % p != 0)
        throw Error("backbone: canvas " + std::to_string(canvas_h) + "x" +
                    std::to_string(canvas_w) + " not divisible by pooling factor " +
                    std::to_string(p));
}

ConvStage make_conv_stage(ParamStore& store, const std::string& prefix,
                          const StageSpec& spec, Xoshiro256& rng) {
    ConvStage cs;
    Tensor w({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
    init::kaiming_uniform(w, int64_t(spec.in_channels) * spec.kernel * spec.kernel, rng);
    cs.w = store.add(prefix + ".w", w);
    cs.b = store.add(prefix + ".b", Tensor::zeros({spec.out_channels}));
    cs.padding = spec.padding;
    cs.pool = spec.pool;
    return cs;
}

Dense make_dense(ParamStore& store, const std::string& prefix, int out, int in,
                 Xoshiro256& rng) {
    Dense d;
    Tensor w({out, in});
    init::kaiming_uniform(w, in, rng);
    d.w = store.add(prefix + ".w", w);
    d.b = store.add(prefix + ".b", Tensor::zeros({out}));
    return d;
}

Backbone::Backbone(const BackboneConfig& cfg, ParamStore& store,
                   const std::string& prefix, Xoshiro256& rng)
    : cfg_(cfg) {
    cfg_.validate();
    for (size_t k = 0; k < cfg_.stages.size(); ++k)
        stages_.push_back(
            make_conv_stage(store, prefix + "conv" + std::to_string(k), cfg_.stages[k], rng));
    fc1_ = make_dense(store, prefix + "fc1", cfg_.fc_hidden, int(cfg_.flatten_size()), rng);
    fc2_ = make_dense(store, prefix + "fc2", cfg_.num_classes, cfg_.fc_hidden, rng);
}

Tensor Backbone::head_hidden(Tape* tape, const Tensor& top_act) const {
    Tensor flat = top_act.reshape({top_act.dim(0), int(cfg_.flatten_size())});
    return relu(tape, fc1_.forward(tape, flat));
}

BackboneActs Backbone::forward(Tape* tape, const Tensor& images) const {
    if (images.dim(2) != cfg_.canvas_h || images.dim(3) != cfg_.canvas_w)
        throw ShapeError("backbone: image dims " + images.shape().str() +
                         " do not match canvas " + std::to_string(cfg_.canvas_h) +
                         "x" + std::to_string(cfg_.canvas_w));
    BackboneActs out;
    Tensor x = images;
    for (const auto& stage : stages_) {
        x = stage.forward(tape, x);
        out.stage_acts.push_back(x);
    }
    out.hidden = head_hidden(tape, x);
    out.logits = head_logits(tape, out.hidden);
    return out;
}

} // namespace tdcn
