#include "tdcn/baselines.hpp"

#include <cmath>

#include "tdcn/controlnet.hpp"
#include "tdcn/errors.hpp"

namespace tdcn {

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Single: return "single";
        case ModelKind::MultiBranch: return "multibranch";
        case ModelKind::ChMod: return "chmod";
        case ModelKind::ChModExt: return "chmod-ext";
        case ModelKind::ControlNet: return "controlnet";
        case ModelKind::TdOnly: return "td-only";
        case ModelKind::BuOnly: return "bu-only";
    }
    return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
    for (ModelKind k : {ModelKind::Single, ModelKind::MultiBranch, ModelKind::ChMod,
                        ModelKind::ChModExt, ModelKind::ControlNet, ModelKind::TdOnly,
                        ModelKind::BuOnly})
        if (name == model_kind_name(k)) return k;
    throw UsageError("unknown model kind '" + name + "'");
}

std::vector<int> extended_widths(const std::vector<int>& base) {
    std::vector<int> out(base.size());
    int K = int(base.size());
    for (int k = 0; k < K; ++k) {
        double scale = K > 1 ? 1.5 - 0.25 * double(k) / (K - 1) : 1.5;
        out[k] = int(std::lround(base[k] * scale));
    }
    return out;
}

namespace {

void check_task(const ModelConfig& cfg, int task) {
    if (task < 0 || task >= cfg.task_count)
        throw ShapeError("task " + std::to_string(task) + " out of range [0," +
                         std::to_string(cfg.task_count) + ")");
}

} // namespace

// ---- SingleTaskModel

SingleTaskModel::SingleTaskModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Xoshiro256 rng(seed);
    for (int t = 0; t < cfg_.task_count; ++t)
        nets_.emplace_back(cfg_.backbone, store_, "task" + std::to_string(t) + ".", rng);
}

ModelOutput SingleTaskModel::forward(Tape* tape, const Tensor& input, int task) const {
    check_task(cfg_, task);
    BackboneActs acts = nets_[task].forward(tape, input);
    return {acts.logits, Tensor(), acts.hidden};
}

// ---- MultiBranchModel

MultiBranchModel::MultiBranchModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.backbone.validate();
    Xoshiro256 rng(seed);
    for (size_t k = 0; k < cfg_.backbone.stages.size(); ++k)
        stages_.push_back(make_conv_stage(store_, "trunk.conv" + std::to_string(k),
                                          cfg_.backbone.stages[k], rng));
    fc1_ = make_dense(store_, "trunk.fc1", cfg_.backbone.fc_hidden,
                      int(cfg_.backbone.flatten_size()), rng);
    for (int t = 0; t < cfg_.task_count; ++t)
        heads_.push_back(make_dense(store_, "head" + std::to_string(t),
                                    cfg_.backbone.num_classes, cfg_.backbone.fc_hidden,
                                    rng));
}

std::vector<Tensor> MultiBranchModel::forward_all_heads(Tape* tape, const Tensor& input,
                                                        Tensor* hidden_out) const {
    Tensor x = input;
    for (const auto& s : stages_) x = s.forward(tape, x);
    Tensor flat = x.reshape({x.dim(0), int(cfg_.backbone.flatten_size())});
    Tensor hidden = relu(tape, fc1_.forward(tape, flat));
    if (hidden_out) *hidden_out = hidden;
    std::vector<Tensor> logits;
    logits.reserve(heads_.size());
    for (const auto& h : heads_) logits.push_back(h.forward(tape, hidden));
    return logits;
}

ModelOutput MultiBranchModel::forward(Tape* tape, const Tensor& input, int task) const {
    check_task(cfg_, task);
    Tensor x = input;
    for (const auto& s : stages_) x = s.forward(tape, x);
    Tensor flat = x.reshape({x.dim(0), int(cfg_.backbone.flatten_size())});
    Tensor hidden = relu(tape, fc1_.forward(tape, flat));
    return {heads_[task].forward(tape, hidden), Tensor(), hidden};
}

// ---- ChannelModModel

namespace {

// The stored config always carries the base widths; the extended variant
// widens them here, so save/load stays idempotent.
BackboneConfig chmod_backbone(const ModelConfig& cfg) {
    BackboneConfig bb = cfg.backbone;
    if (cfg.kind == ModelKind::ChModExt) {
        std::vector<int> widths;
        for (const auto& s : bb.stages) widths.push_back(s.out_channels);
        widths = extended_widths(widths);
        for (size_t k = 0; k < widths.size(); ++k) {
            bb.stages[k].out_channels = widths[k];
            if (k + 1 < widths.size()) bb.stages[k + 1].in_channels = widths[k];
        }
    }
    return bb;
}

} // namespace

ChannelModModel::ChannelModModel(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), store_(), bu_([&] {
          Xoshiro256 rng(seed);
          return Backbone(chmod_backbone(cfg_), store_, "bu.", rng);
      }()) {
    const auto& stages = bu_.config().stages;
    for (size_t k = 0; k < stages.size(); ++k) {
        Tensor v = Tensor::full({cfg_.task_count, stages[k].out_channels}, real(1));
        mod_.push_back(store_.add("mod" + std::to_string(k), v));
    }
}

void ChannelModModel::reset_mod_to_identity() {
    for (auto& v : mod_) init::constant(v, real(1));
}

ModelOutput ChannelModModel::forward(Tape* tape, const Tensor& input, int task) const {
    check_task(cfg_, task);
    Tensor x = input;
    for (int k = 0; k < bu_.num_stages(); ++k) {
        x = bu_.stage_forward(tape, k, x);
        int ck = bu_.config().stages[k].out_channels;
        Tensor row = embed_row_broadcast(tape, mod_[k], task, 1, 1).reshape({ck});
        x = mul(tape, x, row); // per-channel broadcast
    }
    ModelOutput out;
    out.hidden = bu_.head_hidden(tape, x);
    out.logits = bu_.head_logits(tape, out.hidden);
    return out;
}

// ---- BuOnlyModel

BuOnlyModel::BuOnlyModel(const ModelConfig& cfg, uint64_t seed)
    : cfg_([&] {
          ModelConfig c = cfg;
          c.backbone.stages[0].in_channels = 1 + cfg.task_count;
          return c;
      }()),
      store_(), bu_([&] {
          Xoshiro256 rng(seed);
          return Backbone(cfg_.backbone, store_, "bu.", rng);
      }()) {}

Tensor BuOnlyModel::make_input(const MultiMnistDataset& ds, const std::vector<int>& idx,
                               int task) const {
    return make_image_batch_with_task_planes(ds, idx, cfg_.backbone.canvas_h,
                                             cfg_.backbone.canvas_w, cfg_.task_count,
                                             task);
}

ModelOutput BuOnlyModel::forward(Tape* tape, const Tensor& input, int task) const {
    check_task(cfg_, task);
    BackboneActs acts = bu_.forward(tape, input);
    return {acts.logits, Tensor(), acts.hidden};
}

// ---- factory

std::unique_ptr<Model> build_model(const ModelConfig& cfg, uint64_t seed) {
    switch (cfg.kind) {
        case ModelKind::Single: return std::make_unique<SingleTaskModel>(cfg, seed);
        case ModelKind::MultiBranch: return std::make_unique<MultiBranchModel>(cfg, seed);
        case ModelKind::ChMod:
        case ModelKind::ChModExt: return std::make_unique<ChannelModModel>(cfg, seed);
        case ModelKind::ControlNet:
        case ModelKind::TdOnly: return std::make_unique<ControlNet>(cfg, seed);
        case ModelKind::BuOnly: return std::make_unique<BuOnlyModel>(cfg, seed);
    }
    throw Error("build_model: unhandled model kind");
}

} // namespace tdcn
