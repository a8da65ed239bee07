#pragma once

#include "tdcn/model.hpp"

namespace tdcn {

// One independent backbone per task.
class SingleTaskModel : public Model {
public:
    SingleTaskModel(const ModelConfig& cfg, uint64_t seed);
    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return store_; }
    ModelOutput forward(Tape* tape, const Tensor& input, int task) const override;

private:
    ModelConfig cfg_;
    ParamStore store_;
    std::vector<Backbone> nets_;
};

// Shared trunk (stages + hidden layer), one classifier head per task;
// trained with the unweighted mean of the per-task cross-entropies.
class MultiBranchModel : public Model {
public:
    MultiBranchModel(const ModelConfig& cfg, uint64_t seed);
    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return store_; }
    ModelOutput forward(Tape* tape, const Tensor& input, int task) const override;

    // One trunk pass, all T head outputs (training path).
    std::vector<Tensor> forward_all_heads(Tape* tape, const Tensor& input,
                                          Tensor* hidden_out = nullptr) const;

private:
    ModelConfig cfg_;
    ParamStore store_;
    std::vector<ConvStage> stages_;
    Dense fc1_;
    std::vector<Dense> heads_;
};

// Channel-wise modulation: a learned per-task vector scales each stage's
// channels (one scalar per channel, broadcast over space). Identity (all
// ones) at init. ChModExt uses the same structure on a widened backbone.
class ChannelModModel : public Model {
public:
    ChannelModModel(const ModelConfig& cfg, uint64_t seed);
    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return store_; }
    ModelOutput forward(Tape* tape, const Tensor& input, int task) const override;

    void reset_mod_to_identity();
    const Backbone& backbone() const { return bu_; }

private:
    ModelConfig cfg_;
    ParamStore store_;
    Backbone bu_;
    std::vector<Tensor> mod_; // per stage: T x C_k
};

// No TD stream: the one-hot task rides along as T constant input planes into
// a widened first conv.
class BuOnlyModel : public Model {
public:
    BuOnlyModel(const ModelConfig& cfg, uint64_t seed);
    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return store_; }
    ModelOutput forward(Tape* tape, const Tensor& input, int task) const override;
    Tensor make_input(const MultiMnistDataset& ds, const std::vector<int>& idx,
                      int task) const override;

private:
    ModelConfig cfg_;
    ParamStore store_;
    Backbone bu_;
};

} // namespace tdcn
