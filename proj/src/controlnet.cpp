#include "tdcn/controlnet.hpp"

#include "tdcn/errors.hpp"

namespace tdcn {

int ControlNet::td_channels(int k) const {
    return cfg_.td_width > 0 ? cfg_.td_width : cfg_.backbone.stages[k].out_channels;
}

int ControlNet::td_bottom_channels() const {
    return cfg_.td_width > 0 ? cfg_.td_width : cfg_.backbone.stages[0].in_channels;
}

ControlNet::ControlNet(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg),
      bu1_laterals_(cfg.kind != ModelKind::TdOnly),
      store_(),
      bu_([&] {
          Xoshiro256 rng(seed);
          return Backbone(cfg_.backbone, store_, "bu.", rng);
      }()) {
    Xoshiro256 rng(derive_seed(seed, 1));
    int K = bu_.num_stages();
    auto [ht, wt] = cfg_.backbone.top_dims();
    (void)ht;
    (void)wt;

    Tensor emb({cfg_.task_count, td_channels(K - 1)});
    init::uniform(emb, -0.1, 0.1, rng);
    embed_ = store_.add("embed", emb);

    if (bu1_laterals_) {
        for (int k = 0; k < K; ++k) {
            StageSpec spec;
            spec.in_channels = cfg_.backbone.stages[k].out_channels;
            spec.out_channels = td_channels(k);
            spec.kernel = 1;
            spec.padding = 0;
            spec.pool = 1;
            ConvStage cs;
            Tensor w({spec.out_channels, spec.in_channels, 1, 1});
            init::uniform(w, -0.05, 0.05, rng);
            cs.w = store_.add("lat" + std::to_string(k) + ".w", w);
            cs.b = store_.add("lat" + std::to_string(k) + ".b",
                              Tensor::zeros({spec.out_channels}));
            cs.padding = 0;
            cs.pool = 1;
            lat_.push_back(cs);
        }
    }

    td_w_.resize(K);
    td_b_.resize(K);
    for (int k = K - 1; k >= 0; --k) {
        int in = td_channels(k);
        int out = k > 0 ? td_channels(k - 1) : td_bottom_channels();
        int ksz = cfg_.backbone.stages[k].kernel;
        Tensor w({out, in, ksz, ksz});
        init::kaiming_uniform(w, int64_t(in) * ksz * ksz, rng);
        td_w_[k] = store_.add("td.conv" + std::to_string(k) + ".w", w);
        td_b_[k] = store_.add("td.conv" + std::to_string(k) + ".b", Tensor::zeros({out}));
    }

    gate_w_.resize(K);
    gate_b_.resize(K);
    for (int k = 0; k < K; ++k) {
        int ck = cfg_.backbone.stages[k].out_channels;
        gate_w_[k] = store_.add("gate" + std::to_string(k) + ".w",
                                Tensor::zeros({ck, td_channels(k), 1, 1}));
        gate_b_[k] = store_.add("gate" + std::to_string(k) + ".b",
                                Tensor::full({ck}, real(1)));
    }

    Tensor lw({1, td_bottom_channels(), 1, 1});
    init::kaiming_uniform(lw, td_bottom_channels(), rng);
    loc_w_ = store_.add("loc.w", lw);
    loc_b_ = store_.add("loc.b", Tensor::zeros({1}));
}

void ControlNet::reset_gates_to_identity() {
    for (size_t k = 0; k < gate_w_.size(); ++k) {
        init::constant(gate_w_[k], real(0));
        init::constant(gate_b_[k], real(1));
    }
}

ModelOutput ControlNet::forward(Tape* tape, const Tensor& input, int task) const {
    if (task < 0 || task >= cfg_.task_count)
        throw ShapeError("controlnet: task " + std::to_string(task) +
                         " out of range [0," + std::to_string(cfg_.task_count) + ")");
    int K = bu_.num_stages();
    int N = input.dim(0);
    auto [ht, wt] = cfg_.backbone.top_dims();

    // BU1: cache stage activations.
    std::vector<Tensor> acts1;
    {
        Tensor x = input;
        for (int k = 0; k < K; ++k) {
            x = bu_.stage_forward(tape, k, x);
            acts1.push_back(x);
        }
    }

    // TD top: task embedding broadcast over the top spatial grid, plus the
    // additive lateral from BU1's top activation.
    Tensor emb_map = embed_row_broadcast(tape, embed_, task, ht, wt);
    std::vector<Tensor> td_state(K);
    if (bu1_laterals_) {
        Tensor lat_top = conv2d(tape, acts1[K - 1], lat_[K - 1].w, lat_[K - 1].b);
        td_state[K - 1] = add(tape, lat_top, emb_map);
    } else {
        Tensor zeros({N, td_channels(K - 1), ht, wt});
        td_state[K - 1] = add(tape, zeros, emb_map);
    }

    // TD stages: conv+relu, upsample, then the next lateral.
    for (int k = K - 1; k >= 1; --k) {
        int pad = cfg_.backbone.stages[k].padding;
        Tensor x = relu(tape, conv2d(tape, td_state[k], td_w_[k], td_b_[k], 1, pad));
        x = upsample_nearest(tape, x, cfg_.backbone.stages[k].pool);
        if (bu1_laterals_) {
            Tensor lat = conv2d(tape, acts1[k - 1], lat_[k - 1].w, lat_[k - 1].b);
            x = add(tape, x, lat);
        }
        td_state[k - 1] = x;
    }
    Tensor td_full = upsample_nearest(
        tape, relu(tape, conv2d(tape, td_state[0], td_w_[0], td_b_[0], 1,
                                cfg_.backbone.stages[0].padding)),
        cfg_.backbone.stages[0].pool);
    Tensor loc_logits = conv2d(tape, td_full, loc_w_, loc_b_);

    // BU2: shared weights, each stage output gated elementwise by the TD map
    // at the matching resolution.
    Tensor x = input;
    for (int k = 0; k < K; ++k) {
        x = bu_.stage_forward(tape, k, x);
        Tensor gate = conv2d(tape, td_state[k], gate_w_[k], gate_b_[k]);
        x = mul(tape, x, gate);
    }
    ModelOutput out;
    out.hidden = bu_.head_hidden(tape, x);
    out.logits = bu_.head_logits(tape, out.hidden);
    out.loc_logits = loc_logits;
    return out;
}

Tensor control_loss(Tape* tape, const Tensor& logits, const std::vector<int>& labels,
                    const Tensor& loc_logits, const Tensor& target_map,
                    double lambda_loc) {
    Tensor probs = softmax(tape, logits, SoftmaxAxis::Classes);
    Tensor ce = cross_entropy_hard(tape, probs, labels);
    if (lambda_loc == 0.0 || !loc_logits.defined() || !target_map.defined())
        return ce;
    Tensor loc_probs = softmax(tape, loc_logits, SoftmaxAxis::Spatial);
    Tensor loc_ce = cross_entropy_soft(tape, loc_probs, target_map);
    return add(tape, ce, scale(tape, loc_ce, real(lambda_loc)));
}

Tensor extract_map(const Model& model, const Tensor& image, int task) {
    if (!model.has_loc_head())
        throw Error("extract_map: model kind has no localization head");
    ModelOutput out = model.forward(nullptr, image, task);
    return softmax(nullptr, out.loc_logits, SoftmaxAxis::Spatial);
}

} // namespace tdcn
