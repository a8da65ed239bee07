#include <doctest.h>

#include <cmath>
#include <cstring>

#include "gradcheck.hpp"
#include "tdcn/baselines.hpp"
#include "tdcn/controlnet.hpp"
#include "tdcn/digits.hpp"
#include "tdcn/ops.hpp"

using namespace tdcn;
using tdcn::testing::gradcheck;

namespace {

Tensor rand_images(int n, int c, int h, int w, uint64_t seed) {
    Xoshiro256 rng(seed);
    Tensor t({n, c, h, w});
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = real(rng.uniform(0, 1));
    return t;
}

// Small config for gradient checks: 2 stages, 16x16 canvas.
ModelConfig tiny_config(ModelKind kind, int tasks) {
    ModelConfig mc;
    mc.kind = kind;
    mc.family = TaskFamily::ByLoc;
    mc.task_count = tasks;
    mc.backbone.stages = {{1, 2, 3, 1, 2}, {2, 3, 3, 1, 2}};
    mc.backbone.fc_hidden = 4;
    mc.backbone.canvas_h = 16;
    mc.backbone.canvas_w = 16;
    return mc;
}

ModelConfig default_config(ModelKind kind, int tasks, int canvas = 64) {
    ModelConfig mc;
    mc.kind = kind;
    mc.family = TaskFamily::ByLoc;
    mc.task_count = tasks;
    mc.backbone = BackboneConfig::lenet_default(canvas, canvas);
    return mc;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), a.numel() * sizeof(real)) == 0;
}

} // namespace

TEST_CASE("backbone 10/20 preset: stage outputs 10x32x32 and 20x16x16 on 64x64") {
    BackboneConfig cfg = BackboneConfig::lenet_10_20(64, 64);
    ParamStore store;
    Xoshiro256 rng(1);
    Backbone bu(cfg, store, "bu.", rng);
    Tensor x = rand_images(2, 1, 64, 64, 5);
    BackboneActs acts = bu.forward(nullptr, x);
    REQUIRE(acts.stage_acts.size() == 2);
    CHECK(acts.stage_acts[0].shape() == Shape{2, 10, 32, 32});
    CHECK(acts.stage_acts[1].shape() == Shape{2, 20, 16, 16});
    CHECK(acts.logits.shape() == Shape{2, 10});
}

TEST_CASE("backbone: requesting two stages exposes exactly two activations") {
    ModelConfig mc = tiny_config(ModelKind::Single, 1);
    ParamStore store;
    Xoshiro256 rng(2);
    Backbone bu(mc.backbone, store, "bu.", rng);
    auto acts = bu.forward(nullptr, rand_images(1, 1, 16, 16, 6));
    CHECK(acts.stage_acts.size() == 2);
}

TEST_CASE("backbone: parameter count matches the closed-form sum") {
    BackboneConfig cfg = BackboneConfig::lenet_default(64, 64);
    ParamStore store;
    Xoshiro256 rng(3);
    Backbone bu(cfg, store, "bu.", rng);
    // conv: out*(in*k*k)+out per stage; fc1: hidden*flatten+hidden; fc2: 10*hidden+10
    int64_t expect = 0;
    for (auto& s : cfg.stages)
        expect += int64_t(s.out_channels) * s.in_channels * s.kernel * s.kernel +
                  s.out_channels;
    expect += int64_t(cfg.fc_hidden) * cfg.flatten_size() + cfg.fc_hidden;
    expect += int64_t(cfg.num_classes) * cfg.fc_hidden + cfg.num_classes;
    CHECK(store.count() == expect);
}

TEST_CASE("backbone: two builds from one seed are parameter-identical") {
    BackboneConfig cfg = BackboneConfig::lenet_default(32, 32);
    ParamStore s1, s2;
    Xoshiro256 r1(99), r2(99);
    Backbone a(cfg, s1, "bu.", r1);
    Backbone b(cfg, s2, "bu.", r2);
    REQUIRE(s1.items().size() == s2.items().size());
    for (size_t i = 0; i < s1.items().size(); ++i)
        CHECK(bitwise_equal(s1.items()[i].second, s2.items()[i].second));
}

TEST_CASE("backbone: zero image with zero biases gives zero stage activations") {
    BackboneConfig cfg = BackboneConfig::lenet_default(32, 32);
    ParamStore store;
    Xoshiro256 rng(4);
    Backbone bu(cfg, store, "bu.", rng); // biases initialize to zero
    Tensor zero({2, 1, 32, 32});
    auto acts = bu.forward(nullptr, zero);
    for (const auto& a : acts.stage_acts)
        for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == 0);
}

TEST_CASE("backbone: gradients of a scalar loss pass finite differences") {
    ModelConfig mc = tiny_config(ModelKind::Single, 1);
    ParamStore store;
    Xoshiro256 rng(5);
    Backbone bu(mc.backbone, store, "bu.", rng);
    testing::perturb_params(store.items(), 51);
    Tensor x = rand_images(2, 1, 16, 16, 7);
    double err = testing::gradcheck_output(
        [&](Tape* tape) { return bu.forward(tape, x).logits; }, store.tensors());
    CHECK(err < 1e-3);
}

TEST_CASE("controlnet: identity gates reproduce the plain backbone bitwise") {
    ModelConfig mc = default_config(ModelKind::ControlNet, 9);
    ControlNet net(mc, 42);
    Tensor x = rand_images(3, 1, 64, 64, 9);

    // Freshly built gates are identity (zero weights, unit bias).
    ModelOutput out = net.forward(nullptr, x, 4);
    BackboneActs plain = net.backbone().forward(nullptr, x);
    CHECK(bitwise_equal(out.logits, plain.logits));

    // Perturb, then force back.
    Xoshiro256 rng(10);
    for (auto& [name, t] : net.params().items())
        if (name.rfind("gate", 0) == 0)
            for (int64_t i = 0; i < t.numel(); ++i)
                const_cast<Tensor&>(t).data()[i] = real(rng.uniform(-0.5, 0.5));
    ModelOutput diff = net.forward(nullptr, x, 4);
    CHECK(!bitwise_equal(diff.logits, plain.logits));

    net.reset_gates_to_identity();
    ModelOutput back = net.forward(nullptr, x, 4);
    CHECK(bitwise_equal(back.logits, plain.logits));
}

TEST_CASE("controlnet: output shapes") {
    ModelConfig mc = default_config(ModelKind::ControlNet, 9);
    ControlNet net(mc, 1);
    Tensor x = rand_images(4, 1, 64, 64, 11);
    ModelOutput out = net.forward(nullptr, x, 0);
    CHECK(out.logits.shape() == Shape{4, 10});
    CHECK(out.loc_logits.shape() == Shape{4, 1, 64, 64});
    CHECK(out.hidden.shape() == Shape{4, 16});
}

TEST_CASE("controlnet: embedding gradient is confined to the selected row") {
    ModelConfig mc = tiny_config(ModelKind::ControlNet, 3);
    ControlNet net(mc, 2);
    testing::perturb_params(net.params().items(), 52); // open the gates
    Tensor x = rand_images(2, 1, 16, 16, 12);
    Tape tape;
    ModelOutput out = net.forward(&tape, x, 1);
    Tensor loss = sum(&tape, out.logits);
    tape.backward(loss);
    Tensor* E = net.params().find("embed");
    REQUIRE(E != nullptr);
    int C = E->dim(1);
    for (int t = 0; t < 3; ++t)
        for (int c = 0; c < C; ++c) {
            if (t != 1) CHECK(E->grad()[t * C + c] == 0);
        }
    // The selected row collects gradient through the gates.
    double row1 = 0;
    for (int c = 0; c < C; ++c) row1 += std::abs(E->grad()[1 * C + c]);
    CHECK(row1 > 0);
}

TEST_CASE("controlnet: weight sharing means one census entry, two uses") {
    ModelConfig mc = tiny_config(ModelKind::ControlNet, 2);
    ControlNet net(mc, 3);
    Tensor x = rand_images(1, 1, 16, 16, 13);
    ModelOutput base = net.forward(nullptr, x, 0);

    // Nudge one shared conv weight: both the BU1-driven TD path and the BU2
    // classification must move.
    Tensor* w = net.params().find("bu.conv0.w");
    REQUIRE(w != nullptr);
    w->data()[0] += real(0.25);
    ModelOutput moved = net.forward(nullptr, x, 0);
    CHECK(!bitwise_equal(moved.logits, base.logits));
    CHECK(!bitwise_equal(moved.loc_logits, base.loc_logits));
}

TEST_CASE("controlnet: parameter ratio vs plain backbone in [1.2, 1.6]") {
    for (int tasks : {9, 10}) {
        ModelConfig mc = default_config(ModelKind::ControlNet, tasks);
        ControlNet net(mc, 4);
        ParamStore plain;
        Xoshiro256 rng(4);
        Backbone bu(mc.backbone, plain, "bu.", rng);
        double ratio = double(net.params().count()) / double(plain.count());
        CHECK(ratio >= 1.2);
        CHECK(ratio <= 1.6);
    }
}

TEST_CASE("controlnet: reduced TD width builds and forwards") {
    ModelConfig mc = default_config(ModelKind::ControlNet, 9);
    mc.td_width = 4;
    ControlNet narrow(mc, 5);
    ModelConfig rep = default_config(ModelKind::ControlNet, 9);
    ControlNet replica(rep, 5);
    CHECK(narrow.params().count() < replica.params().count());
    Tensor x = rand_images(2, 1, 64, 64, 14);
    ModelOutput out = narrow.forward(nullptr, x, 3);
    CHECK(out.logits.shape() == Shape{2, 10});
    CHECK(out.loc_logits.shape() == Shape{2, 1, 64, 64});
}

TEST_CASE("controlnet: full-model gradients pass finite differences") {
    ModelConfig mc = tiny_config(ModelKind::ControlNet, 2);
    ControlNet net(mc, 6);
    testing::perturb_params(net.params().items(), 53);
    Tensor x = rand_images(2, 1, 16, 16, 15);
    double err = testing::gradcheck_output(
        [&](Tape* tape) { return net.forward(tape, x, 1).logits; },
        net.params().tensors());
    CHECK(err < 1e-3);
}

TEST_CASE("chmod: all-ones vectors reproduce the plain backbone bitwise") {
    ModelConfig mc = default_config(ModelKind::ChMod, 9);
    ChannelModModel net(mc, 21);
    Tensor x = rand_images(3, 1, 64, 64, 17);
    ModelOutput out = net.forward(nullptr, x, 2); // init is all-ones
    BackboneActs plain = net.backbone().forward(nullptr, x);
    CHECK(bitwise_equal(out.logits, plain.logits));
}

TEST_CASE("chmod: extended widths map 10/20 to 15/25") {
    CHECK(extended_widths({10, 20}) == std::vector<int>{15, 25});
    auto w3 = extended_widths({6, 12, 24});
    CHECK(w3.size() == 3);
    CHECK(w3[0] == 9);
    CHECK(w3[2] == 30);

    ModelConfig mc = default_config(ModelKind::ChModExt, 9);
    auto ext = build_model(mc, 1);
    ModelConfig base = default_config(ModelKind::ChMod, 9);
    auto plain = build_model(base, 1);
    CHECK(ext->params().count() > plain->params().count());
    Tensor x = rand_images(1, 1, 64, 64, 18);
    CHECK(ext->forward(nullptr, x, 0).logits.shape() == Shape{1, 10});
}

TEST_CASE("chmod: modulation gradient is confined to the selected task rows") {
    ModelConfig mc = tiny_config(ModelKind::ChMod, 3);
    ChannelModModel net(mc, 22);
    testing::perturb_params(net.params().items(), 54);
    Tensor x = rand_images(2, 1, 16, 16, 19);
    Tape tape;
    ModelOutput out = net.forward(&tape, x, 2);
    Tensor loss = sum(&tape, out.logits);
    tape.backward(loss);
    for (int k = 0; k < 2; ++k) {
        Tensor* v = net.params().find("mod" + std::to_string(k));
        REQUIRE(v != nullptr);
        int C = v->dim(1);
        for (int t = 0; t < 3; ++t)
            for (int c = 0; c < C; ++c)
                if (t != 2) CHECK(v->grad()[t * C + c] == 0);
    }

    double err = testing::gradcheck_output(
        [&](Tape* t2) { return net.forward(t2, x, 2).logits; },
        net.params().tensors());
    CHECK(err < 1e-3);
}

TEST_CASE("multibranch: one trunk pass, T logit sets, permutation-invariant loss") {
    ModelConfig mc = tiny_config(ModelKind::MultiBranch, 4);
    MultiBranchModel net(mc, 23);
    Tensor x = rand_images(3, 1, 16, 16, 20);
    auto logits = net.forward_all_heads(nullptr, x);
    REQUIRE(logits.size() == 4);
    for (auto& l : logits) CHECK(l.shape() == Shape{3, 10});

    // Mean of per-head CE values is invariant under task reordering.
    std::vector<std::vector<int>> labels = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {0, 1, 2}};
    auto loss_for = [&](const std::vector<int>& order) {
        double acc = 0;
        for (int t : order) {
            Tensor p = softmax(nullptr, logits[t], SoftmaxAxis::Classes);
            acc += double(cross_entropy_hard(nullptr, p, labels[t]).item());
        }
        return acc / 4.0;
    };
    CHECK(loss_for({0, 1, 2, 3}) == doctest::Approx(loss_for({3, 1, 0, 2})).epsilon(1e-9));
}

TEST_CASE("single-task model: census is exactly T x backbone") {
    ModelConfig mc = default_config(ModelKind::Single, 9);
    SingleTaskModel net(mc, 24);
    ParamStore one;
    Xoshiro256 rng(24);
    Backbone bu(mc.backbone, one, "bu.", rng);
    CHECK(net.params().count() == 9 * one.count());
}

TEST_CASE("td-only: no lateral parameters, identity gates equal plain backbone") {
    ModelConfig mc = default_config(ModelKind::TdOnly, 9);
    ControlNet net(mc, 25);
    CHECK(!net.uses_bu1_laterals());
    for (auto& [name, t] : net.params().items()) CHECK(name.rfind("lat", 0) != 0);

    Tensor x = rand_images(2, 1, 64, 64, 26);
    ModelOutput out = net.forward(nullptr, x, 1); // gates start as identity
    BackboneActs plain = net.backbone().forward(nullptr, x);
    CHECK(bitwise_equal(out.logits, plain.logits));
}

TEST_CASE("bu-only: input carries 1+T channels") {
    ModelConfig mc = tiny_config(ModelKind::BuOnly, 3);
    BuOnlyModel net(mc, 27);
    CHECK(net.config().backbone.stages[0].in_channels == 4);
    Tensor x = rand_images(2, 4, 16, 16, 27);
    ModelOutput out = net.forward(nullptr, x, 0);
    CHECK(out.logits.shape() == Shape{2, 10});

    MnistData corpus = synth_digit_corpus(200, 300);
    auto ds = gen_by_loc(corpus, 1, 2, 4, 5);
    Tensor input = net.make_input(ds, {0, 1}, 2);
    CHECK(input.dim(1) == 4);
}

TEST_CASE("model kinds: names round-trip") {
    for (ModelKind k : {ModelKind::Single, ModelKind::MultiBranch, ModelKind::ChMod,
                        ModelKind::ChModExt, ModelKind::ControlNet, ModelKind::TdOnly,
                        ModelKind::BuOnly})
        CHECK(model_kind_from_name(model_kind_name(k)) == k);
    CHECK_THROWS_AS(model_kind_from_name("resnet"), UsageError);
}
