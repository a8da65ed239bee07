#include "tdcn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "tdcn/adam.hpp"
#include "tdcn/baselines.hpp"
#include "tdcn/controlnet.hpp"
#include "tdcn/errors.hpp"
#include "tdcn/ops.hpp"
#include "tdcn/rng.hpp"

namespace tdcn {

namespace {

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::vector<int> draw_batch(Xoshiro256& rng, const std::vector<int>& pool, int batch) {
    std::vector<int> idx(batch);
    for (int i = 0; i < batch; ++i) idx[i] = pool[rng.next_below(pool.size())];
    return idx;
}

void snapshot_params(const Model& model, std::vector<std::vector<real>>& out) {
    const auto& items = model.params().items();
    out.resize(items.size());
    for (size_t i = 0; i < items.size(); ++i)
        out[i].assign(items[i].second.data(), items[i].second.data() + items[i].second.numel());
}

void restore_params(Model& model, const std::vector<std::vector<real>>& snap) {
    auto& items = model.params().items();
    for (size_t i = 0; i < items.size(); ++i) {
        Tensor t = items[i].second;
        std::copy(snap[i].begin(), snap[i].end(), t.data());
    }
}

} // namespace

ModelConfig model_config_for(ModelKind kind, const MultiMnistDataset& ds,
                             const TrainConfig& cfg) {
    ModelConfig mc;
    mc.kind = kind;
    mc.family = ds.family;
    mc.task_count = ds.task_count();
    mc.td_width = cfg.td_width;
    mc.lambda_loc = cfg.lambda_loc;

    BackboneConfig bb = BackboneConfig::lenet_default(0, 0);
    if (!cfg.stage_widths.empty()) {
        bb.stages.clear();
        int in = 1;
        for (int w : cfg.stage_widths) {
            bb.stages.push_back({in, w});
            in = w;
        }
    }
    if (cfg.fc_hidden > 0) bb.fc_hidden = cfg.fc_hidden;
    int p = bb.pool_product();
    bb.canvas_h = pad_up(ds.H, p);
    bb.canvas_w = pad_up(ds.W, p);
    mc.backbone = bb;
    return mc;
}

Metrics evaluate(const Model& model, const MultiMnistDataset& ds, int batch) {
    const ModelConfig& mc = model.config();
    if (ds.task_count() != mc.task_count)
        throw Error("evaluate: dataset has " + std::to_string(ds.task_count()) +
                    " tasks, model expects " + std::to_string(mc.task_count));
    Metrics m;
    m.param_count = model.params().count();
    double acc_sum = 0;
    for (int t = 0; t < mc.task_count; ++t) {
        TaskSpec task = ds.task(t);
        std::vector<int> pool = task_sample_indices(ds, task);
        int64_t correct = 0;
        double loss_sum = 0;
        for (size_t at = 0; at < pool.size(); at += size_t(batch)) {
            std::vector<int> idx(pool.begin() + at,
                                 pool.begin() + std::min(pool.size(), at + size_t(batch)));
            Tensor input = model.make_input(ds, idx, t);
            ModelOutput out = model.forward(nullptr, input, t);
            std::vector<int> labels = labels_for_task(ds, idx, task);
            std::vector<int> pred = argmax_rows(out.logits);
            for (size_t i = 0; i < idx.size(); ++i)
                if (pred[i] == labels[i]) ++correct;
            Tensor probs = softmax(nullptr, out.logits, SoftmaxAxis::Classes);
            loss_sum += double(cross_entropy_hard(nullptr, probs, labels).item()) *
                        double(idx.size());
        }
        double acc = pool.empty() ? 0.0 : double(correct) / double(pool.size());
        m.per_task_acc.push_back(acc);
        m.per_task_loss.push_back(pool.empty() ? 0.0 : loss_sum / double(pool.size()));
        acc_sum += acc;
    }
    m.mean_acc = acc_sum / double(mc.task_count);
    return m;
}

TrainResult train(const TrainConfig& cfg, const MultiMnistDataset& train_ds,
                  const MultiMnistDataset* eval_ds, const std::string& checkpoint_path,
                  const std::string& metrics_csv) {
    if (cfg.epochs < 0 || cfg.batch <= 0)
        throw UsageError("train: epochs must be >= 0 and batch > 0");
    double t0 = now_seconds();

    ModelConfig mc = model_config_for(cfg.kind, train_ds, cfg);
    std::unique_ptr<Model> model = build_model(mc, cfg.seed);
    AdamConfig ac;
    ac.lr = real(cfg.lr);
    AdamOptimizer opt(model->params().tensors(), ac);

    int T = mc.task_count;
    int Hp = mc.backbone.canvas_h, Wp = mc.backbone.canvas_w;
    bool loc = model->has_loc_head() && cfg.lambda_loc > 0;

    std::vector<std::vector<int>> task_pool(T);
    for (int t = 0; t < T; ++t)
        task_pool[t] = task_sample_indices(train_ds, train_ds.task(t));

    Xoshiro256 rng(derive_seed(cfg.seed, 0x7261696Eull)); // training stream

    int steps_per_epoch = int((int64_t(train_ds.n) + cfg.batch - 1) / cfg.batch);
    std::vector<std::pair<int, double>> train_loss;
    std::vector<std::pair<int, Metrics>> eval_history;
    std::vector<std::vector<real>> best_snap;
    Metrics best_metrics;
    int best_epoch = 0;
    bool have_best = false;

    auto run_eval = [&](int epoch) {
        if (!eval_ds) return;
        Metrics em = evaluate(*model, *eval_ds, cfg.batch);
        eval_history.emplace_back(epoch, em);
        if (!have_best || em.mean_acc > best_metrics.mean_acc) {
            have_best = true;
            best_metrics = em;
            best_epoch = epoch;
            snapshot_params(*model, best_snap);
            if (!checkpoint_path.empty()) save_checkpoint(*model, checkpoint_path);
        }
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_acc = 0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            Tape tape;
            Tensor loss;
            if (mc.kind == ModelKind::MultiBranch && mc.family == TaskFamily::ByLoc) {
                // Uniform scaling: every head's loss, equally weighted.
                std::vector<int> idx = draw_batch(rng, task_pool[0], cfg.batch);
                Tensor input = model->make_input(train_ds, idx, 0);
                auto* mb = static_cast<MultiBranchModel*>(model.get());
                std::vector<Tensor> logits = mb->forward_all_heads(&tape, input);
                for (int t = 0; t < T; ++t) {
                    std::vector<int> labels =
                        labels_for_task(train_ds, idx, train_ds.task(t));
                    Tensor probs = softmax(&tape, logits[t], SoftmaxAxis::Classes);
                    Tensor ce = cross_entropy_hard(&tape, probs, labels);
                    loss = loss.defined() ? add(&tape, loss, ce) : ce;
                }
                loss = scale(&tape, loss, real(1.0 / T));
            } else {
                int t = int(rng.next_below(uint64_t(T)));
                TaskSpec task = train_ds.task(t);
                std::vector<int> idx = draw_batch(rng, task_pool[t], cfg.batch);
                Tensor input = model->make_input(train_ds, idx, t);
                ModelOutput out = model->forward(&tape, input, t);
                std::vector<int> labels = labels_for_task(train_ds, idx, task);
                Tensor target;
                if (loc) target = make_loc_target_batch(train_ds, idx, task, Hp, Wp);
                loss = control_loss(&tape, out.logits, labels, out.loc_logits, target,
                                    loc ? cfg.lambda_loc : 0.0);
            }
            double lv = double(loss.item());
            if (!std::isfinite(lv))
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + " step " +
                                   std::to_string(step));
            loss_acc += lv;
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
        }
        train_loss.emplace_back(epoch, loss_acc / steps_per_epoch);
        if (epoch % cfg.eval_interval == 0 || epoch == cfg.epochs) run_eval(epoch);
    }

    if (cfg.epochs == 0) run_eval(0);
    if (!have_best) {
        snapshot_params(*model, best_snap);
        best_metrics.param_count = model->params().count();
    } else {
        restore_params(*model, best_snap);
    }

    if (!checkpoint_path.empty()) save_checkpoint(*model, checkpoint_path);
    best_metrics.train_loss = train_loss;
    best_metrics.param_count = model->params().count();
    best_metrics.wall_seconds = now_seconds() - t0;
    if (!metrics_csv.empty()) write_metrics_csv(metrics_csv, eval_history, train_loss);

    TrainResult res;
    res.model = std::move(model);
    res.metrics = best_metrics;
    res.best_epoch = best_epoch;
    return res;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<int, Metrics>>& evals,
                       const std::vector<std::pair<int, double>>& train_loss) {
    std::ofstream f(path);
    if (!f) throw FormatError("metrics: cannot write " + path);
    f << "epoch,task,split,accuracy,loss\n";
    for (const auto& [epoch, loss] : train_loss)
        f << epoch << ",all,train,," << loss << "\n";
    for (const auto& [epoch, m] : evals) {
        for (size_t t = 0; t < m.per_task_acc.size(); ++t)
            f << epoch << "," << t << ",eval," << m.per_task_acc[t] << ","
              << m.per_task_loss[t] << "\n";
        f << epoch << ",mean,eval," << m.mean_acc << ",\n";
    }
}

SelectivityReport selectivity_from_matrix(const std::vector<double>& acc, int tasks,
                                          double chance) {
    if (int(acc.size()) != tasks * tasks)
        throw Error("selectivity: matrix size mismatch");
    SelectivityReport r;
    r.tasks = tasks;
    r.acc = acc;
    r.chance = chance;
    double diag = 0, off = 0;
    for (int i = 0; i < tasks; ++i)
        for (int j = 0; j < tasks; ++j) {
            if (i == j)
                diag += acc[i * tasks + j];
            else
                off += acc[i * tasks + j];
        }
    r.diag_mean = diag / tasks;
    r.off_mean = tasks > 1 ? off / (double(tasks) * (tasks - 1)) : 0.0;
    double denom = r.off_mean - chance;
    if (denom > 1e-3) {
        r.index = (r.diag_mean - chance) / denom;
        r.degenerate = false;
    } else {
        r.index = 0;
        r.degenerate = true;
    }
    return r;
}

namespace {

// Representations under a fixed selected task, computed without a tape (the
// frozen-feature contract: model parameters never see a gradient here).
std::vector<real> representations(const Model& model, const MultiMnistDataset& ds,
                                  const std::vector<int>& pool, int task, int batch,
                                  int hidden_dim) {
    std::vector<real> reps(size_t(pool.size()) * hidden_dim);
    for (size_t at = 0; at < pool.size(); at += size_t(batch)) {
        std::vector<int> idx(pool.begin() + at,
                             pool.begin() + std::min(pool.size(), at + size_t(batch)));
        Tensor input = model.make_input(ds, idx, task);
        ModelOutput out = model.forward(nullptr, input, task);
        if (out.hidden.dim(1) != hidden_dim)
            throw Error("readout: unexpected representation width");
        std::copy(out.hidden.data(), out.hidden.data() + out.hidden.numel(),
                  reps.begin() + at * size_t(hidden_dim));
    }
    return reps;
}

} // namespace

SelectivityReport train_readout_heads(const Model& model,
                                      const MultiMnistDataset& train_ds,
                                      const MultiMnistDataset& eval_ds, uint64_t seed,
                                      int epochs, double lr, int batch) {
    if (train_ds.family != TaskFamily::ByLoc)
        throw Error("readout: selectivity measurement uses by-loc datasets");
    int T = train_ds.task_count();
    int h = model.config().backbone.fc_hidden;
    int n_train = int(train_ds.n), n_eval = int(eval_ds.n);

    std::vector<int> all_train(n_train), all_eval(n_eval);
    for (int i = 0; i < n_train; ++i) all_train[i] = i;
    for (int i = 0; i < n_eval; ++i) all_eval[i] = i;

    std::vector<double> matrix(size_t(T) * T, 0.0);
    for (int selected = 0; selected < T; ++selected) {
        std::vector<real> rep_tr =
            representations(model, train_ds, all_train, selected, 512, h);
        std::vector<real> rep_ev =
            representations(model, eval_ds, all_eval, selected, 512, h);

        for (int readout = 0; readout < T; ++readout) {
            Xoshiro256 rng(derive_seed(seed, uint64_t(selected) * 64 + readout));
            Tensor w({10, h});
            init::kaiming_uniform(w, h, rng);
            Tensor b = Tensor::zeros({10});
            w.set_requires_grad(true);
            b.set_requires_grad(true);
            AdamConfig ac;
            ac.lr = real(lr);
            AdamOptimizer opt({w, b}, ac);

            TaskSpec rtask = train_ds.task(readout);
            std::vector<int> labels_tr = labels_for_task(train_ds, all_train, rtask);
            int steps = (n_train + batch - 1) / batch;
            for (int e = 0; e < epochs; ++e) {
                for (int s = 0; s < steps; ++s) {
                    int bsz = std::min(batch, n_train - s * batch);
                    Tensor x({bsz, h});
                    std::vector<int> lb(bsz);
                    for (int i = 0; i < bsz; ++i) {
                        int row = s * batch + i;
                        std::copy(rep_tr.begin() + size_t(row) * h,
                                  rep_tr.begin() + size_t(row + 1) * h,
                                  x.data() + int64_t(i) * h);
                        lb[i] = labels_tr[row];
                    }
                    Tape tape;
                    Tensor probs =
                        softmax(&tape, linear(&tape, x, w, b), SoftmaxAxis::Classes);
                    Tensor loss = cross_entropy_hard(&tape, probs, lb);
                    tape.backward(loss);
                    opt.step();
                    opt.zero_grad();
                }
            }

            std::vector<int> labels_ev = labels_for_task(eval_ds, all_eval, rtask);
            int64_t correct = 0;
            for (int at = 0; at < n_eval; at += batch) {
                int bsz = std::min(batch, n_eval - at);
                Tensor x({bsz, h});
                for (int i = 0; i < bsz; ++i)
                    std::copy(rep_ev.begin() + size_t(at + i) * h,
                              rep_ev.begin() + size_t(at + i + 1) * h,
                              x.data() + int64_t(i) * h);
                std::vector<int> pred = argmax_rows(linear(nullptr, x, w, b));
                for (int i = 0; i < bsz; ++i)
                    if (pred[i] == labels_ev[at + i]) ++correct;
            }
            matrix[size_t(selected) * T + readout] = double(correct) / double(n_eval);
        }
    }
    return selectivity_from_matrix(matrix, T);
}

void write_selectivity_csv(const SelectivityReport& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("selectivity: cannot write " + path);
    f << "selected";
    for (int j = 0; j < r.tasks; ++j) f << ",readout" << j;
    f << "\n";
    for (int i = 0; i < r.tasks; ++i) {
        f << i;
        for (int j = 0; j < r.tasks; ++j) f << "," << r.acc[size_t(i) * r.tasks + j];
        f << "\n";
    }
}

} // namespace tdcn
