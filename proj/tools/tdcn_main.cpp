#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "tdcn/checkpoint.hpp"
#include "tdcn/config.hpp"
#include "tdcn/controlnet.hpp"
#include "tdcn/digits.hpp"
#include "tdcn/errors.hpp"
#include "tdcn/idx.hpp"
#include "tdcn/mmnist.hpp"
#include "tdcn/pgm.hpp"
#include "tdcn/train.hpp"

namespace {

using namespace tdcn;

std::pair<int, int> parse_grid(const std::string& s) {
    size_t x = s.find('x');
    if (x == std::string::npos)
        throw UsageError("--grid expects RxC (e.g. 3x3), got '" + s + "'");
    int a = std::stoi(s.substr(0, x));
    int b = std::stoi(s.substr(x + 1));
    if (a == 2 && b == 1) std::swap(a, b); // the two-digit grid is one row
    if (!((a == 1 && b == 2) || (a == 2 && b == 2) || (a == 3 && b == 3)))
        throw UsageError("--grid must be one of 2x1, 2x2, 3x3");
    return {a, b};
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::stoi(cur));
    return out;
}

// Config-file keys are long option names without the leading dashes; flags
// given on the command line win.
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::vector<int> lines;
    auto pairs = parse_config_file(path, &lines);
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& [key, value] = pairs[i];
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt)
            throw UsageError("config: " + path + ":" + std::to_string(lines[i]) +
                             ": unknown key '" + key + "'");
        if (opt->count() == 0) {
            opt->add_result(value);
            opt->run_callback();
        }
    }
}

MnistData load_source(const std::string& mnist_dir, int synth_n,
                      const std::string& split) {
    bool train = split != "t10k" && split != "test";
    if (!mnist_dir.empty()) return load_mnist_dir(mnist_dir, train);
    if (synth_n > 0) {
        uint64_t corpus_seed = train ? 101 : 202;
        return synth_digit_corpus(synth_n, corpus_seed);
    }
    throw UsageError("gen needs --mnist-dir or --synth-source");
}

MultiMnistDataset load_ds(const std::string& path) { return read_dataset(path); }

void print_metrics(const Metrics& m) {
    for (size_t t = 0; t < m.per_task_acc.size(); ++t)
        std::printf("task %zu: accuracy %.4f  loss %.4f\n", t, m.per_task_acc[t],
                    m.per_task_loss[t]);
    std::printf("mean accuracy: %.4f\n", m.mean_acc);
    std::printf("parameters: %lld\n", (long long)m.param_count);
}

int run(int argc, char** argv) {
    CLI::App app{"top-down control networks for multi-task digit grids"};
    app.require_subcommand(1);

    // ---- gen
    auto* gen = app.add_subcommand("gen", "generate a digit-grid dataset");
    std::string g_grid = "3x3", g_family = "by_loc", g_mnist, g_out, g_split = "train";
    std::string g_config;
    int g_n = 60000, g_synth = 0;
    uint64_t g_seed = 42;
    gen->option_defaults()->always_capture_default();
    gen->add_option("--grid", g_grid, "grid layout: 2x1, 2x2 or 3x3");
    gen->add_option("--family", g_family, "task family: by_loc or by_ref");
    gen->add_option("--n", g_n, "number of samples");
    gen->add_option("--seed", g_seed, "generation seed");
    gen->add_option("--mnist-dir", g_mnist, "directory with MNIST idx files");
    gen->add_option("--split", g_split, "source split: train or t10k");
    gen->add_option("--synth-source", g_synth,
                    "synthesize a digit corpus of this size instead of reading MNIST");
    gen->add_option("--out", g_out, "output dataset file")->required();
    gen->add_option("--config", g_config, "key = value config file");

    // ---- train
    auto* tr = app.add_subcommand("train", "train a model on a dataset");
    std::string t_model = "controlnet", t_data, t_eval, t_out, t_metrics, t_config,
        t_widths;
    TrainConfig tc;
    tr->option_defaults()->always_capture_default();
    tr->add_option("--model", t_model,
                   "single|multibranch|chmod|chmod-ext|controlnet|td-only|bu-only");
    tr->add_option("--data", t_data, "training dataset")->required();
    tr->add_option("--eval-data", t_eval, "eval dataset (best-checkpoint selection)");
    tr->add_option("--epochs", tc.epochs, "training epochs");
    tr->add_option("--lr", tc.lr, "Adam learning rate");
    tr->add_option("--batch", tc.batch, "batch size");
    tr->add_option("--seed", tc.seed, "init + sampling seed");
    tr->add_option("--lambda-loc", tc.lambda_loc, "localization loss weight");
    tr->add_option("--eval-interval", tc.eval_interval, "epochs between evals");
    tr->add_option("--td-width", tc.td_width, "reduced TD channel width (0 = replica)");
    tr->add_option("--widths", t_widths, "backbone stage widths, e.g. 6,12,24");
    tr->add_option("--fc-hidden", tc.fc_hidden, "hidden layer width (0 = default)");
    tr->add_flag("--deterministic", tc.deterministic,
                 "bit-reproducible outputs (always on; flag kept for scripts)");
    tr->add_option("--out", t_out, "checkpoint output path")->required();
    tr->add_option("--metrics", t_metrics, "metrics CSV path");
    tr->add_option("--config", t_config, "key = value config file");

    // ---- eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string e_ckpt, e_data, e_metrics, e_config;
    ev->option_defaults()->always_capture_default();
    ev->add_option("--ckpt", e_ckpt, "checkpoint file")->required();
    ev->add_option("--data", e_data, "eval dataset")->required();
    ev->add_option("--metrics", e_metrics, "metrics CSV path");
    ev->add_option("--config", e_config, "key = value config file");

    // ---- selectivity
    auto* se = app.add_subcommand("selectivity", "readout-head task selectivity");
    std::string s_ckpt, s_data, s_eval, s_out, s_config;
    uint64_t s_seed = 0;
    int s_epochs = 10;
    double s_lr = 1e-3;
    se->option_defaults()->always_capture_default();
    se->add_option("--ckpt", s_ckpt, "checkpoint file")->required();
    se->add_option("--data", s_data, "by-loc dataset (readout training split)")
        ->required();
    se->add_option("--eval-data", s_eval,
                   "eval split (defaults to the last 20% of --data)");
    se->add_option("--out", s_out, "matrix CSV path")->required();
    se->add_option("--seed", s_seed, "readout head init seed");
    se->add_option("--epochs", s_epochs, "readout training epochs");
    se->add_option("--lr", s_lr, "readout Adam learning rate");
    se->add_option("--config", s_config, "key = value config file");

    // ---- maps
    auto* mp = app.add_subcommand("maps", "export task-dependent spatial maps as PGM");
    std::string m_ckpt, m_data, m_dir, m_samples = "0", m_tasks = "all", m_config;
    mp->option_defaults()->always_capture_default();
    mp->add_option("--ckpt", m_ckpt, "controlnet checkpoint")->required();
    mp->add_option("--data", m_data, "dataset file")->required();
    mp->add_option("--out", m_dir, "output directory")->required();
    mp->add_option("--samples", m_samples, "comma-separated sample indices");
    mp->add_option("--tasks", m_tasks, "comma-separated task indices or 'all'");
    mp->add_option("--config", m_config, "key = value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        if (!g_config.empty()) apply_config_file(gen, g_config);
        auto [rows, cols] = parse_grid(g_grid);
        MnistData src = load_source(g_mnist, g_synth, g_split);
        MultiMnistDataset ds;
        if (g_family == "by_loc")
            ds = gen_by_loc(src, rows, cols, g_n, g_seed);
        else if (g_family == "by_ref")
            ds = gen_by_ref(src, rows, cols, g_n, g_seed);
        else
            throw UsageError("--family must be by_loc or by_ref");
        write_dataset(ds, g_out);
        std::printf("wrote %s: %u samples, %ux%u grid, canvas %ux%u, %d tasks\n",
                    g_out.c_str(), ds.n, ds.rows, ds.cols, ds.H, ds.W,
                    ds.task_count());
        return 0;
    }

    if (tr->parsed()) {
        if (!t_config.empty()) apply_config_file(tr, t_config);
        tc.kind = model_kind_from_name(t_model);
        if (!t_widths.empty()) tc.stage_widths = parse_int_list(t_widths);
        MultiMnistDataset train_ds = load_ds(t_data);
        MultiMnistDataset eval_ds;
        bool have_eval = !t_eval.empty();
        if (have_eval) eval_ds = load_ds(t_eval);
        TrainResult res = train(tc, train_ds, have_eval ? &eval_ds : nullptr, t_out,
                                t_metrics);
        std::printf("model %s, best epoch %d\n", t_model.c_str(), res.best_epoch);
        print_metrics(res.metrics);
        std::printf("wall clock: %.1fs\n", res.metrics.wall_seconds);
        return 0;
    }

    if (ev->parsed()) {
        if (!e_config.empty()) apply_config_file(ev, e_config);
        std::unique_ptr<Model> model = load_checkpoint(e_ckpt);
        MultiMnistDataset ds = load_ds(e_data);
        Metrics m = evaluate(*model, ds);
        print_metrics(m);
        if (!e_metrics.empty()) write_metrics_csv(e_metrics, {{0, m}}, {});
        return 0;
    }

    if (se->parsed()) {
        if (!s_config.empty()) apply_config_file(se, s_config);
        std::unique_ptr<Model> model = load_checkpoint(s_ckpt);
        MultiMnistDataset data = load_ds(s_data);
        MultiMnistDataset train_split, eval_split;
        if (!s_eval.empty()) {
            train_split = std::move(data);
            eval_split = load_ds(s_eval);
        } else {
            // 80/20 split of --data in sample order.
            train_split = data;
            eval_split = data;
            uint32_t cut = data.n * 4 / 5;
            train_split.samples.assign(data.samples.begin(), data.samples.begin() + cut);
            train_split.n = cut;
            eval_split.samples.assign(data.samples.begin() + cut, data.samples.end());
            eval_split.n = data.n - cut;
        }
        SelectivityReport rep =
            train_readout_heads(*model, train_split, eval_split, s_seed, s_epochs, s_lr);
        write_selectivity_csv(rep, s_out);
        std::printf("diagonal mean: %.4f  off-diagonal mean: %.4f  chance: %.2f\n",
                    rep.diag_mean, rep.off_mean, rep.chance);
        if (rep.degenerate)
            std::printf("selectivity index: degenerate (off-diagonal at/below chance)\n");
        else
            std::printf("selectivity index: %.3f\n", rep.index);
        return 0;
    }

    if (mp->parsed()) {
        if (!m_config.empty()) apply_config_file(mp, m_config);
        std::unique_ptr<Model> model = load_checkpoint(m_ckpt);
        if (!model->has_loc_head())
            throw UsageError("maps: checkpoint has no localization head (controlnet only)");
        MultiMnistDataset ds = load_ds(m_data);
        std::vector<int> samples = parse_int_list(m_samples);
        std::vector<int> tasks;
        if (m_tasks == "all") {
            for (int t = 0; t < ds.task_count(); ++t) tasks.push_back(t);
        } else {
            tasks = parse_int_list(m_tasks);
        }
        int Hp = model->config().backbone.canvas_h;
        int Wp = model->config().backbone.canvas_w;
        for (int s : samples) {
            if (s < 0 || s >= int(ds.n))
                throw UsageError("maps: sample " + std::to_string(s) + " out of range");
            for (int t : tasks) {
                Tensor img = make_image_batch(ds, {s}, Hp, Wp);
                Tensor map = extract_map(*model, img, t);
                std::string path =
                    m_dir + "/" + std::to_string(s) + "_" + std::to_string(t) + ".pgm";
                write_pgm(path, map);
            }
        }
        std::printf("wrote %zu maps to %s\n", samples.size() * tasks.size(),
                    m_dir.c_str());
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const tdcn::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const tdcn::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const tdcn::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
