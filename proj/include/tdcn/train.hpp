#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tdcn/checkpoint.hpp"
#include "tdcn/model.hpp"

namespace tdcn {

struct TrainConfig {
    ModelKind kind = ModelKind::ControlNet;
    int epochs = 100;      // reference setting for the full-scale runs
    double lr = 1e-3;
    int batch = 512;
    uint64_t seed = 0;
    double lambda_loc = 1.0;
    int eval_interval = 5; // epochs between eval passes
    bool deterministic = true;
    int td_width = 0;              // reduced-TD channel width; 0 = replica
    std::vector<int> stage_widths; // optional backbone width override
    int fc_hidden = 0;             // optional override; 0 = default
};

struct Metrics {
    std::vector<double> per_task_acc;
    std::vector<double> per_task_loss;
    double mean_acc = 0;
    std::vector<std::pair<int, double>> train_loss; // (epoch, mean batch loss)
    double wall_seconds = 0;
    int64_t param_count = 0;
};

struct TrainResult {
    std::unique_ptr<Model> model; // best-eval parameters
    Metrics metrics;              // from the best checkpoint
    int best_epoch = 0;
};

// Network-input config implied by a dataset: canvases padded up to the
// backbone's pooling factor.
ModelConfig model_config_for(ModelKind kind, const MultiMnistDataset& ds,
                             const TrainConfig& cfg);

// Single-tasking training: each batch draws one task uniformly, assembles
// that task's labels (and localization targets when the model has a TD
// head), then takes one Adam step. MultiBranch instead averages all task
// losses per batch. Writes the best-eval checkpoint and metrics CSV when
// paths are given.
TrainResult train(const TrainConfig& cfg, const MultiMnistDataset& train_ds,
                  const MultiMnistDataset* eval_ds,
                  const std::string& checkpoint_path = "",
                  const std::string& metrics_csv = "");

// Applies every task sequentially to its eval split; accuracy = fraction
// correct, mean = arithmetic mean over tasks.
Metrics evaluate(const Model& model, const MultiMnistDataset& ds, int batch = 512);

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<int, Metrics>>& evals,
                       const std::vector<std::pair<int, double>>& train_loss);

// ---- task selectivity

struct SelectivityReport {
    int tasks = 0;
    std::vector<double> acc; // tasks x tasks, row = selected task, col = readout
    double chance = 0.1;
    double diag_mean = 0, off_mean = 0;
    double index = 0;
    bool degenerate = false; // off-diagonal at or below chance (denominator <= 1e-3)
};

SelectivityReport selectivity_from_matrix(const std::vector<double>& acc, int tasks,
                                          double chance = 0.1);

// Freezes the model, computes final pre-logit representations under each
// selected task, and trains one linear readout head per grid location on the
// train split (10 epochs Adam, lr 1e-3); fills the accuracy matrix on the
// eval split. By-loc datasets only.
SelectivityReport train_readout_heads(const Model& model,
                                      const MultiMnistDataset& train_ds,
                                      const MultiMnistDataset& eval_ds, uint64_t seed,
                                      int epochs = 10, double lr = 1e-3,
                                      int batch = 256);

void write_selectivity_csv(const SelectivityReport& report, const std::string& path);

} // namespace tdcn
