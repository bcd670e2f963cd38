#pragma once

#include <map>
#include <string>
#include <vector>

#include "prism/model.hpp"

namespace prism {

struct TrainConfig {
    PrismConfig model;
    LossWeights weights;
    double learning_rate = 1e-3;
    int batch_size = 256;
    double weight_decay = 1e-6;
    int patience = 2;
    int max_epochs = 10;
    uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double l_bce = 0, l_mag = 0, l_dir = 0, l_pr = 0, l_att = 0, l_rel_aux = 0;
    double val_auc = 0, val_logloss = 0;
};

struct Checkpoint {
    PrismConfig cfg;
    int n_users = 0, n_queries = 0, n_items = 0;
    std::map<std::string, Array> params;
    double best_val_auc = 0.0;
    int epoch = 0;  // epoch the parameters were taken from
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds a model and verifies the checkpoint parameter set matches what the
// configuration requires (same names and shapes), naming the first offender.
PrismModel model_from_checkpoint(const Checkpoint& ckpt);
Checkpoint checkpoint_from_model(const PrismModel& model, double best_val_auc, int epoch);

struct AdamState {
    std::map<std::string, Array> m, v;
    int64_t step = 0;
};

// Adam with bias correction; decoupled weight decay runs before the moment
// update. Parameters without a gradient entry are treated as zero-gradient.
void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
               double weight_decay = 1e-6);

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
};

TrainResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& valid_ds,
                  const PrototypePair& protos);

// CSV columns: epoch,l_bce,l_mag,l_dir,l_pr,l_att,l_rel_aux,val_auc,val_logloss
void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace prism
