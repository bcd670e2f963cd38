#pragma once

#include <string>

#include "prism/metrics.hpp"
#include "prism/train.hpp"

namespace prism {

// One end-to-end run: load data, temporal split, train on the first 80%,
// early-stop on the middle 10%, evaluate on the final 10%.
struct RunSettings {
    TrainConfig train;
    std::string data_path;
    std::string protos_path;  // may stay empty when the anchor module is off
    double hot_quantile = 0.2;
    int top_k = 10;
};

struct RunArtifacts {
    Checkpoint checkpoint;
    std::vector<EpochStats> history;
    MetricReport test_report;
};

// Trains and evaluates; when out_dir is non-empty, writes checkpoint.json,
// history.csv and report.csv there.
RunArtifacts run_job(const RunSettings& settings, const std::string& out_dir);

// Scores an eval split with a trained model and produces the subset report.
MetricReport evaluate_split(const PrismModel& model, const Dataset& train_ds,
                            const Dataset& eval_ds, double hot_quantile, int top_k);

// Per-impression inspection rows (cmd_inspect); dump_repr appends the r vector.
void write_inspect_csv(const PrismModel& model, const Dataset& ds, const std::string& path,
                       bool dump_repr);

void ensure_dir(const std::string& path);

}  // namespace prism
