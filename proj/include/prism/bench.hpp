#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "prism/pipeline.hpp"

namespace prism {

// Suite spec file: JSON list of {"name": str, "flags": {key: value}, "seeds": [int...]}.
// Flag keys mirror the CLI training flags (data, protos, max_epochs, lr, ...).
struct SuiteEntry {
    std::string name;
    std::map<std::string, std::string> flags;
    std::vector<uint64_t> seeds;
};

std::vector<SuiteEntry> load_suite(const std::string& path);

// Translates one textual flag into the run settings; unknown keys are rejected.
void apply_flag(RunSettings& settings, const std::string& key, const std::string& value);

struct RunOutcome {
    std::string config;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double auc = 0, logloss = 0, ndcg = 0, hr = 0;
};

struct SuiteResult {
    std::vector<RunOutcome> runs;
};

// Runs train+eval per (config, seed); failures are recorded and skipped, the
// suite continues. Each run writes into out_dir/<config>/seed<k>/.
SuiteResult run_suite(std::span<const SuiteEntry> entries, const std::string& out_dir);

// One aggregate row per config: mean and sample (n-1) standard deviation of
// each test metric, plus the AUC delta against the first config.
void write_aggregate_csv(const SuiteResult& result, std::span<const SuiteEntry> entries,
                         const std::string& path);

}  // namespace prism
