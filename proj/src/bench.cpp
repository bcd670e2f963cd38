#include "prism/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace prism {

using nlohmann::json;

std::vector<SuiteEntry> load_suite(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_suite: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("load_suite: malformed JSON in " + path + ": " + e.what());
    }
    if (!j.is_array()) throw std::runtime_error("load_suite: expected a JSON list");

    std::vector<SuiteEntry> entries;
    for (const auto& item : j) {
        SuiteEntry e;
        e.name = item.at("name").get<std::string>();
        if (item.contains("flags")) {
            for (const auto& [k, v] : item.at("flags").items()) {
                if (v.is_string())
                    e.flags[k] = v.get<std::string>();
                else
                    e.flags[k] = v.dump();
            }
        }
        e.seeds = item.at("seeds").get<std::vector<uint64_t>>();
        if (e.seeds.empty()) throw std::runtime_error("load_suite: config '" + e.name + "' has no seeds");
        entries.push_back(std::move(e));
    }
    return entries;
}

void apply_flag(RunSettings& s, const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };

    if (key == "data") s.data_path = value;
    else if (key == "protos") s.protos_path = value;
    else if (key == "max_epochs") s.train.max_epochs = as_int();
    else if (key == "lr") s.train.learning_rate = as_double();
    else if (key == "batch_size") s.train.batch_size = as_int();
    else if (key == "patience") s.train.patience = as_int();
    else if (key == "weight_decay") s.train.weight_decay = as_double();
    else if (key == "embed_dim") s.train.model.embed_dim = as_int();
    else if (key == "proto_dim") s.train.model.proto_dim = as_int();
    else if (key == "pm") s.train.model.pm_kind = preference_kind_from(value);
    else if (key == "rm") s.train.model.rm_kind = relevance_kind_from(value);
    else if (key == "fusion") s.train.model.fusion = fusion_kind_from(value);
    else if (key == "rectify_iters") s.train.model.rectify_iters = as_int();
    else if (key == "tau") s.train.model.tau = as_double();
    else if (key == "t_proto") s.train.model.T_proto = as_double();
    else if (key == "gamma") s.train.model.gamma = as_double();
    else if (key == "lambda_mag") s.train.weights.lambda_mag = as_double();
    else if (key == "lambda_dir") s.train.weights.lambda_dir = as_double();
    else if (key == "lambda_pr") s.train.weights.lambda_pr = as_double();
    else if (key == "lambda_att") s.train.weights.lambda_att = as_double();
    else if (key == "lambda_rel_aux") s.train.weights.lambda_rel_aux = as_double();
    else if (key == "hot_quantile") s.hot_quantile = as_double();
    else if (key == "k") s.top_k = as_int();
    else if (key == "ablate") {
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok == "rectify") s.train.model.use_rectify = false;
            else if (tok == "anchor") s.train.model.use_anchor = false;
            else if (tok == "route") s.train.model.use_route = false;
            else if (!tok.empty()) throw std::invalid_argument("unknown ablate target '" + tok + "'");
        }
    } else {
        throw std::invalid_argument("unknown suite flag '" + key + "'");
    }
}

SuiteResult run_suite(std::span<const SuiteEntry> entries, const std::string& out_dir) {
    SuiteResult result;
    for (const auto& entry : entries) {
        for (uint64_t seed : entry.seeds) {
            RunOutcome outcome;
            outcome.config = entry.name;
            outcome.seed = seed;
            try {
                RunSettings settings;
                for (const auto& [k, v] : entry.flags) apply_flag(settings, k, v);
                settings.train.seed = seed;
                if (settings.data_path.empty())
                    throw std::runtime_error("suite config '" + entry.name + "' sets no data path");
                const std::string run_dir =
                    out_dir + "/" + entry.name + "/seed" + std::to_string(seed);
                ensure_dir(run_dir);
                RunArtifacts art = run_job(settings, run_dir);
                const auto& overall = art.test_report.at("overall");
                outcome.auc = overall.auc.value_or(0.5);
                outcome.logloss = overall.logloss.value_or(0.0);
                outcome.ndcg = overall.ndcg.value_or(0.0);
                outcome.hr = overall.hr.value_or(0.0);
                outcome.ok = true;
            } catch (const std::exception& e) {
                outcome.ok = false;
                outcome.error = e.what();
                std::cerr << "[bench] run failed: config=" << entry.name << " seed=" << seed
                          << ": " << e.what() << "\n";
            }
            result.runs.push_back(std::move(outcome));
        }
    }
    return result;
}

namespace {

struct Agg {
    double mean = 0, stddev = 0;
};

Agg aggregate(const std::vector<double>& xs) {
    Agg a;
    if (xs.empty()) return a;
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return a;
}

}  // namespace

void write_aggregate_csv(const SuiteResult& result, std::span<const SuiteEntry> entries,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_aggregate_csv: cannot open " + path);
    out << "config,n_runs,n_failed,auc_mean,auc_std,logloss_mean,logloss_std,"
           "ndcg10_mean,ndcg10_std,hr10_mean,hr10_std,delta_auc_vs_first\n";

    char buf[512];
    double first_auc_mean = 0.0;
    bool first_set = false;
    for (const auto& entry : entries) {
        std::vector<double> aucs, lls, ndcgs, hrs;
        size_t failed = 0;
        for (const auto& run : result.runs) {
            if (run.config != entry.name) continue;
            if (!run.ok) {
                ++failed;
                continue;
            }
            aucs.push_back(run.auc);
            lls.push_back(run.logloss);
            ndcgs.push_back(run.ndcg);
            hrs.push_back(run.hr);
        }
        const Agg a = aggregate(aucs), l = aggregate(lls), n = aggregate(ndcgs), h = aggregate(hrs);
        if (!first_set) {
            first_auc_mean = a.mean;
            first_set = true;
        }
        std::snprintf(buf, sizeof(buf),
                      "%s,%zu,%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      entry.name.c_str(), aucs.size(), failed, a.mean, a.stddev, l.mean, l.stddev,
                      n.mean, n.stddev, h.mean, h.stddev, a.mean - first_auc_mean);
        out << buf;
    }
    if (!out) throw std::runtime_error("write_aggregate_csv: write failed for " + path);
}

}  // namespace prism
