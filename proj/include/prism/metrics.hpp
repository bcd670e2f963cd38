#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prism {

struct ScoredImpression {
    std::string session_id;
    std::string item_id;
    int label = 0;
    double score = 0.0;
    bool item_hot = false;
    bool query_hot = false;
};

struct RankedEntry {
    std::string item_id;
    int label = 0;
    double score = 0.0;
};

struct ScoredSession {
    std::string session_id;
    std::vector<RankedEntry> entries;
};

// Mann-Whitney AUC by rank summation (ties count one half). Absent when a
// class is missing.
std::optional<double> auc(std::span<const int> labels, std::span<const double> scores);

// Mean negative log-likelihood with scores clamped into [1e-7, 1-1e-7].
double logloss(std::span<const int> labels, std::span<const double> scores);

// Ranking metrics average only over sessions that contain a positive label.
// Within a session, entries sort by score descending, ties by item_id
// ascending.
std::optional<double> ndcg_at_k(std::span<const ScoredSession> sessions, int k = 10);
std::optional<double> hr_at_k(std::span<const ScoredSession> sessions, int k = 10);

std::vector<ScoredSession> group_sessions(std::span<const ScoredImpression> imps);

struct SubsetMetrics {
    std::optional<double> auc;
    std::optional<double> logloss;
    std::optional<double> ndcg;
    std::optional<double> hr;
    size_t n_impressions = 0;
    size_t n_sessions_with_pos = 0;
};

struct MetricReport {
    // fixed order: overall, ihot, itail, qhot, qtail
    std::vector<std::pair<std::string, SubsetMetrics>> subsets;

    const SubsetMetrics& at(const std::string& name) const;
};

MetricReport evaluate(std::span<const ScoredImpression> imps, int k = 10);

// CSV columns: subset,metric,value,n. Absent metrics keep an empty value.
void write_report_csv(const MetricReport& report, const std::string& path);

}  // namespace prism
