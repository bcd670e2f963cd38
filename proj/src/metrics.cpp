#include "prism/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace prism {

std::optional<double> auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw std::invalid_argument("auc: size mismatch");
    size_t pos = 0, neg = 0;
    for (int y : labels) (y == 1 ? pos : neg) += 1;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        // ranks i+1 .. j averaged over the tie group
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double logloss(std::span<const int> labels, std::span<const double> scores) {
    if (labels.empty()) throw std::invalid_argument("logloss: empty input rejected");
    if (labels.size() != scores.size()) throw std::invalid_argument("logloss: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(scores[i], 1e-7, 1.0 - 1e-7);
        s -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return s / static_cast<double>(labels.size());
}

namespace {

void sort_session(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
}

}  // namespace

std::optional<double> ndcg_at_k(std::span<const ScoredSession> sessions, int k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    double total = 0.0;
    size_t qualifying = 0;
    for (const auto& sess : sessions) {
        size_t positives = 0;
        for (const auto& e : sess.entries) positives += e.label == 1;
        if (positives == 0) continue;
        ++qualifying;

        std::vector<RankedEntry> sorted(sess.entries);
        sort_session(sorted);
        double dcg = 0.0;
        const size_t limit = std::min<size_t>(k, sorted.size());
        for (size_t rank = 1; rank <= limit; ++rank)
            if (sorted[rank - 1].label == 1) dcg += 1.0 / std::log2(static_cast<double>(rank + 1));
        double idcg = 0.0;
        const size_t ideal = std::min<size_t>(k, positives);
        for (size_t rank = 1; rank <= ideal; ++rank)
            idcg += 1.0 / std::log2(static_cast<double>(rank + 1));
        total += dcg / idcg;
    }
    if (qualifying == 0) return std::nullopt;
    return total / static_cast<double>(qualifying);
}

std::optional<double> hr_at_k(std::span<const ScoredSession> sessions, int k) {
    if (k < 1) throw std::invalid_argument("hr_at_k: k must be >= 1");
    double hits = 0.0;
    size_t qualifying = 0;
    for (const auto& sess : sessions) {
        bool has_pos = false;
        for (const auto& e : sess.entries) has_pos |= e.label == 1;
        if (!has_pos) continue;
        ++qualifying;

        std::vector<RankedEntry> sorted(sess.entries);
        sort_session(sorted);
        const size_t limit = std::min<size_t>(k, sorted.size());
        for (size_t i = 0; i < limit; ++i) {
            if (sorted[i].label == 1) {
                hits += 1.0;
                break;
            }
        }
    }
    if (qualifying == 0) return std::nullopt;
    return hits / static_cast<double>(qualifying);
}

std::vector<ScoredSession> group_sessions(std::span<const ScoredImpression> imps) {
    std::map<std::string, std::vector<RankedEntry>> groups;
    for (const auto& imp : imps)
        groups[imp.session_id].push_back({imp.item_id, imp.label, imp.score});
    std::vector<ScoredSession> out;
    out.reserve(groups.size());
    for (auto& [sid, entries] : groups) out.push_back({sid, std::move(entries)});
    return out;
}

const SubsetMetrics& MetricReport::at(const std::string& name) const {
    for (const auto& [n, m] : subsets)
        if (n == name) return m;
    throw std::invalid_argument("MetricReport: no subset '" + name + "'");
}

namespace {

SubsetMetrics compute_subset(std::span<const ScoredImpression> imps, int k) {
    SubsetMetrics m;
    m.n_impressions = imps.size();
    if (imps.empty()) return m;

    std::vector<int> labels(imps.size());
    std::vector<double> scores(imps.size());
    for (size_t i = 0; i < imps.size(); ++i) {
        labels[i] = imps[i].label;
        scores[i] = imps[i].score;
    }
    m.auc = auc(labels, scores);
    m.logloss = logloss(labels, scores);

    auto sessions = group_sessions(imps);
    for (const auto& s : sessions)
        for (const auto& e : s.entries)
            if (e.label == 1) {
                ++m.n_sessions_with_pos;
                break;
            }
    m.ndcg = ndcg_at_k(sessions, k);
    m.hr = hr_at_k(sessions, k);
    return m;
}

}  // namespace

MetricReport evaluate(std::span<const ScoredImpression> imps, int k) {
    MetricReport report;
    std::vector<ScoredImpression> slice;
    auto add = [&](const std::string& name, auto pred) {
        slice.clear();
        for (const auto& imp : imps)
            if (pred(imp)) slice.push_back(imp);
        report.subsets.emplace_back(name, compute_subset(slice, k));
    };
    add("overall", [](const ScoredImpression&) { return true; });
    add("ihot", [](const ScoredImpression& i) { return i.item_hot; });
    add("itail", [](const ScoredImpression& i) { return !i.item_hot; });
    add("qhot", [](const ScoredImpression& i) { return i.query_hot; });
    add("qtail", [](const ScoredImpression& i) { return !i.query_hot; });
    return report;
}

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
    out << "subset,metric,value,n\n";
    char buf[64];
    auto fmt = [&](const std::optional<double>& v) -> std::string {
        if (!v) return "";
        std::snprintf(buf, sizeof(buf), "%.12g", *v);
        return buf;
    };
    for (const auto& [name, m] : report.subsets) {
        out << name << ",auc," << fmt(m.auc) << "," << m.n_impressions << "\n";
        out << name << ",logloss," << fmt(m.logloss) << "," << m.n_impressions << "\n";
        out << name << ",ndcg@10," << fmt(m.ndcg) << "," << m.n_sessions_with_pos << "\n";
        out << name << ",hr@10," << fmt(m.hr) << "," << m.n_sessions_with_pos << "\n";
    }
    if (!out) throw std::runtime_error("write_report_csv: write failed for " + path);
}

}  // namespace prism
