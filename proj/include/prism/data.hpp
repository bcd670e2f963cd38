#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace prism {

// One logged exposure event. relevance_label is only meaningful when
// has_relevance is set; it is never inferred from clicks.
struct LoggedImpression {
    std::string session_id;
    int64_t timestamp = 0;
    std::string user_id;
    std::string query_id;
    std::string item_id;
    int label = 0;               // y in {0,1}
    int relevance_label = 0;     // t in {+1,-1} when has_relevance
    bool has_relevance = false;  // m
};

class Vocab {
public:
    int add_or_get(const std::string& id) {
        auto it = index_.find(id);
        if (it != index_.end()) return it->second;
        const int idx = static_cast<int>(names_.size());
        index_.emplace(id, idx);
        names_.push_back(id);
        return idx;
    }
    int lookup(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? -1 : it->second;
    }
    const std::string& name(int idx) const { return names_[idx]; }
    int size() const { return static_cast<int>(names_.size()); }

private:
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> names_;
};

struct Dataset {
    std::vector<LoggedImpression> impressions;
    Vocab users, queries, items;  // first-seen order; shared across splits

    size_t size() const { return impressions.size(); }
};

struct SynthConfig {
    int n_users = 300;
    int n_items = 600;
    int n_queries = 300;
    int n_sessions = 1000;
    int items_per_session = 5;
    int latent_dim = 16;
    double confound_strength = 0.0;  // c >= 0
    double relevance_weight = 3.0;   // a
    double preference_weight = 3.0;  // b
    uint64_t seed = 0;

    void validate() const;
};

// Synthetic confounded search log. Exposure within a session is biased toward
// popular items (weight exp(c * popularity)); labels mix relevance, preference
// and the same popularity signal. Deterministic given the config.
// popularity_out, when given, receives the per-item confound logit.
Dataset generate_synthetic(const SynthConfig& cfg, std::vector<double>* popularity_out = nullptr);

// JSONL: one impression object per line. relevance_label omitted or null
// means has_relevance = 0. Unknown fields are ignored.
Dataset load_impressions(const std::string& path);
void write_impressions(const Dataset& ds, const std::string& path);

// Session-level temporal split by ascending session start time (ties by
// session_id). Fractions apply to session counts; valid/test each receive at
// least one session.
std::array<Dataset, 3> temporal_split(const Dataset& ds,
                                      const std::array<double, 3>& fractions = {0.8, 0.1, 0.1});

// Per-eval-impression hot/tail tags. Hot means the id's train frequency is at
// or above the (1 - hot_quantile) interpolated quantile of train frequencies;
// ids unseen in train are tail.
struct SubsetTags {
    std::vector<uint8_t> item_hot;   // parallel to eval impressions
    std::vector<uint8_t> query_hot;
};

SubsetTags tag_frequency_subsets(const Dataset& train, const Dataset& eval, double hot_quantile);

// Interpolated quantile (numpy "linear") of an unsorted sample, p in [0,1].
double interp_quantile(std::vector<double> xs, double p);

}  // namespace prism
