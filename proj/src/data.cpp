#include "prism/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "prism/rng.hpp"

namespace prism {

using nlohmann::json;

void SynthConfig::validate() const {
    if (n_users < 1 || n_items < 1 || n_queries < 1 || n_sessions < 1)
        throw std::invalid_argument("SynthConfig: all counts must be >= 1");
    if (items_per_session < 2)
        throw std::invalid_argument("SynthConfig: items_per_session must be >= 2");
    if (latent_dim < 1) throw std::invalid_argument("SynthConfig: latent_dim must be >= 1");
    if (!(confound_strength >= 0.0))
        throw std::invalid_argument("SynthConfig: confound_strength must be >= 0");
    if (!std::isfinite(relevance_weight) || !std::isfinite(preference_weight))
        throw std::invalid_argument("SynthConfig: non-finite weight");
}

namespace {

std::string padded_id(char prefix, int idx, int total) {
    int digits = 1;
    for (int t = total - 1; t >= 10; t /= 10) ++digits;
    std::string num = std::to_string(idx);
    std::string out(1, prefix);
    out.append(static_cast<size_t>(digits) - num.size(), '0');
    out += num;
    return out;
}

std::vector<std::vector<double>> draw_unit_vectors(Rng& rng, int count, int dim) {
    std::vector<std::vector<double>> out(count, std::vector<double>(dim));
    for (auto& v : out) {
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (double& x : v) {
                x = rng.normal();
                norm2 += x * x;
            }
        } while (norm2 < 1e-12);
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return out;
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg, std::vector<double>* popularity_out) {
    cfg.validate();
    Rng rng(cfg.seed);

    const double scale = std::sqrt(static_cast<double>(cfg.latent_dim));
    auto user_lat = draw_unit_vectors(rng, cfg.n_users, cfg.latent_dim);
    auto query_lat = draw_unit_vectors(rng, cfg.n_queries, cfg.latent_dim);
    auto item_lat = draw_unit_vectors(rng, cfg.n_items, cfg.latent_dim);

    std::vector<double> popularity(cfg.n_items);
    for (double& p : popularity) p = rng.normal();
    if (popularity_out) *popularity_out = popularity;

    // exposure weights: cumulative sums of exp(c * popularity)
    std::vector<double> cum(cfg.n_items);
    double acc = 0.0;
    for (int i = 0; i < cfg.n_items; ++i) {
        acc += std::exp(cfg.confound_strength * popularity[i]);
        cum[i] = acc;
    }

    auto draw_item = [&]() {
        const double r = rng.uniform01() * acc;
        return static_cast<int>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
    };

    Dataset ds;
    ds.impressions.reserve(static_cast<size_t>(cfg.n_sessions) * cfg.items_per_session);
    int64_t clock = 0;

    for (int s = 0; s < cfg.n_sessions; ++s) {
        const int user = static_cast<int>(rng.below(cfg.n_users));
        const int query = static_cast<int>(rng.below(cfg.n_queries));
        const std::string session = padded_id('s', s, cfg.n_sessions);

        std::vector<int> chosen;
        chosen.reserve(cfg.items_per_session);
        const int want = std::min(cfg.items_per_session, cfg.n_items);
        while (static_cast<int>(chosen.size()) < want) {
            const int item = std::min(draw_item(), cfg.n_items - 1);
            if (std::find(chosen.begin(), chosen.end(), item) != chosen.end()) continue;
            chosen.push_back(item);
        }

        for (int item : chosen) {
            const double rel = vdot(query_lat[query], item_lat[item]) * scale;
            const double pref = vdot(user_lat[user], item_lat[item]) * scale;
            const double logit = cfg.relevance_weight * rel + cfg.preference_weight * pref +
                                 cfg.confound_strength * popularity[item];
            LoggedImpression imp;
            imp.session_id = session;
            imp.timestamp = clock++;
            imp.user_id = padded_id('u', user, cfg.n_users);
            imp.query_id = padded_id('q', query, cfg.n_queries);
            imp.item_id = padded_id('i', item, cfg.n_items);
            imp.label = rng.uniform01() < sigmoid(logit) ? 1 : 0;
            imp.has_relevance = rng.uniform01() < 0.5;
            imp.relevance_label = imp.has_relevance ? (rel > 0.0 ? 1 : -1) : 0;
            ds.users.add_or_get(imp.user_id);
            ds.queries.add_or_get(imp.query_id);
            ds.items.add_or_get(imp.item_id);
            ds.impressions.push_back(std::move(imp));
        }
    }
    return ds;
}

Dataset load_impressions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_impressions: cannot open " + path);

    Dataset ds;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("load_impressions: line " + std::to_string(line_no) +
                                     ": malformed JSON: " + e.what());
        }
        auto reject = [&](const std::string& why) {
            throw std::runtime_error("load_impressions: line " + std::to_string(line_no) + ": " + why);
        };
        if (!j.is_object()) reject("expected a JSON object");

        auto need_string = [&](const char* key) -> std::string {
            if (!j.contains(key)) reject(std::string("missing required field '") + key + "'");
            if (!j[key].is_string()) reject(std::string("field '") + key + "' must be a string");
            return j[key].get<std::string>();
        };

        LoggedImpression imp;
        imp.session_id = need_string("session_id");
        imp.user_id = need_string("user_id");
        imp.query_id = need_string("query_id");
        imp.item_id = need_string("item_id");

        if (!j.contains("timestamp")) reject("missing required field 'timestamp'");
        if (!j["timestamp"].is_number_integer()) reject("field 'timestamp' must be an integer");
        imp.timestamp = j["timestamp"].get<int64_t>();

        if (!j.contains("label")) reject("missing required field 'label'");
        if (!j["label"].is_number_integer()) reject("field 'label' must be an integer");
        const int64_t label = j["label"].get<int64_t>();
        if (label != 0 && label != 1) reject("field 'label' must be 0 or 1");
        imp.label = static_cast<int>(label);

        if (j.contains("relevance_label") && !j["relevance_label"].is_null()) {
            if (!j["relevance_label"].is_number_integer())
                reject("field 'relevance_label' must be an integer");
            const int64_t t = j["relevance_label"].get<int64_t>();
            if (t != 1 && t != -1) reject("field 'relevance_label' must be +1 or -1");
            imp.relevance_label = static_cast<int>(t);
            imp.has_relevance = true;
        }

        ds.users.add_or_get(imp.user_id);
        ds.queries.add_or_get(imp.query_id);
        ds.items.add_or_get(imp.item_id);
        ds.impressions.push_back(std::move(imp));
    }
    return ds;
}

void write_impressions(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_impressions: cannot open " + path);
    for (const auto& imp : ds.impressions) {
        json j;
        j["session_id"] = imp.session_id;
        j["timestamp"] = imp.timestamp;
        j["user_id"] = imp.user_id;
        j["query_id"] = imp.query_id;
        j["item_id"] = imp.item_id;
        j["label"] = imp.label;
        if (imp.has_relevance) j["relevance_label"] = imp.relevance_label;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write_impressions: write failed for " + path);
}

std::array<Dataset, 3> temporal_split(const Dataset& ds, const std::array<double, 3>& fractions) {
    const double total = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("temporal_split: fractions must sum to 1");
    for (double f : fractions)
        if (f < 0.0) throw std::invalid_argument("temporal_split: negative fraction");

    // session -> start time
    std::map<std::string, int64_t> start;
    for (const auto& imp : ds.impressions) {
        auto it = start.find(imp.session_id);
        if (it == start.end())
            start.emplace(imp.session_id, imp.timestamp);
        else
            it->second = std::min(it->second, imp.timestamp);
    }
    const int n_sessions = static_cast<int>(start.size());
    if (n_sessions < 3) throw std::invalid_argument("temporal_split: need at least 3 sessions");

    std::vector<std::pair<int64_t, std::string>> order;
    order.reserve(start.size());
    for (const auto& [sid, t] : start) order.emplace_back(t, sid);
    std::sort(order.begin(), order.end());

    const int n_valid = std::max(1, static_cast<int>(std::floor(n_sessions * fractions[1])));
    const int n_test = std::max(1, static_cast<int>(std::floor(n_sessions * fractions[2])));
    const int n_train = n_sessions - n_valid - n_test;
    if (n_train < 1) throw std::invalid_argument("temporal_split: train split would be empty");

    std::unordered_map<std::string, int> bucket;
    for (int i = 0; i < n_sessions; ++i)
        bucket[order[i].second] = i < n_train ? 0 : i < n_train + n_valid ? 1 : 2;

    std::array<Dataset, 3> out;
    for (auto& part : out) {
        part.users = ds.users;
        part.queries = ds.queries;
        part.items = ds.items;
    }
    for (const auto& imp : ds.impressions) out[bucket[imp.session_id]].impressions.push_back(imp);
    return out;
}

double interp_quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("interp_quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    if (xs.size() == 1) return xs[0];
    const double h = p * static_cast<double>(xs.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

SubsetTags tag_frequency_subsets(const Dataset& train, const Dataset& eval, double hot_quantile) {
    if (!(hot_quantile > 0.0) || !(hot_quantile < 1.0))
        throw std::invalid_argument("tag_frequency_subsets: hot_quantile must be in (0,1)");
    if (train.impressions.empty())
        throw std::invalid_argument("tag_frequency_subsets: empty train set");

    std::unordered_map<std::string, double> item_freq, query_freq;
    for (const auto& imp : train.impressions) {
        item_freq[imp.item_id] += 1.0;
        query_freq[imp.query_id] += 1.0;
    }
    auto threshold = [&](const std::unordered_map<std::string, double>& freq) {
        std::vector<double> xs;
        xs.reserve(freq.size());
        for (const auto& [id, f] : freq) xs.push_back(f);
        return interp_quantile(std::move(xs), 1.0 - hot_quantile);
    };
    const double item_thr = threshold(item_freq);
    const double query_thr = threshold(query_freq);

    SubsetTags tags;
    tags.item_hot.reserve(eval.impressions.size());
    tags.query_hot.reserve(eval.impressions.size());
    for (const auto& imp : eval.impressions) {
        auto fi = item_freq.find(imp.item_id);
        auto fq = query_freq.find(imp.query_id);
        tags.item_hot.push_back(fi != item_freq.end() && fi->second >= item_thr ? 1 : 0);
        tags.query_hot.push_back(fq != query_freq.end() && fq->second >= query_thr ? 1 : 0);
    }
    return tags;
}

}  // namespace prism
