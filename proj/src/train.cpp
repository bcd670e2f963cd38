#include "prism/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "prism/metrics.hpp"
#include "prism/rng.hpp"

namespace prism {

using nlohmann::json;

void TrainConfig::validate() const {
    model.validate();
    weights.validate();
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
}

void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps, double weight_decay) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

    for (auto& [name, p] : params.all()) {
        const Array* g = grads.find(name);
        if (g && !g->same_shape(p))
            throw std::invalid_argument("adam_step: gradient shape mismatch for '" + name + "' " +
                                        g->shape_str() + " vs " + p.shape_str());
        auto mit = state.m.find(name);
        if (mit == state.m.end()) mit = state.m.emplace(name, Array(p.rows, p.cols)).first;
        auto vit = state.v.find(name);
        if (vit == state.v.end()) vit = state.v.emplace(name, Array(p.rows, p.cols)).first;
        Array& m = mit->second;
        Array& v = vit->second;
        if (!m.same_shape(p) || !v.same_shape(p))
            throw std::invalid_argument("adam_step: moment shape mismatch for '" + name + "'");

        for (size_t i = 0; i < p.v.size(); ++i) {
            if (weight_decay != 0.0) p.v[i] -= lr * weight_decay * p.v[i];
            const double gi = g ? g->v[i] : 0.0;
            m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * gi;
            v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * gi * gi;
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Checkpoint checkpoint_from_model(const PrismModel& model, double best_val_auc, int epoch) {
    Checkpoint c;
    c.cfg = model.cfg;
    c.n_users = model.n_users;
    c.n_queries = model.n_queries;
    c.n_items = model.n_items;
    c.params = model.store.all();
    c.best_val_auc = best_val_auc;
    c.epoch = epoch;
    return c;
}

namespace {

json config_to_json(const PrismConfig& cfg) {
    json j;
    j["embed_dim"] = cfg.embed_dim;
    j["proto_dim"] = cfg.proto_dim;
    j["pm"] = to_string(cfg.pm_kind);
    j["rm"] = to_string(cfg.rm_kind);
    j["fusion"] = to_string(cfg.fusion);
    j["use_rectify"] = cfg.use_rectify;
    j["use_anchor"] = cfg.use_anchor;
    j["use_route"] = cfg.use_route;
    j["rectify_iters"] = cfg.rectify_iters;
    j["tau"] = cfg.tau;
    j["t_proto"] = cfg.T_proto;
    j["gamma"] = cfg.gamma;
    j["leaky_slope"] = cfg.leaky_slope;
    j["corr_hidden"] = cfg.corr_hidden;
    j["fusion_hidden"] = cfg.fusion_hidden;
    return j;
}

PrismConfig config_from_json(const json& j) {
    PrismConfig cfg;
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.proto_dim = j.at("proto_dim").get<int>();
    cfg.pm_kind = preference_kind_from(j.at("pm").get<std::string>());
    cfg.rm_kind = relevance_kind_from(j.at("rm").get<std::string>());
    cfg.fusion = fusion_kind_from(j.at("fusion").get<std::string>());
    cfg.use_rectify = j.at("use_rectify").get<bool>();
    cfg.use_anchor = j.at("use_anchor").get<bool>();
    cfg.use_route = j.at("use_route").get<bool>();
    cfg.rectify_iters = j.at("rectify_iters").get<int>();
    cfg.tau = j.at("tau").get<double>();
    cfg.T_proto = j.at("t_proto").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.corr_hidden = j.at("corr_hidden").get<std::array<int, 2>>();
    cfg.fusion_hidden = j.at("fusion_hidden").get<int>();
    return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["format"] = "prism-checkpoint-v1";
    j["config"] = config_to_json(ckpt.cfg);
    j["vocab"] = {{"users", ckpt.n_users}, {"queries", ckpt.n_queries}, {"items", ckpt.n_items}};
    j["best_val_auc"] = ckpt.best_val_auc;
    j["epoch"] = ckpt.epoch;
    json params = json::object();
    for (const auto& [name, arr] : ckpt.params) {
        params[name] = {{"shape", {arr.rows, arr.cols}}, {"data", arr.v}};
    }
    j["params"] = std::move(params);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump() << "\n";
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("load_checkpoint: malformed JSON in " + path + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "prism-checkpoint-v1")
        throw std::runtime_error("load_checkpoint: not a prism checkpoint: " + path);

    Checkpoint c;
    c.cfg = config_from_json(j.at("config"));
    c.n_users = j.at("vocab").at("users").get<int>();
    c.n_queries = j.at("vocab").at("queries").get<int>();
    c.n_items = j.at("vocab").at("items").get<int>();
    c.best_val_auc = j.at("best_val_auc").get<double>();
    c.epoch = j.at("epoch").get<int>();
    for (const auto& [name, spec] : j.at("params").items()) {
        const auto shape = spec.at("shape").get<std::array<int, 2>>();
        auto data = spec.at("data").get<std::vector<double>>();
        c.params.emplace(name, Array(shape[0], shape[1], std::move(data)));
    }
    return c;
}

PrismModel model_from_checkpoint(const Checkpoint& ckpt) {
    PrismModel model = PrismModel::init(ckpt.cfg, ckpt.n_users, ckpt.n_queries, ckpt.n_items, 0);
    for (auto& [name, arr] : model.store.all()) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end())
            throw std::runtime_error("checkpoint mismatch: missing parameter '" + name + "'");
        if (!it->second.same_shape(arr))
            throw std::runtime_error("checkpoint mismatch: parameter '" + name + "' has shape " +
                                     it->second.shape_str() + ", expected " + arr.shape_str());
        arr = it->second;
    }
    for (const auto& [name, arr] : ckpt.params)
        if (!model.store.has(name))
            throw std::runtime_error("checkpoint mismatch: unexpected parameter '" + name + "'");
    return model;
}

namespace {

struct ValScorer {
    std::vector<EncodedImpression> encoded;
    std::vector<int> labels;

    explicit ValScorer(const Dataset& ds) : encoded(encode(ds)) {
        labels.reserve(ds.impressions.size());
        for (const auto& imp : ds.impressions) labels.push_back(imp.label);
    }
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& valid_ds,
                  const PrototypePair& protos) {
    cfg.validate();
    if (train_ds.impressions.empty() || valid_ds.impressions.empty())
        throw std::invalid_argument("train: empty split rejected");
    if (cfg.model.use_anchor && protos.dim != cfg.model.proto_dim)
        throw std::invalid_argument("train: prototype dim " + std::to_string(protos.dim) +
                                    " does not match proto_dim " +
                                    std::to_string(cfg.model.proto_dim));

    PrismModel model = PrismModel::init(cfg.model, train_ds.users.size(), train_ds.queries.size(),
                                        train_ds.items.size(), cfg.seed);
    const auto train_enc = encode(train_ds);
    ValScorer val(valid_ds);

    AdamState adam;
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    TrainResult result;
    double best_auc = -1.0;
    int bad_epochs = 0;

    std::vector<size_t> order(train_enc.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EncodedImpression> batch;
    Tape tape;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double sum_bce = 0, sum_mag = 0, sum_dir = 0, sum_pr = 0, sum_att = 0, sum_aux = 0;
        size_t seen = 0;
        for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const size_t end = std::min(off + cfg.batch_size, order.size());
            batch.clear();
            for (size_t i = off; i < end; ++i) batch.push_back(train_enc[order[i]]);

            tape.reset();
            ModelRefs refs = make_refs(tape, model);
            BatchLoss loss;
            try {
                loss = build_batch_loss(tape, model, refs, batch, &protos, cfg.weights);
            } catch (const std::exception& e) {
                throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                                         " batch " + std::to_string(off / cfg.batch_size) + ": " +
                                         e.what());
            }
            GradientMap grads = tape.backward(loss.total);
            adam_step(model.store, grads, adam, cfg.learning_rate, 0.9, 0.999, 1e-8,
                      cfg.weight_decay);

            const double w = static_cast<double>(batch.size());
            sum_bce += loss.bce * w;
            sum_mag += loss.mag * w;
            sum_dir += loss.dir * w;
            sum_pr += loss.pr * w;
            sum_att += loss.att * w;
            sum_aux += loss.rel_aux * w;
            seen += batch.size();
        }

        const auto val_scores = score_dataset(model, val.encoded);
        const auto val_auc = auc(val.labels, val_scores);
        EpochStats stats;
        stats.epoch = epoch;
        const double n = static_cast<double>(seen);
        stats.l_bce = sum_bce / n;
        stats.l_mag = sum_mag / n;
        stats.l_dir = sum_dir / n;
        stats.l_pr = sum_pr / n;
        stats.l_att = sum_att / n;
        stats.l_rel_aux = sum_aux / n;
        stats.val_auc = val_auc.value_or(0.5);
        stats.val_logloss = logloss(val.labels, val_scores);
        result.history.push_back(stats);

        if (stats.val_auc > best_auc) {
            best_auc = stats.val_auc;
            bad_epochs = 0;
            result.best = checkpoint_from_model(model, best_auc, epoch);
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) break;
        }
    }
    return result;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << "epoch,l_bce,l_mag,l_dir,l_pr,l_att,l_rel_aux,val_auc,val_logloss\n";
    char buf[256];
    for (const auto& s : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      s.epoch, s.l_bce, s.l_mag, s.l_dir, s.l_pr, s.l_att, s.l_rel_aux, s.val_auc,
                      s.val_logloss);
        out << buf;
    }
    if (!out) throw std::runtime_error("write_history_csv: write failed for " + path);
}

}  // namespace prism
