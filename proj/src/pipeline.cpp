#include "prism/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace prism {

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

MetricReport evaluate_split(const PrismModel& model, const Dataset& train_ds,
                            const Dataset& eval_ds, double hot_quantile, int top_k) {
    const SubsetTags tags = tag_frequency_subsets(train_ds, eval_ds, hot_quantile);
    const auto encoded = encode(eval_ds);
    const auto scores = score_dataset(model, encoded);

    std::vector<ScoredImpression> scored;
    scored.reserve(eval_ds.impressions.size());
    for (size_t i = 0; i < eval_ds.impressions.size(); ++i) {
        const auto& imp = eval_ds.impressions[i];
        scored.push_back({imp.session_id, imp.item_id, imp.label, scores[i],
                          tags.item_hot[i] != 0, tags.query_hot[i] != 0});
    }
    return evaluate(scored, top_k);
}

RunArtifacts run_job(const RunSettings& settings, const std::string& out_dir) {
    Dataset full = load_impressions(settings.data_path);
    auto splits = temporal_split(full);

    PrototypePair protos;
    if (settings.train.model.use_anchor) {
        if (settings.protos_path.empty())
            throw std::runtime_error("run_job: anchor module enabled but no prototype file given");
        protos = load_prototypes(settings.protos_path);
    }

    RunArtifacts art;
    TrainResult tr = train(settings.train, splits[0], splits[1], protos);
    art.checkpoint = std::move(tr.best);
    art.history = std::move(tr.history);

    PrismModel model = model_from_checkpoint(art.checkpoint);
    art.test_report = evaluate_split(model, splits[0], splits[2], settings.hot_quantile,
                                     settings.top_k);

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        save_checkpoint(art.checkpoint, out_dir + "/checkpoint.json");
        write_history_csv(art.history, out_dir + "/history.csv");
        write_report_csv(art.test_report, out_dir + "/report.csv");
    }
    return art;
}

void write_inspect_csv(const PrismModel& model, const Dataset& ds, const std::string& path,
                       bool dump_repr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_inspect_csv: cannot open " + path);

    out << "session_id,item_id,s_pref,s_rel,s_rel_refined,y_hat";
    for (int i = 1; i <= 6; ++i) out << ",alpha_" << i;
    out << ",entropy,delta_p_norm,alpha_rp,alpha_pp";
    if (dump_repr)
        for (int i = 0; i < model.cfg.embed_dim; ++i) out << ",r_" << i;
    out << "\n";

    const auto encoded = encode(ds);
    char buf[64];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.12g", x);
        return std::string(buf);
    };

    Tape tape;
    constexpr size_t kChunk = 256;
    for (size_t off = 0; off < encoded.size(); off += kChunk) {
        tape.reset();
        ModelRefs refs = make_refs(tape, model);
        const size_t end = std::min(off + kChunk, encoded.size());
        for (size_t i = off; i < end; ++i) {
            ForwardHandles h = forward_impression(tape, model, refs, encoded[i]);
            const auto& imp = ds.impressions[i];
            out << imp.session_id << "," << imp.item_id;
            out << "," << fmt(tape.scalar_value(h.s_pref));
            out << "," << fmt(tape.scalar_value(h.s_rel));
            out << "," << fmt(tape.scalar_value(h.s_rel_refined));
            out << "," << fmt(tape.scalar_value(h.y_hat));
            if (model.cfg.use_route) {
                for (int a = 0; a < 6; ++a) out << "," << fmt(tape.scalar_value(h.alpha[a]));
                out << "," << fmt(h.entropy);
            } else {
                out << ",,,,,,,";
            }
            out << "," << (h.delta_p.valid() ? fmt(tape.value(h.delta_p).l2_norm()) : "");
            out << "," << (h.alpha_rp.valid() ? fmt(tape.scalar_value(h.alpha_rp)) : "");
            out << "," << (h.alpha_pp.valid() ? fmt(tape.scalar_value(h.alpha_pp)) : "");
            if (dump_repr)
                for (double x : tape.value(h.r).v) out << "," << fmt(x);
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("write_inspect_csv: write failed for " + path);
}

}  // namespace prism
