#include "prism/model.hpp"

#include <cmath>
#include <stdexcept>

#include "prism/rng.hpp"

namespace prism {

void PrismConfig::validate() const {
    if (embed_dim < 1) throw std::invalid_argument("PrismConfig: embed_dim must be >= 1");
    if (proto_dim < 1) throw std::invalid_argument("PrismConfig: proto_dim must be >= 1");
    if (rectify_iters < 1) throw std::invalid_argument("PrismConfig: rectify_iters must be >= 1");
    if (!(tau > 0.0)) throw std::invalid_argument("PrismConfig: tau must be > 0");
    if (!(T_proto > 0.0)) throw std::invalid_argument("PrismConfig: T_proto must be > 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("PrismConfig: gamma must be >= 0");
    if (corr_hidden[0] < 1 || corr_hidden[1] < 1 || fusion_hidden < 1)
        throw std::invalid_argument("PrismConfig: hidden sizes must be >= 1");
}

std::vector<EncodedImpression> encode(const Dataset& ds) {
    std::vector<EncodedImpression> out;
    out.reserve(ds.impressions.size());
    for (const auto& imp : ds.impressions) {
        EncodedImpression e;
        e.user = ds.users.lookup(imp.user_id);
        e.query = ds.queries.lookup(imp.query_id);
        e.item = ds.items.lookup(imp.item_id);
        if (e.user < 0 || e.query < 0 || e.item < 0)
            throw std::runtime_error("encode: impression references an id missing from the vocabulary");
        e.label = imp.label;
        e.rel_label = imp.relevance_label;
        e.has_rel = imp.has_relevance ? 1 : 0;
        out.push_back(e);
    }
    return out;
}

namespace {

Array xavier(Rng& rng, int rows, int cols, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Array a(rows, cols);
    for (double& x : a.v) x = rng.uniform(-bound, bound);
    return a;
}

Array embedding_init(Rng& rng, int rows, int cols) {
    Array a(rows, cols);
    for (double& x : a.v) x = rng.uniform(-0.05, 0.05);
    return a;
}

}  // namespace

PrismModel PrismModel::init(const PrismConfig& cfg, int n_users, int n_queries, int n_items,
                            uint64_t seed) {
    cfg.validate();
    if (n_users < 1 || n_queries < 1 || n_items < 1)
        throw std::invalid_argument("PrismModel: vocabulary sizes must be >= 1");

    PrismModel m;
    m.cfg = cfg;
    m.n_users = n_users;
    m.n_queries = n_queries;
    m.n_items = n_items;

    Rng rng(seed);
    const int d = cfg.embed_dim;
    auto& ps = m.store;

    ps.add("embed.user", embedding_init(rng, d, n_users));
    ps.add("embed.query", embedding_init(rng, d, n_queries));
    ps.add("embed.item", embedding_init(rng, d, n_items));

    if (cfg.pm_kind == PreferenceKind::mlp) {
        ps.add("pm.mlp.W1", xavier(rng, d, 3 * d, 3 * d, d));
        ps.add("pm.mlp.b1", Array(d, 1));
        ps.add("pm.mlp.W2", xavier(rng, d, d, d, d));
        ps.add("pm.mlp.b2", Array(d, 1));
    } else {
        ps.add("pm.cross.w1", xavier(rng, 3 * d, 1, 3 * d, 1));
        ps.add("pm.cross.b1", Array(3 * d, 1));
        ps.add("pm.cross.w2", xavier(rng, 3 * d, 1, 3 * d, 1));
        ps.add("pm.cross.b2", Array(3 * d, 1));
        ps.add("pm.cross.W_out", xavier(rng, d, 3 * d, 3 * d, d));
        ps.add("pm.cross.b_out", Array(d, 1));
    }

    const int q_in = cfg.rm_kind == RelevanceKind::personalized ? 2 * d : d;
    ps.add("rm.W_query", xavier(rng, d, q_in, q_in, d));
    ps.add("rm.b_query", Array(d, 1));
    ps.add("rm.W_item", xavier(rng, d, d, d, d));
    ps.add("rm.b_item", Array(d, 1));
    ps.add("rm.W_int", xavier(rng, d, d, d, d));
    ps.add("rm.b_int", Array(d, 1));

    ps.add("head.w_pref", xavier(rng, d, 1, d, 1));
    ps.add("head.b_pref", Array(1, 1));
    ps.add("head.w_rel", xavier(rng, d, 1, d, 1));
    ps.add("head.b_rel", Array(1, 1));

    if (cfg.use_rectify) {
        ps.add("rectify.W_s", xavier(rng, d, d, d, d));
        ps.add("rectify.W_vp", xavier(rng, d, d, d, d));
        ps.add("rectify.W_vr", xavier(rng, d, d, d, d));
        ps.add("rectify.a", xavier(rng, 2 * d, 1, 2 * d, 1));
        ps.add("rectify.W_o", xavier(rng, d, d, d, d));
    }

    if (cfg.use_anchor) {
        ps.add("anchor.W_proj", xavier(rng, cfg.proto_dim, d, d, cfg.proto_dim));
        ps.add("anchor.b_proj", Array(cfg.proto_dim, 1));
    }

    if (cfg.use_route) {
        ps.add("route.ev.W_q", xavier(rng, d, d, d, d));
        ps.add("route.ev.W_t", xavier(rng, d, d, d, d));
        ps.add("route.ev.W_u", xavier(rng, d, d, d, d));
        ps.add("route.ev.W_qt", xavier(rng, d, 2 * d, 2 * d, d));
        ps.add("route.ev.b_qt", Array(d, 1));
        ps.add("route.ev.W_qu", xavier(rng, d, 2 * d, 2 * d, d));
        ps.add("route.ev.b_qu", Array(d, 1));
        ps.add("route.ev.W_ut", xavier(rng, d, 2 * d, 2 * d, d));
        ps.add("route.ev.b_ut", Array(d, 1));
        ps.add("route.W_query", xavier(rng, d, d, d, d));
        ps.add("route.W_key", xavier(rng, d, d, d, d));
        ps.add("route.w_score", Array(d, 1));  // zero init keeps routing uniform at start

        const int h1 = cfg.corr_hidden[0], h2 = cfg.corr_hidden[1];
        ps.add("corr.W1", xavier(rng, h1, 4 * d, 4 * d, h1));
        ps.add("corr.b1", Array(h1, 1));
        ps.add("corr.W2", xavier(rng, h2, h1, h1, h2));
        ps.add("corr.b2", Array(h2, 1));
        ps.add("corr.W3", Array(1, h2));  // zero init: delta_rel == 0 before the first update
        ps.add("corr.b3", Array(1, 1));
    }

    if (cfg.fusion == FusionKind::learned) {
        const int h = cfg.fusion_hidden;
        ps.add("fusion.W1", xavier(rng, h, 3, 3, h));
        ps.add("fusion.b1", Array(h, 1));
        ps.add("fusion.w2", xavier(rng, 1, h, h, 1));
        ps.add("fusion.b2", Array(1, 1));
    }
    return m;
}

ModelRefs make_refs(Tape& t, const PrismModel& model) {
    const auto& cfg = model.cfg;
    const auto& ps = model.store;
    ModelRefs r;
    r.embed_user = t.param(ps, "embed.user");
    r.embed_query = t.param(ps, "embed.query");
    r.embed_item = t.param(ps, "embed.item");

    r.pm.kind = cfg.pm_kind;
    if (cfg.pm_kind == PreferenceKind::mlp) {
        r.pm.mlp = {t.param(ps, "pm.mlp.W1"), t.param(ps, "pm.mlp.b1"), t.param(ps, "pm.mlp.W2"),
                    t.param(ps, "pm.mlp.b2")};
    } else {
        r.pm.cross = {t.param(ps, "pm.cross.w1"),    t.param(ps, "pm.cross.b1"),
                      t.param(ps, "pm.cross.w2"),    t.param(ps, "pm.cross.b2"),
                      t.param(ps, "pm.cross.W_out"), t.param(ps, "pm.cross.b_out")};
    }

    r.rm.kind = cfg.rm_kind;
    r.rm.W_query = t.param(ps, "rm.W_query");
    r.rm.b_query = t.param(ps, "rm.b_query");
    r.rm.W_item = t.param(ps, "rm.W_item");
    r.rm.b_item = t.param(ps, "rm.b_item");
    r.rm.W_int = t.param(ps, "rm.W_int");
    r.rm.b_int = t.param(ps, "rm.b_int");

    r.w_pref = t.param(ps, "head.w_pref");
    r.b_pref = t.param(ps, "head.b_pref");
    r.w_rel = t.param(ps, "head.w_rel");
    r.b_rel = t.param(ps, "head.b_rel");

    if (cfg.use_rectify) {
        r.rectify = {t.param(ps, "rectify.W_s"), t.param(ps, "rectify.W_vp"),
                     t.param(ps, "rectify.W_vr"), t.param(ps, "rectify.a"),
                     t.param(ps, "rectify.W_o"), r.w_pref, r.b_pref};
    }
    if (cfg.use_anchor) {
        r.anchor = {t.param(ps, "anchor.W_proj"), t.param(ps, "anchor.b_proj")};
    }
    if (cfg.use_route) {
        r.evidence = {t.param(ps, "route.ev.W_q"),  t.param(ps, "route.ev.W_t"),
                      t.param(ps, "route.ev.W_u"),  t.param(ps, "route.ev.W_qt"),
                      t.param(ps, "route.ev.b_qt"), t.param(ps, "route.ev.W_qu"),
                      t.param(ps, "route.ev.b_qu"), t.param(ps, "route.ev.W_ut"),
                      t.param(ps, "route.ev.b_ut")};
        r.route = {t.param(ps, "route.W_query"), t.param(ps, "route.W_key"),
                   t.param(ps, "route.w_score")};
        r.corr = {t.param(ps, "corr.W1"), t.param(ps, "corr.b1"), t.param(ps, "corr.W2"),
                  t.param(ps, "corr.b2"), t.param(ps, "corr.W3"), t.param(ps, "corr.b3")};
    }
    if (cfg.fusion == FusionKind::learned) {
        r.fusion = {t.param(ps, "fusion.W1"), t.param(ps, "fusion.b1"), t.param(ps, "fusion.w2"),
                    t.param(ps, "fusion.b2")};
    }
    return r;
}

ForwardHandles forward_impression(Tape& t, const PrismModel& model, const ModelRefs& refs,
                                  const EncodedImpression& imp) {
    const auto& cfg = model.cfg;
    ForwardHandles h;

    Val u = embed_lookup(t, refs.embed_user, imp.user);
    Val q = embed_lookup(t, refs.embed_query, imp.query);
    Val v = embed_lookup(t, refs.embed_item, imp.item);

    h.p = preference_forward(t, u, q, v, refs.pm);
    std::optional<Val> user_side;
    if (cfg.rm_kind == RelevanceKind::personalized) user_side = u;
    h.r = relevance_forward(t, q, v, user_side, refs.rm);
    h.s_rel = score_linear(t, refs.w_rel, refs.b_rel, h.r);

    if (cfg.use_rectify) {
        Val p_cur = h.p;
        RectifyOut ro;
        for (int pass = 0; pass < cfg.rectify_iters; ++pass) {
            ro = rectify(t, p_cur, h.r, refs.rectify, cfg.leaky_slope);
            p_cur = ro.p_edit;
        }
        h.p_edit = p_cur;
        h.delta_p = cfg.rectify_iters == 1 ? ro.delta_p : t.sub(h.p_edit, h.p);
        h.alpha_rp = ro.alpha_rp;
        h.alpha_pp = ro.alpha_pp;
        h.v_r = ro.v_r;
        h.s_pref = ro.s_pref;
    } else {
        h.p_edit = h.p;
        h.s_pref = score_linear(t, refs.w_pref, refs.b_pref, h.p);
    }

    if (cfg.use_route) {
        EvidenceSet ev = build_evidence(t, q, v, u, refs.evidence);
        RoutingOut ro = route(t, h.p_edit, ev, cfg.tau, refs.route);
        CorrectionOut co = correct_and_refine(t, h.r, ro.c_route, h.s_rel, refs.corr);
        h.alpha = ro.alpha;
        h.alpha_vec = ro.alpha_vec;
        h.c_route = ro.c_route;
        h.entropy = ro.entropy;
        h.delta_rel = co.delta_rel;
        h.s_rel_refined = co.s_rel_refined;
    } else {
        h.s_rel_refined = h.s_rel;
    }

    h.y_hat = interact(t, h.s_pref, h.s_rel_refined, cfg.fusion,
                       cfg.fusion == FusionKind::learned ? &refs.fusion : nullptr);
    return h;
}

BatchLoss build_batch_loss(Tape& t, const PrismModel& model, const ModelRefs& refs,
                           std::span<const EncodedImpression> batch, const PrototypePair* protos,
                           const LossWeights& weights) {
    if (batch.empty()) throw std::invalid_argument("build_batch_loss: empty batch rejected");
    const auto& cfg = model.cfg;
    if (cfg.use_anchor && !protos)
        throw std::invalid_argument("build_batch_loss: anchor module enabled but no prototypes given");

    const size_t B = batch.size();
    std::vector<Val> y_hats, delta_ps, p_edits, ps, delta_ss, alpha_vecs, s_rels;
    std::vector<int> labels, rel_labels, masks;
    y_hats.reserve(B);
    labels.reserve(B);

    for (const auto& imp : batch) {
        ForwardHandles h = forward_impression(t, model, refs, imp);
        y_hats.push_back(h.y_hat);
        labels.push_back(imp.label);
        s_rels.push_back(h.s_rel);
        rel_labels.push_back(imp.has_rel ? imp.rel_label : 1);
        masks.push_back(imp.has_rel);
        if (cfg.use_rectify) {
            delta_ps.push_back(h.delta_p);
            p_edits.push_back(h.p_edit);
            ps.push_back(h.p);
        }
        if (cfg.use_route) alpha_vecs.push_back(h.alpha_vec);
        if (cfg.use_anchor) {
            Val r_proto = project_to_anchor(t, h.r, refs.anchor);
            delta_ss.push_back(anchor_scores(t, r_proto, *protos, cfg.T_proto).delta_s);
        }
    }

    LossComponents parts;
    parts.bce = loss_bce(t, y_hats, labels);
    if (cfg.use_rectify) {
        parts.mag = loss_magnitude(t, delta_ps);
        parts.dir = loss_direction(t, p_edits, ps);
    }
    if (cfg.use_anchor) parts.pr = loss_prototype(t, delta_ss, rel_labels, masks, cfg.gamma);
    if (cfg.use_route) parts.att = loss_routing_entropy(t, alpha_vecs);
    parts.rel_aux = loss_rel_aux(t, s_rels, rel_labels, masks);

    BatchLoss out;
    out.total = total_loss(t, parts, weights);
    out.bce = t.scalar_value(parts.bce);
    if (parts.mag.valid()) out.mag = t.scalar_value(parts.mag);
    if (parts.dir.valid()) out.dir = t.scalar_value(parts.dir);
    if (parts.pr.valid()) out.pr = t.scalar_value(parts.pr);
    if (parts.att.valid()) out.att = t.scalar_value(parts.att);
    out.rel_aux = t.scalar_value(parts.rel_aux);
    return out;
}

std::vector<double> score_dataset(const PrismModel& model, std::span<const EncodedImpression> imps) {
    std::vector<double> scores;
    scores.reserve(imps.size());
    constexpr size_t kChunk = 256;
    Tape t;
    for (size_t off = 0; off < imps.size(); off += kChunk) {
        t.reset();
        ModelRefs refs = make_refs(t, model);
        const size_t end = std::min(off + kChunk, imps.size());
        for (size_t i = off; i < end; ++i) {
            ForwardHandles h = forward_impression(t, model, refs, imps[i]);
            scores.push_back(t.scalar_value(h.y_hat));
        }
    }
    return scores;
}

}  // namespace prism
