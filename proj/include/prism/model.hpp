#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prism/anchor.hpp"
#include "prism/backbones.hpp"
#include "prism/data.hpp"
#include "prism/objective.hpp"
#include "prism/rectify.hpp"
#include "prism/route.hpp"
#include "prism/tape.hpp"

namespace prism {

struct PrismConfig {
    int embed_dim = 64;
    int proto_dim = 64;
    PreferenceKind pm_kind = PreferenceKind::mlp;
    RelevanceKind rm_kind = RelevanceKind::two_tower;
    FusionKind fusion = FusionKind::learned;
    bool use_rectify = true;
    bool use_anchor = true;
    bool use_route = true;
    int rectify_iters = 1;
    double tau = 1.0;        // routing temperature
    double T_proto = 0.1;    // prototype temperature
    double gamma = 0.5;      // anchoring margin
    double leaky_slope = 0.01;
    std::array<int, 2> corr_hidden = {64, 32};
    int fusion_hidden = 8;

    void validate() const;
};

struct EncodedImpression {
    int user = 0, query = 0, item = 0;
    int label = 0;
    int rel_label = 0;  // +1/-1 when has_rel
    int has_rel = 0;
};

std::vector<EncodedImpression> encode(const Dataset& ds);

// Trainable PRISM instance: configuration, vocabulary sizes and parameters.
class PrismModel {
public:
    PrismConfig cfg;
    int n_users = 0, n_queries = 0, n_items = 0;
    ParameterStore store;

    static PrismModel init(const PrismConfig& cfg, int n_users, int n_queries, int n_items,
                           uint64_t seed);
};

// Parameter handles resolved once per tape.
struct ModelRefs {
    Val embed_user, embed_query, embed_item;
    PreferenceParams pm;
    RelevanceParams rm;
    Val w_pref, b_pref, w_rel, b_rel;
    RectifyParams rectify;
    AnchorParams anchor;
    EvidenceParams evidence;
    RouteParams route;
    CorrectionParams corr;
    FusionParams fusion;
};

ModelRefs make_refs(Tape& t, const PrismModel& model);

// Per-impression forward artifacts. Handles for disabled modules are invalid.
struct ForwardHandles {
    Val p, r;
    Val delta_p, p_edit;
    Val alpha_rp, alpha_pp, v_r;
    Val s_pref;
    Val delta_s;
    std::array<Val, 6> alpha{};
    Val alpha_vec, c_route, delta_rel;
    Val s_rel, s_rel_refined;
    Val y_hat;
    double entropy = 0.0;
};

ForwardHandles forward_impression(Tape& t, const PrismModel& model, const ModelRefs& refs,
                                  const EncodedImpression& imp);

struct BatchLoss {
    Val total;
    // component values; exactly 0 for ablated modules
    double bce = 0, mag = 0, dir = 0, pr = 0, att = 0, rel_aux = 0;
};

BatchLoss build_batch_loss(Tape& t, const PrismModel& model, const ModelRefs& refs,
                           std::span<const EncodedImpression> batch,
                           const PrototypePair* protos, const LossWeights& weights);

// Forward-only scoring; tapes are recycled internally.
std::vector<double> score_dataset(const PrismModel& model, std::span<const EncodedImpression> imps);

}  // namespace prism
