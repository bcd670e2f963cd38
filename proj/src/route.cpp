#include "prism/route.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace prism {

EvidenceSet build_evidence(Tape& t, Val q, Val item, Val u, const EvidenceParams& params) {
    EvidenceSet ev;
    ev.tokens[0] = t.tanh(t.matmul(params.W_q, q));
    ev.tokens[1] = t.tanh(t.matmul(params.W_t, item));
    ev.tokens[2] = t.tanh(t.matmul(params.W_u, u));
    ev.tokens[3] = t.tanh(t.affine(params.W_qt, t.concat({q, item}), params.b_qt));
    ev.tokens[4] = t.tanh(t.affine(params.W_qu, t.concat({q, u}), params.b_qu));
    ev.tokens[5] = t.tanh(t.affine(params.W_ut, t.concat({u, item}), params.b_ut));
    return ev;
}

RoutingOut route(Tape& t, Val p_edit, const EvidenceSet& ev, double tau, const RouteParams& params) {
    if (!(tau > 0.0)) throw std::invalid_argument("route: tau must be > 0");

    Val q_r = t.matmul(params.W_query, p_edit);
    std::array<Val, 6> scores;
    for (int i = 0; i < 6; ++i) {
        Val key = t.matmul(params.W_key, ev.tokens[i]);
        scores[i] = t.dot(params.w_score, t.tanh(t.add(q_r, key)));
    }

    RoutingOut out;
    out.alpha_vec = t.softmax(t.concat_all(scores), tau);

    Val c = Val{};
    for (int i = 0; i < 6; ++i) {
        out.alpha[i] = t.slice(out.alpha_vec, i, 1, 0, 1);
        Val weighted = t.mul(out.alpha[i], ev.tokens[i]);
        c = i == 0 ? weighted : t.add(c, weighted);
    }
    out.c_route = c;

    double h = 0.0;
    for (double a : t.value(out.alpha_vec).v) h -= a * std::log(a + 1e-12);
    out.entropy = std::max(0.0, h);
    return out;
}

CorrectionOut correct_and_refine(Tape& t, Val r, Val c_route, Val s_rel,
                                 const CorrectionParams& params) {
    const Array& s = t.value(s_rel);
    if (!s.is_scalar())
        throw std::invalid_argument("correct_and_refine: s_rel must be scalar, got " + s.shape_str());

    CorrectionOut out;
    out.s_rel = s_rel;
    out.z_corr = t.concat({r, c_route, t.mul(r, c_route), t.abs(t.sub(r, c_route))});

    Val h1 = t.tanh(t.affine(params.W1, out.z_corr, params.b1));
    Val h2 = t.tanh(t.affine(params.W2, h1, params.b2));
    out.delta_rel = t.affine(params.W3, h2, params.b3);

    Val clamped = t.clamp01(s_rel, 1e-7, 1.0 - 1e-7);
    out.s_rel_refined = t.logistic(t.add(t.logit(clamped), out.delta_rel));
    return out;
}

Val loss_routing_entropy(Tape& t, std::span<const Val> alpha_vecs) {
    if (alpha_vecs.empty())
        throw std::invalid_argument("loss_routing_entropy: empty batch rejected");
    std::vector<Val> terms;
    terms.reserve(alpha_vecs.size());
    for (Val av : alpha_vecs) {
        Val plogp = t.sum(t.mul(av, t.log(t.add_scalar(av, 1e-8))));
        terms.push_back(t.scale(plogp, -1.0));
    }
    return t.mean_of(terms);
}

}  // namespace prism
