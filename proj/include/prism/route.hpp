#pragma once

#include <array>
#include <span>

#include "prism/tape.hpp"

namespace prism {

// Six evidence tokens in fixed order: e_q, e_t, e_u, e_qt, e_qu, e_ut.
struct EvidenceParams {
    Val W_q, W_t, W_u;              // d x d, no bias
    Val W_qt, b_qt, W_qu, b_qu, W_ut, b_ut;  // dense d x 2d on the pair concats
};

struct EvidenceSet {
    std::array<Val, 6> tokens;
};

EvidenceSet build_evidence(Tape& t, Val q, Val item, Val u, const EvidenceParams& params);

struct RouteParams {
    Val W_query;  // routing query projection of p_edit
    Val W_key;    // key projection of each token
    Val w_score;  // scoring vector, zero-initialized
};

struct RoutingOut {
    std::array<Val, 6> alpha;  // scalar weights
    Val alpha_vec;             // (6,1), softmax output
    Val c_route;               // convex combination of the tokens
    double entropy = 0.0;      // reported value, -sum a log(a + 1e-12), clamped at 0
};

RoutingOut route(Tape& t, Val p_edit, const EvidenceSet& ev, double tau, const RouteParams& params);

struct CorrectionParams {
    Val W1, b1;  // 4d -> hidden1, tanh
    Val W2, b2;  // hidden1 -> hidden2, tanh
    Val W3, b3;  // hidden2 -> 1, linear, zero-initialized
};

struct CorrectionOut {
    Val z_corr;          // [r; c_route; r*c_route; |r - c_route|]
    Val delta_rel;       // scalar logit correction
    Val s_rel;           // pass-through of the input score
    Val s_rel_refined;   // sigma(logit(s_rel) + delta_rel)
};

// s_rel is clamped into [1e-7, 1-1e-7] before the logit.
CorrectionOut correct_and_refine(Tape& t, Val r, Val c_route, Val s_rel,
                                 const CorrectionParams& params);

// Training regularizer: -(1/B) sum_i sum_e a_i(e) log(a_i(e) + 1e-8).
Val loss_routing_entropy(Tape& t, std::span<const Val> alpha_vecs);

}  // namespace prism
