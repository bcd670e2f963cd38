#pragma once

#include <span>

#include "prism/tape.hpp"

namespace prism {

// Preference rectification: an attention gate between the relevance-to-
// preference path and the self-preserving path drives a residual edit of p.
struct RectifyParams {
    Val W_s;     // d x d shared scoring projection
    Val W_vp;    // d x d value projection for p
    Val W_vr;    // d x d value projection for r
    Val a;       // 2d attention vector
    Val W_o;     // d x d output projection
    Val w_pref;  // d preference score head
    Val b_pref;  // scalar
};

struct RectifyOut {
    Val alpha_rp, alpha_pp;  // gate weights, sum to 1
    Val v_r;                 // defined by the equations; nothing downstream consumes it
    Val p_clean;
    Val delta_p;             // p_clean - p
    Val p_edit;              // p + delta_p
    Val s_pref;
};

RectifyOut rectify(Tape& t, Val p, Val r, const RectifyParams& params, double leaky_slope = 0.01);

// (1/B) sum ||delta_p_i||^2
Val loss_magnitude(Tape& t, std::span<const Val> delta_p);

// (1/B) sum (1 - cos(p_edit_i, p_i)), cosine epsilon-guarded at 1e-12
Val loss_direction(Tape& t, std::span<const Val> p_edit, std::span<const Val> p);

}  // namespace prism
