#include "prism/rectify.hpp"

#include <stdexcept>
#include <vector>

namespace prism {

RectifyOut rectify(Tape& t, Val p, Val r, const RectifyParams& params, double leaky_slope) {
    Val z_p = t.matmul(params.W_s, p);
    Val z_r = t.matmul(params.W_s, r);
    Val v_p = t.matmul(params.W_vp, p);
    Val v_r = t.matmul(params.W_vr, r);

    Val e_rp = t.leaky_relu(t.dot(params.a, t.concat({z_r, z_p})), leaky_slope);
    Val e_pp = t.leaky_relu(t.dot(params.a, t.concat({z_p, z_p})), leaky_slope);
    Val alpha = t.softmax(t.concat({e_rp, e_pp}));

    RectifyOut out;
    out.alpha_rp = t.slice(alpha, 0, 1, 0, 1);
    out.alpha_pp = t.slice(alpha, 1, 1, 0, 1);
    out.v_r = v_r;

    Val message = t.mul(out.alpha_pp, v_p);
    out.p_clean = t.matmul(params.W_o, t.tanh(message));
    out.delta_p = t.sub(out.p_clean, p);
    out.p_edit = t.add(p, out.delta_p);
    out.s_pref = t.logistic(t.add(t.dot(params.w_pref, out.p_edit), params.b_pref));
    return out;
}

Val loss_magnitude(Tape& t, std::span<const Val> delta_p) {
    if (delta_p.empty()) throw std::invalid_argument("loss_magnitude: empty batch rejected");
    std::vector<Val> sq;
    sq.reserve(delta_p.size());
    for (Val dp : delta_p) sq.push_back(t.dot(dp, dp));
    return t.mean_of(sq);
}

Val loss_direction(Tape& t, std::span<const Val> p_edit, std::span<const Val> p) {
    if (p_edit.empty()) throw std::invalid_argument("loss_direction: empty batch rejected");
    if (p_edit.size() != p.size())
        throw std::invalid_argument("loss_direction: batch size mismatch");
    std::vector<Val> terms;
    terms.reserve(p.size());
    for (size_t i = 0; i < p.size(); ++i)
        terms.push_back(t.sub(t.scalar(1.0), t.cosine(p_edit[i], p[i])));
    return t.mean_of(terms);
}

}  // namespace prism
