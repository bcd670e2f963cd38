#include "prism/backbones.hpp"

#include <stdexcept>

namespace prism {

PreferenceKind preference_kind_from(const std::string& s) {
    if (s == "mlp") return PreferenceKind::mlp;
    if (s == "cross") return PreferenceKind::cross;
    throw std::invalid_argument("unknown preference backbone '" + s + "' (want mlp|cross)");
}

RelevanceKind relevance_kind_from(const std::string& s) {
    if (s == "two_tower") return RelevanceKind::two_tower;
    if (s == "personalized") return RelevanceKind::personalized;
    throw std::invalid_argument("unknown relevance backbone '" + s + "' (want two_tower|personalized)");
}

const char* to_string(PreferenceKind k) { return k == PreferenceKind::mlp ? "mlp" : "cross"; }
const char* to_string(RelevanceKind k) {
    return k == RelevanceKind::two_tower ? "two_tower" : "personalized";
}

Val embed_lookup(Tape& t, Val table, int id) {
    const Array& tab = t.value(table);
    if (id < 0 || id >= tab.cols)
        throw std::out_of_range("embed_lookup: id " + std::to_string(id) + " out of range [0," +
                                std::to_string(tab.cols) + ")");
    return t.slice(table, 0, tab.rows, id, 1);
}

Val preference_forward(Tape& t, Val u, Val q, Val item, const PreferenceParams& params) {
    Val x0 = t.concat({u, q, item});
    if (params.kind == PreferenceKind::mlp) {
        const auto& m = params.mlp;
        Val h = t.tanh(t.affine(m.W1, x0, m.b1));
        return t.tanh(t.affine(m.W2, h, m.b2));
    }
    // cross: x_{l+1} = x0 * (w_l^T x_l) + b_l + x_l
    const auto& c = params.cross;
    Val x1 = t.add(t.add(t.mul(x0, t.dot(c.w1, x0)), c.b1), x0);
    Val x2 = t.add(t.add(t.mul(x0, t.dot(c.w2, x1)), c.b2), x1);
    return t.affine(c.W_out, x2, c.b_out);
}

Val relevance_forward(Tape& t, Val q, Val item, std::optional<Val> u, const RelevanceParams& params) {
    Val query_in = q;
    if (params.kind == RelevanceKind::personalized) {
        if (!u) throw std::invalid_argument("relevance_forward: personalized kind requires u");
        query_in = t.concat({q, *u});
    }
    Val tq = t.l2norm(t.affine(params.W_query, query_in, params.b_query));
    Val tt = t.l2norm(t.affine(params.W_item, item, params.b_item));
    return t.affine(params.W_int, t.mul(tq, tt), params.b_int);
}

Val score_linear(Tape& t, Val w, Val b, Val x) {
    return t.logistic(t.add(t.dot(w, x), b));
}

}  // namespace prism
