#include "prism/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace prism {

FusionKind fusion_kind_from(const std::string& s) {
    if (s == "learned") return FusionKind::learned;
    if (s == "product") return FusionKind::product;
    throw std::invalid_argument("unknown fusion kind '" + s + "' (want learned|product)");
}

const char* to_string(FusionKind k) { return k == FusionKind::learned ? "learned" : "product"; }

void LossWeights::validate() const {
    if (!(main > 0.0)) throw std::invalid_argument("LossWeights: main must be > 0");
    for (double w : {lambda_mag, lambda_dir, lambda_pr, lambda_att, lambda_rel_aux})
        if (!(w >= 0.0)) throw std::invalid_argument("LossWeights: lambdas must be >= 0");
    if (att_sign != 1.0 && att_sign != -1.0)
        throw std::invalid_argument("LossWeights: att_sign must be +1 or -1");
}

Val interact(Tape& t, Val s_pref, Val s_rel_refined, FusionKind kind, const FusionParams* params) {
    if (kind == FusionKind::product) return t.mul(s_pref, s_rel_refined);
    if (!params) throw std::invalid_argument("interact: learned fusion requires parameters");
    Val feats = t.concat({s_pref, s_rel_refined, t.mul(s_pref, s_rel_refined)});
    Val h = t.tanh(t.affine(params->W1, feats, params->b1));
    return t.logistic(t.affine(params->w2, h, params->b2));
}

Val loss_bce(Tape& t, std::span<const Val> y_hat, std::span<const int> y) {
    if (y_hat.empty()) throw std::invalid_argument("loss_bce: empty batch rejected");
    if (y_hat.size() != y.size()) throw std::invalid_argument("loss_bce: batch size mismatch");
    std::vector<Val> terms;
    terms.reserve(y_hat.size());
    for (size_t i = 0; i < y_hat.size(); ++i) {
        if (y[i] != 0 && y[i] != 1) throw std::invalid_argument("loss_bce: label must be 0 or 1");
        terms.push_back(y[i] == 1 ? t.log(t.add_scalar(y_hat[i], 1e-8))
                                  : t.log(t.sub(t.scalar(1.0 + 1e-8), y_hat[i])));
    }
    return t.scale(t.sum_of(terms), -1.0 / static_cast<double>(terms.size()));
}

Val loss_rel_aux(Tape& t, std::span<const Val> s_rel, std::span<const int> rel_label,
                 std::span<const int> mask) {
    if (s_rel.size() != rel_label.size() || s_rel.size() != mask.size())
        throw std::invalid_argument("loss_rel_aux: batch arrays must have equal length");
    double mask_sum = 0.0;
    std::vector<Val> terms;
    for (size_t i = 0; i < s_rel.size(); ++i) {
        if (mask[i] == 0) continue;
        if (rel_label[i] != 1 && rel_label[i] != -1)
            throw std::invalid_argument("loss_rel_aux: relevance label must be +1 or -1");
        mask_sum += 1.0;
        terms.push_back(rel_label[i] == 1 ? t.log(t.add_scalar(s_rel[i], 1e-8))
                                          : t.log(t.sub(t.scalar(1.0 + 1e-8), s_rel[i])));
    }
    if (terms.empty()) return t.scalar(0.0);
    return t.scale(t.sum_of(terms), -1.0 / (mask_sum + 1e-12));
}

Val total_loss(Tape& t, const LossComponents& parts, const LossWeights& w) {
    w.validate();
    if (!parts.bce.valid()) throw std::invalid_argument("total_loss: missing bce component");

    auto check = [&](Val v, const char* name) {
        if (v.valid() && !std::isfinite(t.scalar_value(v)))
            throw std::runtime_error(std::string("total_loss: component '") + name + "' is non-finite");
    };
    check(parts.bce, "bce");
    check(parts.mag, "mag");
    check(parts.dir, "dir");
    check(parts.pr, "pr");
    check(parts.att, "att");
    check(parts.rel_aux, "rel_aux");

    Val total = t.scale(parts.bce, w.main);
    if (parts.mag.valid() && w.lambda_mag != 0.0) total = t.add(total, t.scale(parts.mag, w.lambda_mag));
    if (parts.dir.valid() && w.lambda_dir != 0.0) total = t.add(total, t.scale(parts.dir, w.lambda_dir));
    if (parts.pr.valid() && w.lambda_pr != 0.0) total = t.add(total, t.scale(parts.pr, w.lambda_pr));
    if (parts.att.valid() && w.lambda_att != 0.0)
        total = t.add(total, t.scale(parts.att, w.att_sign * w.lambda_att));
    if (parts.rel_aux.valid() && w.lambda_rel_aux != 0.0)
        total = t.add(total, t.scale(parts.rel_aux, w.lambda_rel_aux));
    return total;
}

}  // namespace prism
