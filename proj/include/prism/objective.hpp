#pragma once

#include <span>
#include <string>

#include "prism/tape.hpp"

namespace prism {

enum class FusionKind { learned, product };

FusionKind fusion_kind_from(const std::string& s);
const char* to_string(FusionKind k);

struct FusionParams {
    Val W1, b1;  // 3 -> hidden, tanh
    Val w2, b2;  // hidden -> 1, logistic
};

// learned: MLP on [s_pref; s_rel'; s_pref*s_rel']  product: s_pref * s_rel'
Val interact(Tape& t, Val s_pref, Val s_rel_refined, FusionKind kind, const FusionParams* params);

// -(1/B) sum [y log(yhat + 1e-8) + (1-y) log(1 - yhat + 1e-8)]
Val loss_bce(Tape& t, std::span<const Val> y_hat, std::span<const int> y);

// masked BCE of s_rel against (t+1)/2, normalized by sum(m) + 1e-12
Val loss_rel_aux(Tape& t, std::span<const Val> s_rel, std::span<const int> rel_label,
                 std::span<const int> mask);

struct LossWeights {
    double main = 1.0;
    double lambda_mag = 1e-4;
    double lambda_dir = 1e-3;
    double lambda_pr = 0.1;
    double lambda_att = 1e-4;
    double lambda_rel_aux = 0.001;
    // Applied to the entropy term; +1 makes a positive weight
    // sharpen routing, -1 flips it toward uniform.
    double att_sign = 1.0;

    void validate() const;
};

// A component with an invalid Val handle is an ablated module: its term is
// exactly zero.
struct LossComponents {
    Val bce;
    Val mag, dir, pr, att, rel_aux;
};

Val total_loss(Tape& t, const LossComponents& parts, const LossWeights& w);

}  // namespace prism
