#pragma once

#include <optional>
#include <string>

#include "prism/tape.hpp"

namespace prism {

enum class PreferenceKind { mlp, cross };
enum class RelevanceKind { two_tower, personalized };

PreferenceKind preference_kind_from(const std::string& s);
RelevanceKind relevance_kind_from(const std::string& s);
const char* to_string(PreferenceKind k);
const char* to_string(RelevanceKind k);

// Embedding tables are stored dim x vocab so a lookup is a column slice;
// gradient flows to the selected column only.
Val embed_lookup(Tape& t, Val table, int id);

struct MlpPreferenceParams {
    Val W1, b1, W2, b2;  // 3d->d->d, tanh on both layers
};
struct CrossPreferenceParams {
    Val w1, b1, w2, b2;  // two cross layers on the 3d concat
    Val W_out, b_out;    // final dense 3d->d
};
struct PreferenceParams {
    PreferenceKind kind = PreferenceKind::mlp;
    MlpPreferenceParams mlp;
    CrossPreferenceParams cross;
};

Val preference_forward(Tape& t, Val u, Val q, Val item, const PreferenceParams& params);

// two_tower: r = W_int (l2norm(W_q q + b_q) . l2norm(W_t t + b_t)) + b_int
// personalized: the query tower input is [q; u]
struct RelevanceParams {
    RelevanceKind kind = RelevanceKind::two_tower;
    Val W_query, b_query;  // d x d, or d x 2d for personalized
    Val W_item, b_item;
    Val W_int, b_int;
};

Val relevance_forward(Tape& t, Val q, Val item, std::optional<Val> u, const RelevanceParams& params);

// sigma(w^T x + b)
Val score_linear(Tape& t, Val w, Val b, Val x);

}  // namespace prism
