#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prism/tape.hpp"

namespace prism {

// Two fixed unit-norm semantic prototypes. They stand in for externally
// encoded text anchors and never receive gradient.
struct PrototypePair {
    int dim = 0;
    std::vector<double> positive;
    std::vector<double> negative;
};

// File format: {"dim": int, "positive": [f64...], "negative": [f64...]}.
// Vectors are l2-normalized on load; zero, mismatched or identical vectors
// are rejected.
PrototypePair load_prototypes(const std::string& path);
void save_prototypes(const PrototypePair& protos, const std::string& path);

// Deterministic desk-scale provenance: two random orthonormal vectors.
PrototypePair make_prototypes(int dim, uint64_t seed);

struct AnchorParams {
    Val W_proj;  // d_proto x d
    Val b_proj;  // d_proto
};

// Single dense layer then l2 normalization (epsilon-guarded).
Val project_to_anchor(Tape& t, Val r, const AnchorParams& params);

struct AnchorScores {
    Val s_pos, s_neg;
    Val delta_s;  // s_pos - s_neg
};

AnchorScores anchor_scores(Tape& t, Val r_proto, const PrototypePair& protos, double T_proto);

// sum_i m_i max(0, gamma - t_i delta_s_i) / (sum_i m_i + 1e-12)
Val loss_prototype(Tape& t, std::span<const Val> delta_s, std::span<const int> rel_label,
                   std::span<const int> mask, double gamma);

}  // namespace prism
