#include "prism/anchor.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "prism/rng.hpp"

namespace prism {

using nlohmann::json;

namespace {

void normalize_or_reject(std::vector<double>& v, const char* which) {
    double n2 = 0.0;
    for (double x : v) {
        if (!std::isfinite(x))
            throw std::invalid_argument(std::string("prototypes: non-finite entry in ") + which);
        n2 += x * x;
    }
    if (n2 < 1e-24)
        throw std::invalid_argument(std::string("prototypes: zero ") + which + " vector rejected");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
}

}  // namespace

PrototypePair load_prototypes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_prototypes: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("load_prototypes: malformed JSON in " + path + ": " + e.what());
    }
    if (!j.contains("dim") || !j["dim"].is_number_integer())
        throw std::invalid_argument("load_prototypes: missing integer field 'dim'");

    PrototypePair p;
    p.dim = j["dim"].get<int>();
    if (p.dim < 1) throw std::invalid_argument("load_prototypes: dim must be >= 1");
    for (const char* key : {"positive", "negative"}) {
        if (!j.contains(key) || !j[key].is_array())
            throw std::invalid_argument(std::string("load_prototypes: missing array field '") + key + "'");
        auto& dst = key[0] == 'p' ? p.positive : p.negative;
        dst = j[key].get<std::vector<double>>();
        if (static_cast<int>(dst.size()) != p.dim)
            throw std::invalid_argument(std::string("load_prototypes: '") + key + "' has " +
                                        std::to_string(dst.size()) + " entries, dim is " +
                                        std::to_string(p.dim));
    }
    normalize_or_reject(p.positive, "positive");
    normalize_or_reject(p.negative, "negative");

    double max_diff = 0.0;
    for (int i = 0; i < p.dim; ++i)
        max_diff = std::max(max_diff, std::fabs(p.positive[i] - p.negative[i]));
    if (max_diff < 1e-12)
        throw std::invalid_argument("load_prototypes: identical positive and negative prototypes");
    return p;
}

void save_prototypes(const PrototypePair& protos, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_prototypes: cannot open " + path);
    json j;
    j["dim"] = protos.dim;
    j["positive"] = protos.positive;
    j["negative"] = protos.negative;
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_prototypes: write failed for " + path);
}

PrototypePair make_prototypes(int dim, uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("make_prototypes: dim must be >= 2");
    Rng rng(seed);
    PrototypePair p;
    p.dim = dim;
    p.positive.resize(dim);
    p.negative.resize(dim);
    for (double& x : p.positive) x = rng.normal();
    normalize_or_reject(p.positive, "positive");
    for (double& x : p.negative) x = rng.normal();
    // Gram-Schmidt against the positive prototype
    double proj = 0.0;
    for (int i = 0; i < dim; ++i) proj += p.negative[i] * p.positive[i];
    for (int i = 0; i < dim; ++i) p.negative[i] -= proj * p.positive[i];
    normalize_or_reject(p.negative, "negative");
    return p;
}

Val project_to_anchor(Tape& t, Val r, const AnchorParams& params) {
    return t.l2norm(t.affine(params.W_proj, r, params.b_proj));
}

AnchorScores anchor_scores(Tape& t, Val r_proto, const PrototypePair& protos, double T_proto) {
    if (!(T_proto > 0.0)) throw std::invalid_argument("anchor_scores: T_proto must be > 0");
    const Array& rp = t.value(r_proto);
    if (rp.rows != protos.dim || rp.cols != 1)
        throw std::invalid_argument("anchor_scores: r_proto shape " + rp.shape_str() +
                                    " does not match prototype dim " + std::to_string(protos.dim));
    Val pos = t.constant(Array::col(protos.positive));
    Val neg = t.constant(Array::col(protos.negative));
    AnchorScores s;
    const double inv_t = 1.0 / T_proto;
    s.s_pos = t.scale(t.cosine(r_proto, pos), inv_t);
    s.s_neg = t.scale(t.cosine(r_proto, neg), inv_t);
    s.delta_s = t.sub(s.s_pos, s.s_neg);
    return s;
}

Val loss_prototype(Tape& t, std::span<const Val> delta_s, std::span<const int> rel_label,
                   std::span<const int> mask, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("loss_prototype: gamma must be >= 0");
    if (delta_s.size() != rel_label.size() || delta_s.size() != mask.size())
        throw std::invalid_argument("loss_prototype: batch arrays must have equal length");

    double mask_sum = 0.0;
    std::vector<Val> terms;
    for (size_t i = 0; i < delta_s.size(); ++i) {
        if (mask[i] != 0 && mask[i] != 1)
            throw std::invalid_argument("loss_prototype: mask must be 0 or 1");
        if (mask[i] == 0) continue;
        if (rel_label[i] != 1 && rel_label[i] != -1)
            throw std::invalid_argument("loss_prototype: relevance label must be +1 or -1");
        mask_sum += 1.0;
        terms.push_back(t.max0(t.sub(t.scalar(gamma), t.scale(delta_s[i], rel_label[i]))));
    }
    if (terms.empty()) return t.scalar(0.0);
    return t.scale(t.sum_of(terms), 1.0 / (mask_sum + 1e-12));
}

}  // namespace prism
