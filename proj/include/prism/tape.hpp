#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "prism/array.hpp"
#include "prism/param_store.hpp"

namespace prism {

// Primitive kinds recorded on the tape. Every kind has an exact local
// gradient rule; hinge (Max0) and Abs use subgradient 0 at the kink.
enum class Op : uint8_t {
    Leaf,       // trainable parameter (copied from a ParameterStore)
    Constant,   // no gradient
    MatMul,     // (m,k) x (k,n)
    Add,        // same shape, or one side scalar
    Sub,
    Mul,        // elementwise; one side may be scalar
    Scale,      // multiply by attrs.scale
    Concat,     // stack rows, equal cols, up to 4 inputs
    Slice,      // submatrix window
    Abs,
    Tanh,
    Logistic,
    LeakyRelu,  // attrs.slope
    Softmax,    // column vector, attrs.temperature > 0
    L2Norm,     // column vector, x / (||x|| + 1e-12)
    Cosine,     // same shape, (a.b) / ((||a||+eps)(||b||+eps))
    Dot,        // same shape, sum of elementwise products
    Mean,
    Sum,
    Log,        // elementwise, requires x > 0
    Max0,       // max(x, 0)
};

const char* op_name(Op op);

struct PrimitiveAttrs {
    double scale = 1.0;
    double temperature = 1.0;
    double slope = 0.01;
    int row_off = 0, n_rows = 0, col_off = 0, n_cols = 0;  // Slice window
};

// Handle to a node on a tape; only meaningful for the tape that produced it.
struct Val {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Named parameter partials produced by Tape::backward. Every parameter of the
// originating store gets an entry; parameters unreachable from the loss keep
// all-zero arrays.
struct GradientMap {
    std::map<std::string, Array> g;

    const Array* find(const std::string& name) const {
        auto it = g.find(name);
        return it == g.end() ? nullptr : &it->second;
    }
    const Array& at(const std::string& name) const;
};

// Reverse-mode tape over dense f64 arrays. Values are computed eagerly at
// apply time; backward() walks the recorded nodes once in reverse creation
// order. A tape is single-owner: build and backward from one thread, rebuild
// per batch.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // --- leaves -------------------------------------------------------------
    Val param(const ParameterStore& store, const std::string& name);
    Val constant(Array a);
    Val scalar(double x) { return constant(Array::scalar(x)); }

    // --- generic entry point ------------------------------------------------
    Val apply_primitive(Op tag, std::span<const Val> inputs, const PrimitiveAttrs& attrs = {});

    // --- convenience wrappers -----------------------------------------------
    Val matmul(Val a, Val b) { return apply2(Op::MatMul, a, b); }
    Val add(Val a, Val b) { return apply2(Op::Add, a, b); }
    Val sub(Val a, Val b) { return apply2(Op::Sub, a, b); }
    Val mul(Val a, Val b) { return apply2(Op::Mul, a, b); }
    Val scale(Val a, double c);
    Val concat(std::initializer_list<Val> xs);
    Val concat_all(std::span<const Val> xs);  // folds into <=4-ary Concats
    Val slice(Val a, int row_off, int n_rows, int col_off, int n_cols);
    Val abs(Val a) { return apply1(Op::Abs, a); }
    Val tanh(Val a) { return apply1(Op::Tanh, a); }
    Val logistic(Val a) { return apply1(Op::Logistic, a); }
    Val leaky_relu(Val a, double slope = 0.01);
    Val softmax(Val a, double temperature = 1.0);
    Val l2norm(Val a) { return apply1(Op::L2Norm, a); }
    Val cosine(Val a, Val b) { return apply2(Op::Cosine, a, b); }
    Val dot(Val a, Val b) { return apply2(Op::Dot, a, b); }
    Val mean(Val a) { return apply1(Op::Mean, a); }
    Val sum(Val a) { return apply1(Op::Sum, a); }
    Val log(Val a) { return apply1(Op::Log, a); }
    Val max0(Val a) { return apply1(Op::Max0, a); }

    // composites
    Val add_scalar(Val a, double c) { return add(a, scalar(c)); }
    Val mean_of(std::span<const Val> xs);             // scalar mean of scalars
    Val sum_of(std::span<const Val> xs);              // scalar sum of scalars
    Val affine(Val W, Val x, Val b) { return add(matmul(W, x), b); }
    Val clamp01(Val x, double lo, double hi);         // clamp into [lo, hi] via Max0
    Val logit(Val s) { return sub(log(s), log(sub(scalar(1.0), s))); }

    // --- access ---------------------------------------------------------------
    const Array& value(Val v) const { return node_at(v).value; }
    double scalar_value(Val v) const;
    const Array& grad(Val v) const;
    size_t size() const { return nodes_.size(); }

    // --- backward ---------------------------------------------------------------
    // loss must be scalar-shaped; a second call without reset() is rejected.
    GradientMap backward(Val loss);
    void reset();

private:
    struct NodeRec {
        Op op = Op::Constant;
        uint8_t n_in = 0;
        std::array<int32_t, 4> in{{-1, -1, -1, -1}};
        PrimitiveAttrs attrs;
        Array value;
        Array grad;           // allocated during backward
        int32_t param_idx = -1;
    };

    std::vector<NodeRec> nodes_;
    std::vector<std::pair<std::string, int32_t>> params_;  // name -> node id
    std::map<std::string, int32_t> param_lookup_;
    const ParameterStore* store_ = nullptr;
    bool backward_done_ = false;

    Val apply1(Op tag, Val a) { return apply_primitive(tag, {{a}}); }
    Val apply2(Op tag, Val a, Val b) { return apply_primitive(tag, {{a, b}}); }
    const NodeRec& node_at(Val v) const;
    NodeRec& node_at(Val v);
    Val push(NodeRec rec);
    void check_input(Val v, Op tag) const;
    Array eval(Op tag, const NodeRec& rec) const;
    void backprop_node(NodeRec& n);
    Array& grad_buf(int32_t id);
};

}  // namespace prism
