#include "prism/tape.hpp"

#include <algorithm>
#include <cmath>

namespace prism {

namespace {

constexpr double kNormEps = 1e-12;

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string shape2(const Array& a, const Array& b) { return a.shape_str() + " vs " + b.shape_str(); }

double stable_logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Constant: return "constant";
        case Op::MatMul: return "matmul";
        case Op::Add: return "add";
        case Op::Sub: return "subtract";
        case Op::Mul: return "elementwise-multiply";
        case Op::Scale: return "scale";
        case Op::Concat: return "concat";
        case Op::Slice: return "slice";
        case Op::Abs: return "elementwise-abs";
        case Op::Tanh: return "tanh";
        case Op::Logistic: return "logistic";
        case Op::LeakyRelu: return "leaky-relu";
        case Op::Softmax: return "softmax";
        case Op::L2Norm: return "l2-normalize";
        case Op::Cosine: return "cosine-similarity";
        case Op::Dot: return "dot";
        case Op::Mean: return "mean";
        case Op::Sum: return "sum";
        case Op::Log: return "log";
        case Op::Max0: return "max-with-zero";
    }
    return "?";
}

const Array& GradientMap::at(const std::string& name) const {
    const Array* a = find(name);
    if (!a) fail("GradientMap: no entry for '" + name + "'");
    return *a;
}

const Tape::NodeRec& Tape::node_at(Val v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
        fail("Tape: invalid node handle");
    return nodes_[v.id];
}

Tape::NodeRec& Tape::node_at(Val v) { return const_cast<NodeRec&>(static_cast<const Tape*>(this)->node_at(v)); }

Val Tape::push(NodeRec rec) {
    nodes_.push_back(std::move(rec));
    return Val{static_cast<int32_t>(nodes_.size() - 1)};
}

Val Tape::param(const ParameterStore& store, const std::string& name) {
    if (backward_done_) fail("Tape: cannot extend tape after backward; reset first");
    if (store_ && store_ != &store) fail("Tape: a tape may reference a single ParameterStore");
    store_ = &store;
    auto it = param_lookup_.find(name);
    if (it != param_lookup_.end()) return Val{it->second};
    NodeRec rec;
    rec.op = Op::Leaf;
    rec.value = store.at(name);  // copy; the tape owns a snapshot
    rec.param_idx = static_cast<int32_t>(params_.size());
    Val v = push(std::move(rec));
    params_.emplace_back(name, v.id);
    param_lookup_.emplace(name, v.id);
    return v;
}

Val Tape::constant(Array a) {
    if (backward_done_) fail("Tape: cannot extend tape after backward; reset first");
    if (!a.all_finite()) fail("Tape: non-finite input rejected (constant)");
    NodeRec rec;
    rec.op = Op::Constant;
    rec.value = std::move(a);
    return push(std::move(rec));
}

void Tape::check_input(Val v, Op tag) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
        fail(std::string(op_name(tag)) + ": invalid input node");
}

Val Tape::apply_primitive(Op tag, std::span<const Val> inputs, const PrimitiveAttrs& attrs) {
    if (backward_done_) fail("Tape: cannot extend tape after backward; reset first");
    if (tag == Op::Leaf || tag == Op::Constant) fail("apply_primitive: use param()/constant() for leaves");
    if (inputs.size() > 4) fail(std::string(op_name(tag)) + ": at most 4 inputs per node");
    NodeRec rec;
    rec.op = tag;
    rec.attrs = attrs;
    rec.n_in = static_cast<uint8_t>(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
        check_input(inputs[i], tag);
        rec.in[i] = inputs[i].id;
    }
    rec.value = eval(tag, rec);
    if (!rec.value.all_finite())
        fail(std::string(op_name(tag)) + ": non-finite result rejected");
    return push(std::move(rec));
}

Array Tape::eval(Op tag, const NodeRec& rec) const {
    auto in = [&](int i) -> const Array& { return nodes_[rec.in[i]].value; };
    auto need = [&](int n) {
        if (rec.n_in != n)
            fail(std::string(op_name(tag)) + ": expects " + std::to_string(n) + " inputs, got " +
                 std::to_string(int(rec.n_in)));
    };

    switch (tag) {
        case Op::MatMul: {
            need(2);
            const Array &a = in(0), &b = in(1);
            if (a.cols != b.rows)
                fail("matmul: shape mismatch " + shape2(a, b));
            Array c(a.rows, b.cols);
            if (b.cols == 1) {  // matrix-vector fast path
                for (int i = 0; i < a.rows; ++i) {
                    const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
                    double s = 0.0;
                    for (int k = 0; k < a.cols; ++k) s += arow[k] * b.v[k];
                    c.v[i] = s;
                }
                return c;
            }
            for (int i = 0; i < a.rows; ++i) {
                const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
                double* crow = &c.v[static_cast<size_t>(i) * c.cols];
                for (int k = 0; k < a.cols; ++k) {
                    const double aik = arow[k];
                    if (aik == 0.0) continue;
                    const double* brow = &b.v[static_cast<size_t>(k) * b.cols];
                    for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
                }
            }
            return c;
        }
        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            need(2);
            const Array &a = in(0), &b = in(1);
            const bool as = a.is_scalar(), bs = b.is_scalar();
            if (!a.same_shape(b) && !as && !bs)
                fail(std::string(op_name(tag)) + ": shape mismatch " + shape2(a, b));
            const Array& shape_src = as && !bs ? b : a;
            Array c(shape_src.rows, shape_src.cols);
            for (size_t i = 0; i < c.v.size(); ++i) {
                const double x = as ? a.v[0] : a.v[i];
                const double y = bs ? b.v[0] : b.v[i];
                c.v[i] = tag == Op::Add ? x + y : tag == Op::Sub ? x - y : x * y;
            }
            return c;
        }
        case Op::Scale: {
            need(1);
            if (!std::isfinite(rec.attrs.scale)) fail("scale: non-finite factor");
            Array c = in(0);
            for (double& x : c.v) x *= rec.attrs.scale;
            return c;
        }
        case Op::Concat: {
            if (rec.n_in < 1) fail("concat: needs at least one input");
            const int cols = in(0).cols;
            int rows = 0;
            for (int i = 0; i < rec.n_in; ++i) {
                if (in(i).cols != cols) fail("concat: column mismatch " + shape2(in(0), in(i)));
                rows += in(i).rows;
            }
            Array c(rows, cols);
            size_t off = 0;
            for (int i = 0; i < rec.n_in; ++i) {
                std::copy(in(i).v.begin(), in(i).v.end(), c.v.begin() + off);
                off += in(i).v.size();
            }
            return c;
        }
        case Op::Slice: {
            need(1);
            const Array& a = in(0);
            const auto& at = rec.attrs;
            if (at.row_off < 0 || at.col_off < 0 || at.n_rows < 1 || at.n_cols < 1 ||
                at.row_off + at.n_rows > a.rows || at.col_off + at.n_cols > a.cols)
                fail("slice: window out of range for " + a.shape_str());
            Array c(at.n_rows, at.n_cols);
            for (int i = 0; i < at.n_rows; ++i)
                for (int j = 0; j < at.n_cols; ++j)
                    c.at(i, j) = a.at(at.row_off + i, at.col_off + j);
            return c;
        }
        case Op::Abs: {
            need(1);
            Array c = in(0);
            for (double& x : c.v) x = std::fabs(x);
            return c;
        }
        case Op::Tanh: {
            need(1);
            Array c = in(0);
            for (double& x : c.v) x = std::tanh(x);
            return c;
        }
        case Op::Logistic: {
            need(1);
            Array c = in(0);
            for (double& x : c.v) x = stable_logistic(x);
            return c;
        }
        case Op::LeakyRelu: {
            need(1);
            if (!std::isfinite(rec.attrs.slope)) fail("leaky-relu: non-finite slope");
            Array c = in(0);
            for (double& x : c.v) x = x > 0.0 ? x : rec.attrs.slope * x;
            return c;
        }
        case Op::Softmax: {
            need(1);
            const Array& a = in(0);
            if (!a.is_col()) fail("softmax: expects a column vector, got " + a.shape_str());
            const double T = rec.attrs.temperature;
            if (!(T > 0.0)) fail("softmax: temperature must be > 0");
            Array c(a.rows, 1);
            double mx = a.v[0];
            for (double x : a.v) mx = std::max(mx, x);
            double z = 0.0;
            for (int i = 0; i < a.rows; ++i) {
                c.v[i] = std::exp((a.v[i] - mx) / T);
                z += c.v[i];
            }
            for (double& x : c.v) x /= z;
            return c;
        }
        case Op::L2Norm: {
            need(1);
            const Array& a = in(0);
            if (!a.is_col()) fail("l2-normalize: expects a column vector, got " + a.shape_str());
            const double s = a.l2_norm() + kNormEps;
            Array c = a;
            for (double& x : c.v) x /= s;
            return c;
        }
        case Op::Cosine: {
            need(2);
            const Array &a = in(0), &b = in(1);
            if (!a.same_shape(b)) fail("cosine-similarity: shape mismatch " + shape2(a, b));
            const double d = (a.l2_norm() + kNormEps) * (b.l2_norm() + kNormEps);
            return Array::scalar(dot_flat(a, b) / d);
        }
        case Op::Dot: {
            need(2);
            const Array &a = in(0), &b = in(1);
            if (!a.same_shape(b)) fail("dot: shape mismatch " + shape2(a, b));
            return Array::scalar(dot_flat(a, b));
        }
        case Op::Mean: {
            need(1);
            const Array& a = in(0);
            if (a.v.empty()) fail("mean: empty input");
            double s = 0.0;
            for (double x : a.v) s += x;
            return Array::scalar(s / static_cast<double>(a.v.size()));
        }
        case Op::Sum: {
            need(1);
            double s = 0.0;
            for (double x : in(0).v) s += x;
            return Array::scalar(s);
        }
        case Op::Log: {
            need(1);
            Array c = in(0);
            for (double& x : c.v) {
                if (!(x > 0.0)) fail("log: input must be positive");
                x = std::log(x);
            }
            return c;
        }
        case Op::Max0: {
            need(1);
            Array c = in(0);
            for (double& x : c.v) x = x > 0.0 ? x : 0.0;
            return c;
        }
        default:
            fail("apply_primitive: unsupported tag");
    }
    return {};
}

double Tape::scalar_value(Val v) const {
    const Array& a = value(v);
    if (!a.is_scalar()) fail("scalar_value: node is not scalar, shape " + a.shape_str());
    return a.v[0];
}

const Array& Tape::grad(Val v) const {
    const NodeRec& n = node_at(v);
    if (!backward_done_) fail("Tape: grad requested before backward");
    if (n.grad.v.empty()) fail("Tape: node has no gradient buffer (unreachable from loss)");
    return n.grad;
}

Val Tape::scale(Val a, double c) {
    PrimitiveAttrs at;
    at.scale = c;
    return apply_primitive(Op::Scale, {{a}}, at);
}

Val Tape::concat(std::initializer_list<Val> xs) {
    std::vector<Val> v(xs);
    return apply_primitive(Op::Concat, v);
}

Val Tape::concat_all(std::span<const Val> xs) {
    if (xs.empty()) fail("concat: needs at least one input");
    Val acc = xs[0];
    size_t i = 1;
    bool first = true;
    while (i < xs.size() || first) {
        std::vector<Val> chunk{acc};
        while (i < xs.size() && chunk.size() < 4) chunk.push_back(xs[i++]);
        if (chunk.size() > 1) acc = apply_primitive(Op::Concat, chunk);
        first = false;
    }
    return acc;
}

Val Tape::slice(Val a, int row_off, int n_rows, int col_off, int n_cols) {
    PrimitiveAttrs at;
    at.row_off = row_off;
    at.n_rows = n_rows;
    at.col_off = col_off;
    at.n_cols = n_cols;
    return apply_primitive(Op::Slice, {{a}}, at);
}

Val Tape::leaky_relu(Val a, double slope) {
    PrimitiveAttrs at;
    at.slope = slope;
    return apply_primitive(Op::LeakyRelu, {{a}}, at);
}

Val Tape::softmax(Val a, double temperature) {
    PrimitiveAttrs at;
    at.temperature = temperature;
    return apply_primitive(Op::Softmax, {{a}}, at);
}

Val Tape::mean_of(std::span<const Val> xs) {
    Val s = sum_of(xs);
    return scale(s, 1.0 / static_cast<double>(xs.size()));
}

Val Tape::sum_of(std::span<const Val> xs) {
    if (xs.empty()) fail("sum_of: empty batch rejected");
    Val acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
}

Val Tape::clamp01(Val x, double lo, double hi) {
    // max(lo, min(x, hi)) built from Max0: lo + max0(x - lo) capped at hi
    Val lifted = add(max0(sub(x, scalar(lo))), scalar(lo));
    return sub(scalar(hi), max0(sub(scalar(hi), lifted)));
}

Array& Tape::grad_buf(int32_t id) {
    NodeRec& n = nodes_[id];
    if (n.grad.v.empty()) n.grad = Array(n.value.rows, n.value.cols);
    return n.grad;
}

GradientMap Tape::backward(Val loss) {
    if (backward_done_) fail("Tape: backward called twice without reset");
    const NodeRec& ln = node_at(loss);
    if (!ln.value.is_scalar())
        fail("backward: loss must be scalar, got " + ln.value.shape_str());
    backward_done_ = true;

    grad_buf(loss.id).v[0] = 1.0;

    // Creation order is a topological order, so one reverse sweep suffices.
    for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
        NodeRec& n = nodes_[id];
        if (n.grad.v.empty()) continue;
        if (n.op == Op::Leaf || n.op == Op::Constant) continue;
        backprop_node(n);
    }

    GradientMap out;
    if (store_) {
        for (const auto& [name, arr] : store_->all()) {
            auto it = param_lookup_.find(name);
            if (it != param_lookup_.end() && !nodes_[it->second].grad.v.empty())
                out.g.emplace(name, nodes_[it->second].grad);
            else
                out.g.emplace(name, Array(arr.rows, arr.cols));
        }
    }
    return out;
}

void Tape::backprop_node(NodeRec& n) {
    const Array& g = n.grad;
    auto inv = [&](int i) -> const Array& { return nodes_[n.in[i]].value; };

    switch (n.op) {
        case Op::MatMul: {
            const Array &a = inv(0), &b = inv(1);
            Array& da = grad_buf(n.in[0]);
            Array& db = grad_buf(n.in[1]);
            if (b.cols == 1) {  // matrix-vector fast path: dA += g x^T, dx += A^T g
                for (int i = 0; i < a.rows; ++i) {
                    const double gi = g.v[i];
                    if (gi == 0.0) continue;
                    const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
                    double* darow = &da.v[static_cast<size_t>(i) * da.cols];
                    for (int k = 0; k < a.cols; ++k) {
                        darow[k] += gi * b.v[k];
                        db.v[k] += gi * arow[k];
                    }
                }
                break;
            }
            for (int i = 0; i < a.rows; ++i) {
                const double* grow = &g.v[static_cast<size_t>(i) * g.cols];
                double* darow = &da.v[static_cast<size_t>(i) * da.cols];
                for (int k = 0; k < a.cols; ++k) {
                    const double* brow = &b.v[static_cast<size_t>(k) * b.cols];
                    double s = 0.0;
                    for (int j = 0; j < b.cols; ++j) s += grow[j] * brow[j];
                    darow[k] += s;
                }
            }
            for (int i = 0; i < a.rows; ++i) {
                const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
                const double* grow = &g.v[static_cast<size_t>(i) * g.cols];
                for (int k = 0; k < b.rows; ++k) {
                    const double aik = arow[k];
                    if (aik == 0.0) continue;
                    double* dbrow = &db.v[static_cast<size_t>(k) * db.cols];
                    for (int j = 0; j < b.cols; ++j) dbrow[j] += aik * grow[j];
                }
            }
            break;
        }
        case Op::Add:
        case Op::Sub: {
            const double sgn = n.op == Op::Sub ? -1.0 : 1.0;
            for (int side = 0; side < 2; ++side) {
                const Array& x = inv(side);
                Array& dx = grad_buf(n.in[side]);
                const double f = side == 0 ? 1.0 : sgn;
                if (x.is_scalar() && !g.is_scalar()) {
                    double s = 0.0;
                    for (double gv : g.v) s += gv;
                    dx.v[0] += f * s;
                } else {
                    for (size_t i = 0; i < g.v.size(); ++i) dx.v[i] += f * g.v[i];
                }
            }
            break;
        }
        case Op::Mul: {
            const Array &a = inv(0), &b = inv(1);
            {
                Array& da = grad_buf(n.in[0]);
                if (a.is_scalar() && !b.is_scalar()) {
                    double s = 0.0;
                    for (size_t i = 0; i < g.v.size(); ++i) s += g.v[i] * b.v[i];
                    da.v[0] += s;
                } else {
                    for (size_t i = 0; i < g.v.size(); ++i)
                        da.v[i] += g.v[i] * (b.is_scalar() ? b.v[0] : b.v[i]);
                }
            }
            {
                Array& db = grad_buf(n.in[1]);
                if (b.is_scalar() && !a.is_scalar()) {
                    double s = 0.0;
                    for (size_t i = 0; i < g.v.size(); ++i) s += g.v[i] * a.v[i];
                    db.v[0] += s;
                } else {
                    for (size_t i = 0; i < g.v.size(); ++i)
                        db.v[i] += g.v[i] * (a.is_scalar() ? a.v[0] : a.v[i]);
                }
            }
            break;
        }
        case Op::Scale: {
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i) da.v[i] += n.attrs.scale * g.v[i];
            break;
        }
        case Op::Concat: {
            size_t off = 0;
            for (int i = 0; i < n.n_in; ++i) {
                Array& dx = grad_buf(n.in[i]);
                for (size_t k = 0; k < dx.v.size(); ++k) dx.v[k] += g.v[off + k];
                off += dx.v.size();
            }
            break;
        }
        case Op::Slice: {
            Array& da = grad_buf(n.in[0]);
            const auto& at = n.attrs;
            for (int i = 0; i < at.n_rows; ++i)
                for (int j = 0; j < at.n_cols; ++j)
                    da.at(at.row_off + i, at.col_off + j) += g.at(i, j);
            break;
        }
        case Op::Abs: {
            const Array& a = inv(0);
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i)
                da.v[i] += g.v[i] * (a.v[i] > 0.0 ? 1.0 : a.v[i] < 0.0 ? -1.0 : 0.0);
            break;
        }
        case Op::Tanh: {
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i)
                da.v[i] += g.v[i] * (1.0 - n.value.v[i] * n.value.v[i]);
            break;
        }
        case Op::Logistic: {
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i) {
                const double s = n.value.v[i];
                da.v[i] += g.v[i] * s * (1.0 - s);
            }
            break;
        }
        case Op::LeakyRelu: {
            const Array& a = inv(0);
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i)
                da.v[i] += g.v[i] * (a.v[i] > 0.0 ? 1.0 : n.attrs.slope);
            break;
        }
        case Op::Softmax: {
            const Array& y = n.value;
            Array& da = grad_buf(n.in[0]);
            double s = 0.0;
            for (size_t i = 0; i < y.v.size(); ++i) s += g.v[i] * y.v[i];
            const double invT = 1.0 / n.attrs.temperature;
            for (size_t i = 0; i < y.v.size(); ++i)
                da.v[i] += invT * y.v[i] * (g.v[i] - s);
            break;
        }
        case Op::L2Norm: {
            const Array& x = inv(0);
            Array& dx = grad_buf(n.in[0]);
            const double nn = x.l2_norm();
            const double s = nn + kNormEps;
            double xg = 0.0;
            for (size_t i = 0; i < x.v.size(); ++i) xg += x.v[i] * g.v[i];
            for (size_t i = 0; i < x.v.size(); ++i) {
                double d = g.v[i] / s;
                if (nn > 0.0) d -= x.v[i] * xg / (s * s * nn);
                dx.v[i] += d;
            }
            break;
        }
        case Op::Cosine: {
            const Array &a = inv(0), &b = inv(1);
            const double gs = g.v[0];
            const double na = a.l2_norm(), nb = b.l2_norm();
            const double sa = na + kNormEps, sb = nb + kNormEps;
            const double den = sa * sb;
            const double S = dot_flat(a, b);
            Array& da = grad_buf(n.in[0]);
            Array& db = grad_buf(n.in[1]);
            for (size_t i = 0; i < a.v.size(); ++i) {
                double d = b.v[i] / den;
                if (na > 0.0) d -= S * sb * a.v[i] / (na * den * den);
                da.v[i] += gs * d;
            }
            for (size_t i = 0; i < b.v.size(); ++i) {
                double d = a.v[i] / den;
                if (nb > 0.0) d -= S * sa * b.v[i] / (nb * den * den);
                db.v[i] += gs * d;
            }
            break;
        }
        case Op::Dot: {
            const Array &a = inv(0), &b = inv(1);
            const double gs = g.v[0];
            Array& da = grad_buf(n.in[0]);
            Array& db = grad_buf(n.in[1]);
            for (size_t i = 0; i < a.v.size(); ++i) {
                da.v[i] += gs * b.v[i];
                db.v[i] += gs * a.v[i];
            }
            break;
        }
        case Op::Mean: {
            Array& da = grad_buf(n.in[0]);
            const double gs = g.v[0] / static_cast<double>(da.v.size());
            for (double& x : da.v) x += gs;
            break;
        }
        case Op::Sum: {
            Array& da = grad_buf(n.in[0]);
            const double gs = g.v[0];
            for (double& x : da.v) x += gs;
            break;
        }
        case Op::Log: {
            const Array& a = inv(0);
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i] / a.v[i];
            break;
        }
        case Op::Max0: {
            const Array& a = inv(0);
            Array& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.v.size(); ++i)
                da.v[i] += g.v[i] * (a.v[i] > 0.0 ? 1.0 : 0.0);
            break;
        }
        default:
            break;
    }
}

void Tape::reset() {
    nodes_.clear();
    params_.clear();
    param_lookup_.clear();
    store_ = nullptr;
    backward_done_ = false;
}

}  // namespace prism
