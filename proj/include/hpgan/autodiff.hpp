#pragma once

// Reverse-mode automatic differentiation over dense f64 tensors.
//
// Forward evaluation is eager: every op computes its output tensor at
// construction and records a graph node. backward() walks the graph in
// reverse topological order and *emits the gradient expressions as graph
// nodes*, so gradients are themselves differentiable. That is what lets the
// gradient-penalty scalar, built on top of input_gradient(), be
// differentiated once more with respect to the critic weights.
//
// Second-order tracking is opt-in via SecondOrderScope; input_gradient()
// refuses to run on graphs built outside such a scope.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hpgan/common.hpp"
#include "hpgan/tensor.hpp"

namespace hpgan {

enum class Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    Sqrt,
    Square,
    Abs,
    Log,
    Exp,
    Sigmoid,
    Tanh,
    LeakyRelu,
    MaxConst,
    Clamp,
    Sum,
    Mean,
    Broadcast,
    Reshape,
    Concat,
    Slice,
    MatMul,
    Transpose,
    MatVec,
    MatVecT,
    Outer,
    Norm,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "subtract";
        case Op::Mul: return "multiply";
        case Op::Div: return "divide";
        case Op::Scale: return "scalar-multiply";
        case Op::Sqrt: return "sqrt";
        case Op::Square: return "square";
        case Op::Abs: return "abs";
        case Op::Log: return "logarithm";
        case Op::Exp: return "exp";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::LeakyRelu: return "leaky-relu";
        case Op::MaxConst: return "maximum-with-constant";
        case Op::Clamp: return "clamp";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Broadcast: return "broadcast";
        case Op::Reshape: return "reshape";
        case Op::Concat: return "concat-last-axis";
        case Op::Slice: return "slice";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::MatVec: return "matvec";
        case Op::MatVecT: return "matvec-transposed";
        case Op::Outer: return "outer";
        case Op::Norm: return "euclidean-norm";
    }
    return "?";
}

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Op op = Op::Leaf;
    std::vector<NodePtr> inputs;
    Tensor value;
    bool requires_grad = false;
    bool second_order = false;
    std::string name;          // leaf parameter name, empty otherwise
    double c0 = 0.0, c1 = 0.0; // scalar payload (scale factor, clamp bounds, ...)
    std::size_t i0 = 0;        // slice start

    ~Node() {
        // Iterative teardown; recursive shared_ptr destruction would blow the
        // stack on long autoregressive chains.
        std::vector<NodePtr> stack;
        for (auto& in : inputs)
            if (in && in.use_count() == 1) stack.push_back(std::move(in));
        inputs.clear();
        while (!stack.empty()) {
            NodePtr n = std::move(stack.back());
            stack.pop_back();
            for (auto& in : n->inputs)
                if (in && in.use_count() == 1) stack.push_back(std::move(in));
            n->inputs.clear();
        }
    }
};

namespace detail {
inline thread_local int second_order_depth = 0;
}

// RAII guard enabling second-order tracking for graph nodes built inside it.
class SecondOrderScope {
public:
    SecondOrderScope() { ++detail::second_order_depth; }
    ~SecondOrderScope() { --detail::second_order_depth; }
    SecondOrderScope(const SecondOrderScope&) = delete;
    SecondOrderScope& operator=(const SecondOrderScope&) = delete;
};

class Value {
public:
    Value() = default;
    explicit Value(NodePtr n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const NodePtr& node() const { return node_; }
    Node* raw() const { return node_.get(); }

    const Tensor& tensor() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    double item() const { return node_->value.scalar_value(); }

private:
    NodePtr node_;
};

inline Value leaf(Tensor t, bool requires_grad = false, std::string name = "") {
    auto n = std::make_shared<Node>();
    n->op = Op::Leaf;
    n->value = std::move(t);
    n->requires_grad = requires_grad;
    n->second_order = detail::second_order_depth > 0;
    n->name = std::move(name);
    return Value(std::move(n));
}

inline Value constant(Tensor t) { return leaf(std::move(t), false); }
inline Value constant(double v) { return leaf(Tensor::scalar(v), false); }

namespace detail {

inline Value make_node(Op op, std::vector<NodePtr> inputs, Tensor value, double c0 = 0.0, double c1 = 0.0,
                       std::size_t i0 = 0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->inputs = std::move(inputs);
    n->value = std::move(value);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    n->second_order = second_order_depth > 0;
    for (const auto& in : n->inputs)
        if (in->second_order) n->second_order = true;
    n->c0 = c0;
    n->c1 = c1;
    n->i0 = i0;
    return Value(std::move(n));
}

inline void require_same_shape(Op op, const Value& a, const Value& b) {
    if (a.shape() != b.shape())
        throw ShapeError(strfmt("%s: shape mismatch %s vs %s", op_name(op), shape_str(a.shape()).c_str(),
                                shape_str(b.shape()).c_str()));
}

inline void require_defined(const Value& v, const char* who) {
    if (!v.defined()) throw ShapeError(strfmt("%s: undefined value", who));
}

template <class F>
Tensor elementwise2(const Tensor& a, const Tensor& b, F&& f) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
    return Tensor(a.shape(), std::move(out));
}

template <class F>
Tensor elementwise1(const Tensor& a, F&& f) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
    return Tensor(a.shape(), std::move(out));
}

}  // namespace detail

// ---- elementwise binary ----

inline Value add(const Value& a, const Value& b) {
    detail::require_same_shape(Op::Add, a, b);
    return detail::make_node(Op::Add, {a.node(), b.node()},
                             detail::elementwise2(a.tensor(), b.tensor(), [](double x, double y) { return x + y; }));
}

inline Value sub(const Value& a, const Value& b) {
    detail::require_same_shape(Op::Sub, a, b);
    return detail::make_node(Op::Sub, {a.node(), b.node()},
                             detail::elementwise2(a.tensor(), b.tensor(), [](double x, double y) { return x - y; }));
}

inline Value mul(const Value& a, const Value& b) {
    detail::require_same_shape(Op::Mul, a, b);
    return detail::make_node(Op::Mul, {a.node(), b.node()},
                             detail::elementwise2(a.tensor(), b.tensor(), [](double x, double y) { return x * y; }));
}

inline Value div(const Value& a, const Value& b) {
    detail::require_same_shape(Op::Div, a, b);
    return detail::make_node(Op::Div, {a.node(), b.node()},
                             detail::elementwise2(a.tensor(), b.tensor(), [](double x, double y) { return x / y; }));
}

// ---- elementwise unary ----

inline Value scale(const Value& a, double c) {
    return detail::make_node(Op::Scale, {a.node()}, detail::elementwise1(a.tensor(), [c](double x) { return c * x; }),
                             c);
}

inline Value vsqrt(const Value& a) {
    for (const double x : a.tensor().data())
        if (x < 0.0) throw NumericError("sqrt: negative input");
    return detail::make_node(Op::Sqrt, {a.node()},
                             detail::elementwise1(a.tensor(), [](double x) { return std::sqrt(x); }));
}

inline Value square(const Value& a) {
    return detail::make_node(Op::Square, {a.node()},
                             detail::elementwise1(a.tensor(), [](double x) { return x * x; }));
}

inline Value vabs(const Value& a) {
    return detail::make_node(Op::Abs, {a.node()},
                             detail::elementwise1(a.tensor(), [](double x) { return std::fabs(x); }));
}

inline Value vlog(const Value& a) {
    for (const double x : a.tensor().data())
        if (x <= 0.0) throw NumericError(strfmt("logarithm: domain error, input %.17g is not positive", x));
    return detail::make_node(Op::Log, {a.node()},
                             detail::elementwise1(a.tensor(), [](double x) { return std::log(x); }));
}

inline Value vexp(const Value& a) {
    return detail::make_node(Op::Exp, {a.node()},
                             detail::elementwise1(a.tensor(), [](double x) { return std::exp(x); }));
}

inline Value sigmoid(const Value& a) {
    return detail::make_node(Op::Sigmoid, {a.node()}, detail::elementwise1(a.tensor(), [](double x) {
                                 return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                             }));
}

inline Value vtanh(const Value& a) {
    return detail::make_node(Op::Tanh, {a.node()},
                             detail::elementwise1(a.tensor(), [](double x) { return std::tanh(x); }));
}

inline Value leaky_relu(const Value& a, double slope = 0.2) {
    return detail::make_node(Op::LeakyRelu, {a.node()},
                             detail::elementwise1(a.tensor(), [slope](double x) { return x > 0.0 ? x : slope * x; }),
                             slope);
}

inline Value max_const(const Value& a, double c) {
    return detail::make_node(Op::MaxConst, {a.node()},
                             detail::elementwise1(a.tensor(), [c](double x) { return x > c ? x : c; }), c);
}

inline Value clamp(const Value& a, double lo, double hi) {
    return detail::make_node(
        Op::Clamp, {a.node()},
        detail::elementwise1(a.tensor(), [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); }), lo, hi);
}

// ---- reductions and shape ----

inline Value sum(const Value& a) {
    double s = 0.0;
    for (const double x : a.tensor().data()) s += x;
    return detail::make_node(Op::Sum, {a.node()}, Tensor::scalar(s));
}

inline Value mean(const Value& a) {
    double s = 0.0;
    for (const double x : a.tensor().data()) s += x;
    return detail::make_node(Op::Mean, {a.node()}, Tensor::scalar(s / static_cast<double>(a.numel())));
}

inline Value broadcast(const Value& scalar, Shape shape) {
    if (!scalar.tensor().is_scalar())
        throw ShapeError(strfmt("broadcast: input %s is not scalar", shape_str(scalar.shape()).c_str()));
    const double v = scalar.tensor().scalar_value();
    return detail::make_node(Op::Broadcast, {scalar.node()}, Tensor::full(std::move(shape), v));
}

inline Value reshape(const Value& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError(strfmt("reshape: %s has %zu values, target %s needs %zu",
                                shape_str(a.shape()).c_str(), a.numel(), shape_str(shape).c_str(),
                                shape_numel(shape)));
    return detail::make_node(Op::Reshape, {a.node()}, Tensor(std::move(shape), a.tensor().data()));
}

inline Value flatten(const Value& a) { return reshape(a, {a.numel()}); }

// Euclidean norm over all entries; subgradient 0 at the origin.
inline Value norm(const Value& a) {
    double s = 0.0;
    for (const double x : a.tensor().data()) s += x * x;
    return detail::make_node(Op::Norm, {a.node()}, Tensor::scalar(std::sqrt(s)));
}

// ---- concatenation / slicing along the last axis ----

inline Value concat(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat-last-axis: no inputs");
    const Shape& first = parts[0].shape();
    if (first.empty()) throw ShapeError("concat-last-axis: rank-0 input");
    Shape lead(first.begin(), first.end() - 1);
    std::size_t last_total = 0;
    for (const Value& p : parts) {
        const Shape& s = p.shape();
        if (s.empty() || Shape(s.begin(), s.end() - 1) != lead)
            throw ShapeError(strfmt("concat-last-axis: shape mismatch %s vs %s", shape_str(first).c_str(),
                                    shape_str(s).c_str()));
        last_total += s.back();
    }
    Shape out_shape = lead;
    out_shape.push_back(last_total);
    std::vector<double> out(shape_numel(out_shape));
    const std::size_t lead_n = shape_numel(lead);
    std::size_t offset = 0;
    for (const Value& p : parts) {
        const std::size_t w = p.shape().back();
        for (std::size_t r = 0; r < lead_n; ++r)
            for (std::size_t c = 0; c < w; ++c) out[r * last_total + offset + c] = p.tensor()[r * w + c];
        offset += w;
    }
    std::vector<NodePtr> ins;
    ins.reserve(parts.size());
    for (const Value& p : parts) ins.push_back(p.node());
    return detail::make_node(Op::Concat, std::move(ins), Tensor(std::move(out_shape), std::move(out)));
}

inline Value slice(const Value& a, std::size_t start, std::size_t len) {
    const Shape& s = a.shape();
    if (s.empty()) throw ShapeError("slice: rank-0 input");
    const std::size_t last = s.back();
    if (start + len > last || len == 0)
        throw ShapeError(strfmt("slice: range [%zu,%zu) out of %s", start, start + len, shape_str(s).c_str()));
    Shape out_shape(s.begin(), s.end() - 1);
    out_shape.push_back(len);
    const std::size_t lead_n = shape_numel(Shape(s.begin(), s.end() - 1));
    std::vector<double> out(lead_n * len);
    for (std::size_t r = 0; r < lead_n; ++r)
        for (std::size_t c = 0; c < len; ++c) out[r * len + c] = a.tensor()[r * last + start + c];
    return detail::make_node(Op::Slice, {a.node()}, Tensor(std::move(out_shape), std::move(out)), 0.0, 0.0, start);
}

// ---- linear algebra ----

inline Value matmul(const Value& a, const Value& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError(strfmt("matmul: shape mismatch %s vs %s", shape_str(a.shape()).c_str(),
                                shape_str(b.shape()).c_str()));
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    std::vector<double> out(n * m, 0.0);
    const auto& av = a.tensor().data();
    const auto& bv = b.tensor().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            const double aik = av[i * k + t];
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aik * bv[t * m + j];
        }
    return detail::make_node(Op::MatMul, {a.node(), b.node()}, Tensor({n, m}, std::move(out)));
}

inline Value transpose(const Value& a) {
    if (a.shape().size() != 2)
        throw ShapeError(strfmt("transpose: expected rank-2, got %s", shape_str(a.shape()).c_str()));
    const std::size_t n = a.shape()[0], m = a.shape()[1];
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.tensor()[i * m + j];
    return detail::make_node(Op::Transpose, {a.node()}, Tensor({m, n}, std::move(out)));
}

// W [r,c] times x [c] -> [r]
inline Value matvec(const Value& w, const Value& x) {
    if (w.shape().size() != 2 || x.shape().size() != 1 || w.shape()[1] != x.shape()[0])
        throw ShapeError(strfmt("matvec: shape mismatch %s vs %s", shape_str(w.shape()).c_str(),
                                shape_str(x.shape()).c_str()));
    const std::size_t r = w.shape()[0], c = w.shape()[1];
    std::vector<double> out(r, 0.0);
    const auto& wv = w.tensor().data();
    const auto& xv = x.tensor().data();
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += wv[i * c + j] * xv[j];
        out[i] = s;
    }
    return detail::make_node(Op::MatVec, {w.node(), x.node()}, Tensor({r}, std::move(out)));
}

// W [r,c]^T times y [r] -> [c]
inline Value matvec_t(const Value& w, const Value& y) {
    if (w.shape().size() != 2 || y.shape().size() != 1 || w.shape()[0] != y.shape()[0])
        throw ShapeError(strfmt("matvec-transposed: shape mismatch %s vs %s", shape_str(w.shape()).c_str(),
                                shape_str(y.shape()).c_str()));
    const std::size_t r = w.shape()[0], c = w.shape()[1];
    std::vector<double> out(c, 0.0);
    const auto& wv = w.tensor().data();
    const auto& yv = y.tensor().data();
    for (std::size_t i = 0; i < r; ++i) {
        const double yi = yv[i];
        for (std::size_t j = 0; j < c; ++j) out[j] += wv[i * c + j] * yi;
    }
    return detail::make_node(Op::MatVecT, {w.node(), y.node()}, Tensor({c}, std::move(out)));
}

// u [r] v [c]^T -> [r,c]
inline Value outer(const Value& u, const Value& v) {
    if (u.shape().size() != 1 || v.shape().size() != 1)
        throw ShapeError(strfmt("outer: expected rank-1 inputs, got %s and %s", shape_str(u.shape()).c_str(),
                                shape_str(v.shape()).c_str()));
    const std::size_t r = u.shape()[0], c = v.shape()[0];
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = u.tensor()[i] * v.tensor()[j];
    return detail::make_node(Op::Outer, {u.node(), v.node()}, Tensor({r, c}, std::move(out)));
}

// operator sugar for the elementwise ops
inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }

// ---- backward ----

using GradientMap = std::map<std::string, Tensor>;

namespace detail {

inline Value wrap(const NodePtr& n) { return Value(n); }

// Per-op backward rule: given node n and output gradient g (a Value of n's
// shape), emit gradient Values for each input (undefined Value = no grad).
inline std::vector<Value> backward_rule(const NodePtr& n, const Value& g) {
    const Value out = wrap(n);
    auto in = [&](std::size_t i) { return wrap(n->inputs[i]); };
    switch (n->op) {
        case Op::Leaf: return {};
        case Op::Add: return {g, g};
        case Op::Sub: return {g, scale(g, -1.0)};
        case Op::Mul: return {mul(g, in(1)), mul(g, in(0))};
        case Op::Div: {
            // d(a/b): da = g/b, db = -g*a/b^2 = -g*out/b
            Value da = div(g, in(1));
            Value db = scale(div(mul(g, out), in(1)), -1.0);
            return {da, db};
        }
        case Op::Scale: return {scale(g, n->c0)};
        case Op::Sqrt: return {div(g, scale(out, 2.0))};
        case Op::Square: return {mul(g, scale(in(0), 2.0))};
        case Op::Abs: {
            Tensor mask = elementwise1(n->inputs[0]->value,
                                       [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
            return {mul(g, constant(std::move(mask)))};
        }
        case Op::Log: return {div(g, in(0))};
        case Op::Exp: return {mul(g, out)};
        case Op::Sigmoid: {
            Value one = constant(Tensor::ones(out.shape()));
            return {mul(g, mul(out, sub(one, out)))};
        }
        case Op::Tanh: {
            Value one = constant(Tensor::ones(out.shape()));
            return {mul(g, sub(one, mul(out, out)))};
        }
        case Op::LeakyRelu: {
            const double slope = n->c0;
            Tensor mask = elementwise1(n->inputs[0]->value, [slope](double x) { return x > 0.0 ? 1.0 : slope; });
            return {mul(g, constant(std::move(mask)))};
        }
        case Op::MaxConst: {
            const double c = n->c0;
            Tensor mask = elementwise1(n->inputs[0]->value, [c](double x) { return x > c ? 1.0 : 0.0; });
            return {mul(g, constant(std::move(mask)))};
        }
        case Op::Clamp: {
            const double lo = n->c0, hi = n->c1;
            Tensor mask =
                elementwise1(n->inputs[0]->value, [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
            return {mul(g, constant(std::move(mask)))};
        }
        case Op::Sum: return {broadcast(g, n->inputs[0]->value.shape())};
        case Op::Mean:
            return {broadcast(scale(g, 1.0 / static_cast<double>(n->inputs[0]->value.numel())),
                              n->inputs[0]->value.shape())};
        case Op::Broadcast: return {reshape(sum(g), n->inputs[0]->value.shape())};
        case Op::Reshape: return {reshape(g, n->inputs[0]->value.shape())};
        case Op::Concat: {
            std::vector<Value> grads;
            grads.reserve(n->inputs.size());
            std::size_t off = 0;
            for (const auto& input : n->inputs) {
                const std::size_t w = input->value.shape().back();
                grads.push_back(slice(g, off, w));
                off += w;
            }
            return grads;
        }
        case Op::Slice: {
            // adjoint of slice = concat with zero padding around g
            const Shape& in_shape = n->inputs[0]->value.shape();
            const std::size_t last = in_shape.back();
            const std::size_t start = n->i0;
            const std::size_t len = n->value.shape().back();
            Shape lead(in_shape.begin(), in_shape.end() - 1);
            std::vector<Value> parts;
            if (start > 0) {
                Shape s = lead;
                s.push_back(start);
                parts.push_back(constant(Tensor::zeros(std::move(s))));
            }
            parts.push_back(g);
            if (start + len < last) {
                Shape s = lead;
                s.push_back(last - start - len);
                parts.push_back(constant(Tensor::zeros(std::move(s))));
            }
            return {parts.size() == 1 ? g : concat(parts)};
        }
        case Op::MatMul: return {matmul(g, transpose(in(1))), matmul(transpose(in(0)), g)};
        case Op::Transpose: return {transpose(g)};
        case Op::MatVec: return {outer(g, in(1)), matvec_t(in(0), g)};
        case Op::MatVecT: return {outer(in(1), g), matvec(in(0), g)};
        case Op::Outer: return {matvec(g, in(1)), matvec_t(g, in(0))};
        case Op::Norm: {
            if (n->value.scalar_value() > 0.0) {
                Value ratio = div(g, out);
                return {mul(broadcast(ratio, n->inputs[0]->value.shape()), in(0))};
            }
            return {constant(Tensor::zeros(n->inputs[0]->value.shape()))};
        }
    }
    return {};
}

// Reverse topological order (as shared_ptrs) of the grad-requiring subgraph
// reachable from root. Iterative DFS; input order fixes the ordering, so
// evaluation is deterministic.
inline std::vector<NodePtr> topo_order(const NodePtr& root) {
    std::vector<NodePtr> order;
    if (!root->requires_grad) return order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->inputs.size()) {
            const NodePtr& in = node->inputs[next];
            ++next;
            if (in->requires_grad && !visited.count(in.get())) {
                visited.insert(in.get());
                stack.emplace_back(in, 0);
                descended = true;
                break;
            }
        }
        if (!descended) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }
    return order;
}

inline void require_scalar_root(const Value& root, const char* who) {
    require_defined(root, who);
    if (!root.tensor().is_scalar())
        throw ShapeError(strfmt("%s: root must be scalar, got %s", who, shape_str(root.shape()).c_str()));
}

// Core engine: gradients of root with respect to every grad-requiring node,
// expressed as graph Values.
inline std::unordered_map<Node*, Value> backward_values(const Value& root) {
    require_scalar_root(root, "backward");
    std::unordered_map<Node*, Value> grads;
    if (!root.requires_grad()) return grads;
    const std::vector<NodePtr> order = topo_order(root.node());
    grads[root.raw()] = constant(Tensor::ones(root.shape()));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodePtr& n = *it;
        auto gi = grads.find(n.get());
        if (gi == grads.end()) continue;
        if (n->op == Op::Leaf) continue;
        const Value g = gi->second;
        const std::vector<Value> input_grads = backward_rule(n, g);
        for (std::size_t i = 0; i < input_grads.size(); ++i) {
            const NodePtr& in = n->inputs[i];
            if (!in->requires_grad || !input_grads[i].defined()) continue;
            if (input_grads[i].shape() != in->value.shape())
                throw ShapeError(strfmt("backward: %s gradient shape %s vs value shape %s", op_name(n->op),
                                        shape_str(input_grads[i].shape()).c_str(),
                                        shape_str(in->value.shape()).c_str()));
            auto found = grads.find(in.get());
            if (found == grads.end())
                grads.emplace(in.get(), input_grads[i]);
            else
                found->second = add(found->second, input_grads[i]);
        }
    }
    return grads;
}

}  // namespace detail

// Gradients of a scalar root with respect to the given leaf parameters, in
// the same order. Parameters absent from the graph get zero tensors.
inline std::vector<Tensor> backward_list(const Value& root, const std::vector<Value>& wrt) {
    detail::require_scalar_root(root, "backward");
    auto grads = detail::backward_values(root);
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const Value& p : wrt) {
        detail::require_defined(p, "backward");
        auto it = grads.find(p.raw());
        out.push_back(it == grads.end() ? Tensor::zeros(p.shape()) : it->second.tensor());
    }
    return out;
}

// Same, keyed by leaf name. Every requested leaf must carry a unique name.
inline GradientMap backward(const Value& root, const std::vector<Value>& wrt) {
    const std::vector<Tensor> list = backward_list(root, wrt);
    GradientMap out;
    for (std::size_t i = 0; i < wrt.size(); ++i) {
        const std::string& key = wrt[i].raw()->name;
        if (key.empty()) throw ShapeError("backward: parameter leaf has no name");
        if (!out.emplace(key, list[i]).second) throw ShapeError(strfmt("backward: duplicate parameter '%s'", key.c_str()));
    }
    return out;
}

// Gradient of a scalar root with respect to an input tensor, returned as a
// graph Value so losses built on it stay differentiable (second order).
// Requires the graph to have been built inside a SecondOrderScope.
inline Value input_gradient(const Value& root, const Value& wrt_input) {
    detail::require_scalar_root(root, "input_gradient");
    detail::require_defined(wrt_input, "input_gradient");
    if (!root.raw()->second_order || !wrt_input.raw()->second_order)
        throw NumericError("input_gradient: second-order mode not enabled (build the graph inside a SecondOrderScope)");
    auto grads = detail::backward_values(root);
    auto it = grads.find(wrt_input.raw());
    if (it == grads.end()) return constant(Tensor::zeros(wrt_input.shape()));
    return it->second;
}

// First node (in evaluation order) holding a non-finite value, if any.
// Used for abort diagnostics.
inline std::string first_nonfinite(const Value& root) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.raw());
    std::string found;
    // post-order visit so producers are reported before consumers
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->inputs.size()) {
            const NodePtr& in = node->inputs[next];
            ++next;
            if (!visited.count(in.get())) {
                visited.insert(in.get());
                stack.emplace_back(in, 0);
                descended = true;
                break;
            }
        }
        if (!descended) {
            const NodePtr& n = stack.back().first;
            if (found.empty() && !n->value.all_finite())
                found = n->name.empty() ? strfmt("%s node", op_name(n->op))
                                        : strfmt("%s node '%s'", op_name(n->op), n->name.c_str());
            stack.pop_back();
        }
    }
    return found;
}

// Central-difference check of the analytic gradient of f at params.
// Returns the worst relative error over all coordinates, with denominator
// max(|analytic|, |numeric|, 1e-12).
inline double finite_difference_check(const std::function<Value(const std::vector<Value>&)>& f,
                                      const std::vector<Tensor>& params, double h,
                                      const std::vector<Tensor>* analytic_override = nullptr) {
    if (h <= 0.0) throw NumericError("finite_difference_check: h must be positive");
    std::vector<Value> leaves;
    leaves.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) leaves.push_back(leaf(params[i], true, "fd_p" + std::to_string(i)));
    const Value root = f(leaves);
    if (!root.tensor().is_scalar())
        throw ShapeError(strfmt("finite_difference_check: f must be scalar-valued, got %s",
                                shape_str(root.shape()).c_str()));
    std::vector<Tensor> analytic;
    if (analytic_override) {
        analytic = *analytic_override;
    } else {
        analytic = backward_list(root, leaves);
    }
    auto eval = [&](const std::vector<Tensor>& p) {
        std::vector<Value> ls;
        ls.reserve(p.size());
        for (const Tensor& t : p) ls.push_back(leaf(t, false));
        return f(ls).item();
    };
    double worst = 0.0;
    std::vector<Tensor> work = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t i = 0; i < params[pi].numel(); ++i) {
            const double orig = work[pi][i];
            const double xp = orig + h, xm = orig - h;
            work[pi][i] = xp;
            const double fp = eval(work);
            work[pi][i] = xm;
            const double fm = eval(work);
            work[pi][i] = orig;
            // divide by the realized spread, not 2h, to cancel step rounding
            const double numeric = (fp - fm) / (xp - xm);
            const double a = analytic[pi][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return worst;
}

// Norm-relative variant: ‖g_numeric − g_analytic‖₂ / max(‖g_numeric‖₂,
// ‖g_analytic‖₂, 1e-12) over the concatenation of all parameters. Preferred
// for deep composite losses, where individual gradient entries can vanish
// and make the per-coordinate relative error pure rounding noise.
inline double finite_difference_check_norm(const std::function<Value(const std::vector<Value>&)>& f,
                                           const std::vector<Tensor>& params, double h) {
    if (h <= 0.0) throw NumericError("finite_difference_check_norm: h must be positive");
    std::vector<Value> leaves;
    leaves.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) leaves.push_back(leaf(params[i], true, "fd_p" + std::to_string(i)));
    const Value root = f(leaves);
    if (!root.tensor().is_scalar())
        throw ShapeError(strfmt("finite_difference_check_norm: f must be scalar-valued, got %s",
                                shape_str(root.shape()).c_str()));
    const std::vector<Tensor> analytic = backward_list(root, leaves);
    auto eval = [&](const std::vector<Tensor>& p) {
        std::vector<Value> ls;
        ls.reserve(p.size());
        for (const Tensor& t : p) ls.push_back(leaf(t, false));
        return f(ls).item();
    };
    double diff2 = 0.0, an2 = 0.0, num2 = 0.0;
    std::vector<Tensor> work = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t i = 0; i < params[pi].numel(); ++i) {
            const double orig = work[pi][i];
            const double xp = orig + h, xm = orig - h;
            work[pi][i] = xp;
            const double fp = eval(work);
            work[pi][i] = xm;
            const double fm = eval(work);
            work[pi][i] = orig;
            const double numeric = (fp - fm) / (xp - xm);
            const double a = analytic[pi][i];
            diff2 += (a - numeric) * (a - numeric);
            an2 += a * a;
            num2 += numeric * numeric;
        }
    }
    return std::sqrt(diff2) / std::max({std::sqrt(an2), std::sqrt(num2), 1e-12});
}

}  // namespace hpgan
