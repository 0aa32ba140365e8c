#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simaml/errors.hpp"

namespace simaml {

using Matrix = Eigen::MatrixXd;

class Tensor;

namespace autodiff {

// Thread-local recording switch. Backward passes run with recording off
// unless a second differentiation is requested.
inline thread_local bool g_recording = true;
inline thread_local std::uint64_t g_sequence = 0;

struct Node {
    Matrix value;
    bool requires_grad = false;
    bool twice_differentiable = true;
    const char* op = "leaf";
    std::uint64_t seq = 0;
    std::vector<Tensor> parents;
    // upstream gradient -> one gradient per parent (undefined entries allowed
    // for parents that do not require grad)
    std::function<std::vector<Tensor>(const Tensor&)> vjp;
};

struct NoGradGuard {
    bool saved;
    NoGradGuard() : saved(g_recording) { g_recording = false; }
    ~NoGradGuard() { g_recording = saved; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline void check(bool cond, const char* what) {
    if (!cond) throw std::logic_error(std::string("tensor shape error: ") + what);
}

}  // namespace autodiff

// Dense f64 matrix with reverse-mode gradient linkage. Value semantics over a
// shared node; ops build the backward graph only while recording is on and
// some input requires a gradient.
class Tensor {
public:
    Tensor() = default;

    static Tensor leaf(Matrix v, bool requires_grad = false) {
        auto n = std::make_shared<autodiff::Node>();
        n->value = std::move(v);
        n->requires_grad = requires_grad && autodiff::g_recording;
        n->seq = ++autodiff::g_sequence;
        return Tensor(std::move(n));
    }

    static Tensor constant(Matrix v) { return leaf(std::move(v), false); }

    static Tensor scalar(double v) {
        Matrix m(1, 1);
        m(0, 0) = v;
        return constant(std::move(m));
    }

    static Tensor zeros(Eigen::Index rows, Eigen::Index cols) { return constant(Matrix::Zero(rows, cols)); }

    bool defined() const { return node_ != nullptr; }
    const Matrix& value() const { return node_->value; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    double scalar_value() const {
        autodiff::check(rows() == 1 && cols() == 1, "scalar_value on non 1x1 tensor");
        return node_->value(0, 0);
    }

    // Raw mutable access for optimizers; must never be called on graph
    // interior nodes, only on leaves between steps.
    Matrix& mutable_value() { return node_->value; }

    std::shared_ptr<autodiff::Node> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<autodiff::Node> n) : node_(std::move(n)) {}

    friend Tensor make_op(const char* name, Matrix value, std::vector<Tensor> parents,
                          std::function<std::vector<Tensor>(const Tensor&)> vjp, bool twice_differentiable);

    std::shared_ptr<autodiff::Node> node_;
};

inline Tensor make_op(const char* name, Matrix value, std::vector<Tensor> parents,
                      std::function<std::vector<Tensor>(const Tensor&)> vjp, bool twice_differentiable = true) {
    auto n = std::make_shared<autodiff::Node>();
    n->value = std::move(value);
    n->op = name;
    n->seq = ++autodiff::g_sequence;
    bool track = false;
    if (autodiff::g_recording) {
        for (const auto& p : parents) track = track || p.requires_grad();
    }
    if (track) {
        n->requires_grad = true;
        n->twice_differentiable = twice_differentiable;
        n->parents = std::move(parents);
        n->vjp = std::move(vjp);
    }
    return Tensor(std::move(n));
}

// ---------------------------------------------------------------------------
// primitive ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    autodiff::check(a.rows() == b.rows() && a.cols() == b.cols(), "add");
    return make_op("add", a.value() + b.value(), {a, b},
                   [](const Tensor& g) -> std::vector<Tensor> { return {g, g}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b);
inline Tensor mul_scalar(const Tensor& a, double c);

inline Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

inline Tensor sub(const Tensor& a, const Tensor& b) {
    autodiff::check(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
    return make_op("sub", a.value() - b.value(), {a, b},
                   [](const Tensor& g) -> std::vector<Tensor> { return {g, neg(g)}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    autodiff::check(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
    return make_op("mul", a.value().cwiseProduct(b.value()), {a, b},
                   [a, b](const Tensor& g) -> std::vector<Tensor> { return {mul(g, b), mul(g, a)}; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    autodiff::check(a.rows() == b.rows() && a.cols() == b.cols(), "div");
    return make_op("div", a.value().cwiseQuotient(b.value()), {a, b},
                   [a, b](const Tensor& g) -> std::vector<Tensor> {
                       Tensor ga = div(g, b);
                       Tensor gb = neg(div(mul(g, a), mul(b, b)));
                       return {ga, gb};
                   });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    return make_op("add_scalar", (a.value().array() + c).matrix(), {a},
                   [](const Tensor& g) -> std::vector<Tensor> { return {g}; });
}

inline Tensor mul_scalar(const Tensor& a, double c) {
    return make_op("mul_scalar", a.value() * c, {a},
                   [c](const Tensor& g) -> std::vector<Tensor> { return {mul_scalar(g, c)}; });
}

inline Tensor pow_scalar(const Tensor& a, double p) {
    return make_op("pow_scalar", a.value().array().pow(p).matrix(), {a},
                   [a, p](const Tensor& g) -> std::vector<Tensor> {
                       return {mul(g, mul_scalar(pow_scalar(a, p - 1.0), p))};
                   });
}

inline Tensor transpose(const Tensor& a) {
    return make_op("transpose", a.value().transpose(), {a},
                   [](const Tensor& g) -> std::vector<Tensor> { return {transpose(g)}; });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    autodiff::check(a.cols() == b.rows(), "matmul");
    return make_op("matmul", a.value() * b.value(), {a, b},
                   [a, b](const Tensor& g) -> std::vector<Tensor> {
                       return {matmul(g, transpose(b)), matmul(transpose(a), g)};
                   });
}

inline Tensor tanh_t(const Tensor& a) {
    return make_op("tanh", a.value().array().tanh().matrix(), {a},
                   [a](const Tensor& g) -> std::vector<Tensor> {
                       Tensor y = tanh_t(a);  // recomputed so the second derivative stays exact
                       return {mul(g, add_scalar(neg(mul(y, y)), 1.0))};
                   });
}

inline Tensor sigmoid_t(const Tensor& a) {
    Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return make_op("sigmoid", std::move(y), {a},
                   [a](const Tensor& g) -> std::vector<Tensor> {
                       Tensor y2 = sigmoid_t(a);
                       return {mul(g, mul(y2, add_scalar(neg(y2), 1.0)))};
                   });
}

inline Tensor exp_t(const Tensor& a) {
    return make_op("exp", a.value().array().exp().matrix(), {a},
                   [a](const Tensor& g) -> std::vector<Tensor> { return {mul(g, exp_t(a))}; });
}

inline Tensor log_t(const Tensor& a) {
    return make_op("log", a.value().array().log().matrix(), {a},
                   [a](const Tensor& g) -> std::vector<Tensor> { return {div(g, a)}; });
}

inline Tensor sqrt_t(const Tensor& a) {
    return make_op("sqrt", a.value().array().sqrt().matrix(), {a},
                   [a](const Tensor& g) -> std::vector<Tensor> {
                       return {mul_scalar(div(g, sqrt_t(a)), 0.5)};
                   });
}

inline Tensor sum_all(const Tensor& a);
inline Tensor bcast_all(const Tensor& a, Eigen::Index rows, Eigen::Index cols);

inline Tensor sum_all(const Tensor& a) {
    Matrix s(1, 1);
    s(0, 0) = a.value().sum();
    Eigen::Index r = a.rows(), c = a.cols();
    return make_op("sum_all", std::move(s), {a},
                   [r, c](const Tensor& g) -> std::vector<Tensor> { return {bcast_all(g, r, c)}; });
}

// 1 x 1 -> rows x cols
inline Tensor bcast_all(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
    autodiff::check(a.rows() == 1 && a.cols() == 1, "bcast_all");
    return make_op("bcast_all", Matrix::Constant(rows, cols, a.value()(0, 0)), {a},
                   [](const Tensor& g) -> std::vector<Tensor> { return {sum_all(g)}; });
}

inline Tensor row_sum(const Tensor& a);
inline Tensor bcast_cols(const Tensor& a, Eigen::Index cols);

// B x D -> B x 1
inline Tensor row_sum(const Tensor& a) {
    Eigen::Index c = a.cols();
    return make_op("row_sum", a.value().rowwise().sum(), {a},
                   [c](const Tensor& g) -> std::vector<Tensor> { return {bcast_cols(g, c)}; });
}

// B x 1 -> B x D
inline Tensor bcast_cols(const Tensor& a, Eigen::Index cols) {
    autodiff::check(a.cols() == 1, "bcast_cols");
    return make_op("bcast_cols", a.value().replicate(1, cols), {a},
                   [](const Tensor& g) -> std::vector<Tensor> { return {row_sum(g)}; });
}

inline Tensor col_sum(const Tensor& a);
inline Tensor bcast_rows(const Tensor& a, Eigen::Index rows);

// B x D -> 1 x D
inline Tensor col_sum(const Tensor& a) {
    Eigen::Index r = a.rows();
    return make_op("col_sum", a.value().colwise().sum(), {a},
                   [r](const Tensor& g) -> std::vector<Tensor> { return {bcast_rows(g, r)}; });
}

// 1 x D -> B x D
inline Tensor bcast_rows(const Tensor& a, Eigen::Index rows) {
    autodiff::check(a.rows() == 1, "bcast_rows");
    return make_op("bcast_rows", a.value().replicate(rows, 1), {a},
                   [](const Tensor& g) -> std::vector<Tensor> { return {col_sum(g)}; });
}

// B x D + 1 x D with row broadcast (bias add)
inline Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    autodiff::check(b.rows() == 1 && a.cols() == b.cols(), "add_rowvec");
    return make_op("add_rowvec", a.value().rowwise() + b.value().row(0), {a, b},
                   [](const Tensor& g) -> std::vector<Tensor> { return {g, col_sum(g)}; });
}

// Rowwise max, B x D -> B x 1. The argmax selection is frozen at forward
// time, so a second differentiation through it is refused.
inline Tensor row_max(const Tensor& a) {
    Eigen::Index r = a.rows(), c = a.cols();
    Matrix out(r, 1);
    Matrix indicator = Matrix::Zero(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        Eigen::Index j;
        out(i, 0) = a.value().row(i).maxCoeff(&j);
        indicator(i, j) = 1.0;
    }
    Tensor ind = Tensor::constant(std::move(indicator));
    return make_op(
        "row_max", std::move(out), {a},
        [ind, c](const Tensor& g) -> std::vector<Tensor> { return {mul(bcast_cols(g, c), ind)}; },
        /*twice_differentiable=*/false);
}

inline Tensor slice_cols(const Tensor& a, Eigen::Index off, Eigen::Index len);
inline Tensor pad_cols(const Tensor& a, Eigen::Index off, Eigen::Index total);

inline Tensor slice_cols(const Tensor& a, Eigen::Index off, Eigen::Index len) {
    autodiff::check(off >= 0 && off + len <= a.cols(), "slice_cols");
    Eigen::Index total = a.cols();
    return make_op("slice_cols", a.value().middleCols(off, len), {a},
                   [off, total](const Tensor& g) -> std::vector<Tensor> { return {pad_cols(g, off, total)}; });
}

inline Tensor pad_cols(const Tensor& a, Eigen::Index off, Eigen::Index total) {
    autodiff::check(off >= 0 && off + a.cols() <= total, "pad_cols");
    Matrix out = Matrix::Zero(a.rows(), total);
    out.middleCols(off, a.cols()) = a.value();
    Eigen::Index len = a.cols();
    return make_op("pad_cols", std::move(out), {a},
                   [off, len](const Tensor& g) -> std::vector<Tensor> { return {slice_cols(g, off, len)}; });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    autodiff::check(!parts.empty(), "concat_cols empty");
    Eigen::Index rows = parts[0].rows(), total = 0;
    for (const auto& p : parts) {
        autodiff::check(p.rows() == rows, "concat_cols rows");
        total += p.cols();
    }
    Matrix out(rows, total);
    Eigen::Index off = 0;
    std::vector<Eigen::Index> offsets;
    std::vector<Eigen::Index> widths;
    for (const auto& p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        offsets.push_back(off);
        widths.push_back(p.cols());
        off += p.cols();
    }
    return make_op("concat_cols", std::move(out), parts,
                   [offsets, widths](const Tensor& g) -> std::vector<Tensor> {
                       std::vector<Tensor> grads;
                       grads.reserve(offsets.size());
                       for (std::size_t i = 0; i < offsets.size(); ++i) {
                           grads.push_back(slice_cols(g, offsets[i], widths[i]));
                       }
                       return grads;
                   });
}

inline Tensor gather_rows(const Tensor& a, std::vector<int> ids);
inline Tensor scatter_rows(const Tensor& a, std::vector<int> ids, Eigen::Index total_rows);

// out(i, :) = a(ids[i], :)
inline Tensor gather_rows(const Tensor& a, std::vector<int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), a.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        autodiff::check(ids[i] >= 0 && ids[i] < a.rows(), "gather_rows index");
        out.row(static_cast<Eigen::Index>(i)) = a.value().row(ids[i]);
    }
    Eigen::Index total = a.rows();
    return make_op("gather_rows", std::move(out), {a},
                   [ids, total](const Tensor& g) -> std::vector<Tensor> {
                       return {scatter_rows(g, ids, total)};
                   });
}

// out(ids[i], :) += a(i, :)
inline Tensor scatter_rows(const Tensor& a, std::vector<int> ids, Eigen::Index total_rows) {
    autodiff::check(static_cast<std::size_t>(a.rows()) == ids.size(), "scatter_rows count");
    Matrix out = Matrix::Zero(total_rows, a.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.row(ids[i]) += a.value().row(static_cast<Eigen::Index>(i));
    }
    return make_op("scatter_rows", std::move(out), {a},
                   [ids](const Tensor& g) -> std::vector<Tensor> { return {gather_rows(g, ids)}; });
}

// Value copy with no backward linkage.
inline Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }

// ---------------------------------------------------------------------------
// composites (built from primitives, so they are twice differentiable)
// ---------------------------------------------------------------------------

// Rowwise log-softmax, shift-stabilized. The max shift is detached, which is
// exact because log-softmax is shift invariant.
inline Tensor log_softmax_rows(const Tensor& a) {
    Tensor shifted = sub(a, bcast_cols(detach(row_max(a)), a.cols()));
    Tensor lse = log_t(row_sum(exp_t(shifted)));
    return sub(shifted, bcast_cols(lse, a.cols()));
}

inline Tensor softmax_rows(const Tensor& a) { return exp_t(log_softmax_rows(a)); }

inline Tensor mean_all(const Tensor& a) {
    return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

// ---------------------------------------------------------------------------
// reverse-mode differentiation
// ---------------------------------------------------------------------------

// Gradients of a scalar loss w.r.t. each input, in input order; zeros for
// inputs the loss does not reach. With create_graph the returned tensors keep
// backward linkage, so they can be differentiated again (the Hessian-vector
// structure one inner SGD step needs).
inline std::vector<Tensor> grad(const Tensor& loss, std::span<const Tensor> inputs, bool create_graph = false) {
    autodiff::check(loss.rows() == 1 && loss.cols() == 1, "grad expects a scalar loss");

    // collect the requires-grad subgraph; creation order is a topological order
    std::vector<autodiff::Node*> order;
    std::unordered_map<autodiff::Node*, Tensor> grads;
    {
        std::vector<autodiff::Node*> stack;
        std::unordered_map<autodiff::Node*, bool> seen;
        if (loss.requires_grad()) stack.push_back(loss.node().get());
        while (!stack.empty()) {
            autodiff::Node* n = stack.back();
            stack.pop_back();
            if (seen[n]) continue;
            seen[n] = true;
            order.push_back(n);
            for (const auto& p : n->parents) {
                if (p.requires_grad()) stack.push_back(p.node().get());
            }
        }
        std::sort(order.begin(), order.end(),
                  [](const autodiff::Node* a, const autodiff::Node* b) { return a->seq > b->seq; });
    }

    std::optional<autodiff::NoGradGuard> guard;
    if (!create_graph) guard.emplace();

    if (loss.requires_grad()) grads.emplace(loss.node().get(), Tensor::scalar(1.0));
    for (autodiff::Node* n : order) {
        auto it = grads.find(n);
        if (it == grads.end() || !n->vjp) continue;
        if (create_graph && !n->twice_differentiable) {
            throw NumericError(std::string("second-order gradient through op '") + n->op + "' is not supported");
        }
        std::vector<Tensor> pgrads = n->vjp(it->second);
        autodiff::check(pgrads.size() == n->parents.size(), "vjp arity");
        for (std::size_t i = 0; i < pgrads.size(); ++i) {
            const Tensor& p = n->parents[i];
            if (!p.requires_grad() || !pgrads[i].defined()) continue;
            auto slot = grads.find(p.node().get());
            if (slot == grads.end()) {
                grads.emplace(p.node().get(), pgrads[i]);
            } else {
                slot->second = add(slot->second, pgrads[i]);
            }
        }
    }

    std::vector<Tensor> out;
    out.reserve(inputs.size());
    for (const auto& input : inputs) {
        auto it = grads.find(input.node().get());
        if (it == grads.end()) {
            out.push_back(Tensor::zeros(input.rows(), input.cols()));
        } else {
            out.push_back(it->second);
        }
    }
    return out;
}

inline std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& inputs, bool create_graph = false) {
    return grad(loss, std::span<const Tensor>(inputs), create_graph);
}

}  // namespace simaml
