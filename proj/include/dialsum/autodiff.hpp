#pragma once

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Graph is a tape of eagerly evaluated nodes; creation order is a valid
// topological order, so backward() is a single reverse sweep that visits
// each node exactly once. Parameters live in a ParameterStore whose gradient
// accumulators persist across graphs; callers zero them between steps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialsum/tensor.hpp"

namespace dialsum {
namespace ad {

struct ParamEntry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

class ParameterStore {
  public:
    ParamEntry& add(const std::string& name, Tensor value, bool trainable = true) {
        if (index_.count(name)) {
            throw std::invalid_argument("ParameterStore: duplicate name " + name);
        }
        auto entry = std::make_unique<ParamEntry>();
        entry->name = name;
        entry->grad = Tensor(value.shape);
        entry->value = std::move(value);
        entry->trainable = trainable;
        index_[name] = entries_.size();
        entries_.push_back(std::move(entry));
        return *entries_.back();
    }

    ParamEntry* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : entries_[it->second].get();
    }

    const ParamEntry* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : entries_[it->second].get();
    }

    ParamEntry& at(const std::string& name) {
        ParamEntry* e = find(name);
        if (!e) throw std::invalid_argument("ParameterStore: unknown name " + name);
        return *e;
    }

    const ParamEntry& at(const std::string& name) const {
        const ParamEntry* e = find(name);
        if (!e) throw std::invalid_argument("ParameterStore: unknown name " + name);
        return *e;
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    void zero_grads() {
        for (auto& e : entries_) e->grad.fill(0.0);
    }

    std::size_t size() const { return entries_.size(); }

    // Insertion order; iteration over this is the canonical parameter order.
    const std::vector<std::unique_ptr<ParamEntry>>& entries() const { return entries_; }
    std::vector<std::unique_ptr<ParamEntry>>& entries() { return entries_; }

    std::size_t total_parameters() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e->value.numel();
        return n;
    }

    // Deep copy of values and flags; gradients start zeroed.
    ParameterStore clone() const {
        ParameterStore out;
        for (const auto& e : entries_) out.add(e->name, e->value, e->trainable);
        return out;
    }

  private:
    std::map<std::string, std::size_t> index_;
    std::vector<std::unique_ptr<ParamEntry>> entries_;
};

enum class Op {
    kLeaf,        // constant or parameter
    kAdd,         // elementwise a + b
    kSub,         // elementwise a - b
    kMul,         // elementwise a * b
    kAffine,      // a*x + b with scalar constants
    kLinear,      // W x + b
    kMatmulNT,    // A B^T
    kMatvec,      // A x
    kTMatvec,     // A^T x
    kAddRowvec,   // M + 1 v^T
    kTanh,
    kSigmoid,
    kSoftmax,
    kLog,
    kClampMin,    // max(x, c)
    kSum,         // sum of all elements -> scalar
    kDot,         // <a, b> -> scalar
    kPick,        // x[i] -> scalar
    kGather,      // y_k = x[idx_k]
    kScatterAdd,  // y_i = sum_{k: idx_k = i} x_k
    kConcat,      // vector concatenation
    kStackRows,   // rows from a list of equal-length vectors
    kMeanRows,    // mean of rows [i0, i1)
    kEmbedRow,    // row i of a matrix
    kDivScalar,   // v / s, s a scalar node
    kMulScalar,   // v * s, s a scalar node
    kCosine,      // cos(a, b); 0 when either vector is ~zero
};

struct Node {
    Op op = Op::kLeaf;
    Tensor owned;              // storage for op results and constants
    const Tensor* value = nullptr;
    Tensor grad;               // lazily sized during backward
    bool needs_grad = false;
    ParamEntry* param = nullptr;  // set for parameter leaves
    std::vector<Node*> inputs;
    double c0 = 0.0, c1 = 0.0;          // scalar op constants
    std::size_t i0 = 0, i1 = 0;         // index op parameters
    std::vector<std::uint32_t> idx;     // gather/scatter index lists

    const Tensor& val() const { return *value; }
    bool is_scalar() const { return value->numel() == 1; }
    double scalar_value() const { return value->data[0]; }
};

class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    std::size_t size() const { return nodes_.size(); }

    Node* constant(Tensor t) {
        Node* n = new_node(Op::kLeaf);
        n->owned = std::move(t);
        n->value = &n->owned;
        return n;
    }

    Node* constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    Node* param(ParamEntry& entry) {
        auto it = param_nodes_.find(&entry);
        if (it != param_nodes_.end()) return it->second;
        Node* n = new_node(Op::kLeaf);
        n->value = &entry.value;
        n->param = &entry;
        n->needs_grad = entry.trainable;
        param_nodes_[&entry] = n;
        return n;
    }

    Node* param(ParameterStore& store, const std::string& name) { return param(store.at(name)); }

    Node* add(Node* a, Node* b) {
        require(a->val().same_shape(b->val()), "add: shape mismatch");
        Node* n = new_op(Op::kAdd, {a, b}, Tensor(a->val().shape));
        for (std::size_t i = 0; i < n->owned.numel(); ++i) {
            n->owned[i] = a->val()[i] + b->val()[i];
        }
        return n;
    }

    Node* sub(Node* a, Node* b) {
        require(a->val().same_shape(b->val()), "sub: shape mismatch");
        Node* n = new_op(Op::kSub, {a, b}, Tensor(a->val().shape));
        for (std::size_t i = 0; i < n->owned.numel(); ++i) {
            n->owned[i] = a->val()[i] - b->val()[i];
        }
        return n;
    }

    Node* mul(Node* a, Node* b) {
        require(a->val().same_shape(b->val()), "mul: shape mismatch");
        Node* n = new_op(Op::kMul, {a, b}, Tensor(a->val().shape));
        for (std::size_t i = 0; i < n->owned.numel(); ++i) {
            n->owned[i] = a->val()[i] * b->val()[i];
        }
        return n;
    }

    // y = a*x + b elementwise; covers negation, scaling and 1-x.
    Node* affine(Node* x, double a, double b) {
        Node* n = new_op(Op::kAffine, {x}, Tensor(x->val().shape));
        n->c0 = a;
        n->c1 = b;
        for (std::size_t i = 0; i < n->owned.numel(); ++i) {
            n->owned[i] = a * x->val()[i] + b;
        }
        return n;
    }

    Node* scale(Node* x, double a) { return affine(x, a, 0.0); }
    Node* one_minus(Node* x) { return affine(x, -1.0, 1.0); }

    // y = W x + b. W is (m x n), x is an n-vector, b an m-vector.
    Node* linear(Node* w, Node* x, Node* b) {
        require(w->val().ndim() == 2, "linear: W must be a matrix");
        require(x->val().ndim() == 1 && x->val().numel() == w->val().cols(),
                "linear: x width mismatch");
        require(b->val().ndim() == 1 && b->val().numel() == w->val().rows(),
                "linear: b width mismatch");
        const std::size_t m = w->val().rows(), k = w->val().cols();
        Node* n = new_op(Op::kLinear, {w, x, b}, Tensor({m}));
        const double* wd = w->val().data.data();
        const double* xd = x->val().data.data();
        for (std::size_t i = 0; i < m; ++i) {
            double acc = b->val()[i];
            const double* row = wd + i * k;
            for (std::size_t j = 0; j < k; ++j) acc += row[j] * xd[j];
            n->owned[i] = acc;
        }
        return n;
    }

    // Y = A B^T. A is (l x k), B is (m x k), Y is (l x m).
    Node* matmul_nt(Node* a, Node* b) {
        require(a->val().ndim() == 2 && b->val().ndim() == 2, "matmul_nt: need matrices");
        require(a->val().cols() == b->val().cols(), "matmul_nt: inner dim mismatch");
        const std::size_t l = a->val().rows(), k = a->val().cols(), m = b->val().rows();
        Node* n = new_op(Op::kMatmulNT, {a, b}, Tensor({l, m}));
        for (std::size_t i = 0; i < l; ++i) {
            const double* ar = a->val().data.data() + i * k;
            for (std::size_t j = 0; j < m; ++j) {
                const double* br = b->val().data.data() + j * k;
                double acc = 0.0;
                for (std::size_t t = 0; t < k; ++t) acc += ar[t] * br[t];
                n->owned.at(i, j) = acc;
            }
        }
        return n;
    }

    Node* matvec(Node* a, Node* x) {
        require(a->val().ndim() == 2 && x->val().ndim() == 1, "matvec: need matrix, vector");
        require(a->val().cols() == x->val().numel(), "matvec: width mismatch");
        const std::size_t m = a->val().rows(), k = a->val().cols();
        Node* n = new_op(Op::kMatvec, {a, x}, Tensor({m}));
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = a->val().data.data() + i * k;
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += row[j] * x->val()[j];
            n->owned[i] = acc;
        }
        return n;
    }

    // y = A^T x. A is (m x n), x an m-vector, y an n-vector.
    Node* tmatvec(Node* a, Node* x) {
        require(a->val().ndim() == 2 && x->val().ndim() == 1, "tmatvec: need matrix, vector");
        require(a->val().rows() == x->val().numel(), "tmatvec: height mismatch");
        const std::size_t m = a->val().rows(), k = a->val().cols();
        Node* n = new_op(Op::kTMatvec, {a, x}, Tensor({k}));
        for (std::size_t i = 0; i < m; ++i) {
            const double xi = x->val()[i];
            const double* row = a->val().data.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) n->owned[j] += xi * row[j];
        }
        return n;
    }

    // Y = M + 1 v^T: add v to every row of M.
    Node* add_rowvec(Node* m, Node* v) {
        require(m->val().ndim() == 2 && v->val().ndim() == 1, "add_rowvec: need matrix, vector");
        require(m->val().cols() == v->val().numel(), "add_rowvec: width mismatch");
        Node* n = new_op(Op::kAddRowvec, {m, v}, Tensor(m->val().shape));
        const std::size_t rows = m->val().rows(), cols = m->val().cols();
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                n->owned.at(i, j) = m->val().at(i, j) + v->val()[j];
            }
        }
        return n;
    }

    Node* tanh(Node* x) {
        Node* n = new_op(Op::kTanh, {x}, Tensor(x->val().shape));
        for (std::size_t i = 0; i < n->owned.numel(); ++i) n->owned[i] = std::tanh(x->val()[i]);
        return n;
    }

    Node* sigmoid(Node* x) {
        Node* n = new_op(Op::kSigmoid, {x}, Tensor(x->val().shape));
        for (std::size_t i = 0; i < n->owned.numel(); ++i) {
            n->owned[i] = 1.0 / (1.0 + std::exp(-x->val()[i]));
        }
        return n;
    }

    // Max-subtracted softmax over a vector; outputs sum to 1 within 1e-12.
    Node* softmax(Node* x) {
        require(x->val().ndim() == 1 && x->val().numel() > 0, "softmax: need non-empty vector");
        Node* n = new_op(Op::kSoftmax, {x}, Tensor(x->val().shape));
        softmax_inplace(x->val().data, n->owned.data);
        return n;
    }

    Node* log(Node* x) {
        Node* n = new_op(Op::kLog, {x}, Tensor(x->val().shape));
        for (std::size_t i = 0; i < n->owned.numel(); ++i) n->owned[i] = std::log(x->val()[i]);
        return n;
    }

    // Elementwise max(x, c); gradient is zero where the clamp is active.
    Node* clamp_min(Node* x, double c) {
        Node* n = new_op(Op::kClampMin, {x}, Tensor(x->val().shape));
        n->c0 = c;
        for (std::size_t i = 0; i < n->owned.numel(); ++i) {
            n->owned[i] = std::max(x->val()[i], c);
        }
        return n;
    }

    Node* sum(Node* x) {
        Node* n = new_op(Op::kSum, {x}, Tensor({1}));
        double acc = 0.0;
        for (double v : x->val().data) acc += v;
        n->owned[0] = acc;
        return n;
    }

    Node* dot(Node* a, Node* b) {
        require(a->val().same_shape(b->val()), "dot: shape mismatch");
        Node* n = new_op(Op::kDot, {a, b}, Tensor({1}));
        double acc = 0.0;
        for (std::size_t i = 0; i < a->val().numel(); ++i) acc += a->val()[i] * b->val()[i];
        n->owned[0] = acc;
        return n;
    }

    Node* pick(Node* x, std::size_t i) {
        require(i < x->val().numel(), "pick: index out of range");
        Node* n = new_op(Op::kPick, {x}, Tensor({1}));
        n->i0 = i;
        n->owned[0] = x->val()[i];
        return n;
    }

    Node* gather(Node* x, std::vector<std::uint32_t> indices) {
        for (std::uint32_t i : indices) require(i < x->val().numel(), "gather: index out of range");
        Node* n = new_op(Op::kGather, {x}, Tensor({indices.size()}));
        n->idx = std::move(indices);
        for (std::size_t k = 0; k < n->idx.size(); ++k) n->owned[k] = x->val()[n->idx[k]];
        return n;
    }

    // y_i = sum of x_k over k with idx_k == i; y has out_size entries.
    Node* scatter_add(Node* x, std::vector<std::uint32_t> indices, std::size_t out_size) {
        require(indices.size() == x->val().numel(), "scatter_add: index count mismatch");
        for (std::uint32_t i : indices) require(i < out_size, "scatter_add: index out of range");
        Node* n = new_op(Op::kScatterAdd, {x}, Tensor({out_size}));
        n->idx = std::move(indices);
        for (std::size_t k = 0; k < n->idx.size(); ++k) n->owned[n->idx[k]] += x->val()[k];
        return n;
    }

    Node* concat(std::vector<Node*> parts) {
        require(!parts.empty(), "concat: no inputs");
        std::size_t total = 0;
        for (Node* p : parts) {
            require(p->val().ndim() == 1, "concat: vector inputs only");
            total += p->val().numel();
        }
        Node* n = new_op(Op::kConcat, std::move(parts), Tensor({total}));
        std::size_t off = 0;
        for (Node* p : n->inputs) {
            std::copy(p->val().data.begin(), p->val().data.end(), n->owned.data.begin() + off);
            off += p->val().numel();
        }
        return n;
    }

    Node* stack_rows(std::vector<Node*> rows) {
        require(!rows.empty(), "stack_rows: no inputs");
        const std::size_t width = rows.front()->val().numel();
        for (Node* r : rows) {
            require(r->val().ndim() == 1 && r->val().numel() == width,
                    "stack_rows: rows must be equal-length vectors");
        }
        Node* n = new_op(Op::kStackRows, std::move(rows), Tensor({0, width}));
        n->owned.shape[0] = n->inputs.size();
        n->owned.data.assign(n->inputs.size() * width, 0.0);
        for (std::size_t r = 0; r < n->inputs.size(); ++r) {
            std::copy(n->inputs[r]->val().data.begin(), n->inputs[r]->val().data.end(),
                      n->owned.data.begin() + r * width);
        }
        return n;
    }

    // Mean of rows [r0, r1) of a matrix.
    Node* mean_rows(Node* m, std::size_t r0, std::size_t r1) {
        require(m->val().ndim() == 2, "mean_rows: need matrix");
        require(r0 < r1 && r1 <= m->val().rows(), "mean_rows: bad row range");
        const std::size_t cols = m->val().cols();
        Node* n = new_op(Op::kMeanRows, {m}, Tensor({cols}));
        n->i0 = r0;
        n->i1 = r1;
        const double inv = 1.0 / static_cast<double>(r1 - r0);
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t j = 0; j < cols; ++j) n->owned[j] += m->val().at(r, j) * inv;
        }
        return n;
    }

    Node* embed_row(Node* table, std::size_t row) {
        require(table->val().ndim() == 2, "embed_row: need matrix");
        require(row < table->val().rows(), "embed_row: row out of range");
        const std::size_t cols = table->val().cols();
        Node* n = new_op(Op::kEmbedRow, {table}, Tensor({cols}));
        n->i0 = row;
        const double* src = table->val().data.data() + row * cols;
        std::copy(src, src + cols, n->owned.data.begin());
        return n;
    }

    Node* div_scalar(Node* v, Node* s) {
        require(s->is_scalar(), "div_scalar: divisor must be scalar");
        Node* n = new_op(Op::kDivScalar, {v, s}, Tensor(v->val().shape));
        const double d = s->scalar_value();
        for (std::size_t i = 0; i < n->owned.numel(); ++i) n->owned[i] = v->val()[i] / d;
        return n;
    }

    Node* mul_scalar(Node* v, Node* s) {
        require(s->is_scalar(), "mul_scalar: multiplier must be scalar");
        Node* n = new_op(Op::kMulScalar, {v, s}, Tensor(v->val().shape));
        const double d = s->scalar_value();
        for (std::size_t i = 0; i < n->owned.numel(); ++i) n->owned[i] = v->val()[i] * d;
        return n;
    }

    // Cosine similarity of two vectors; defined as 0 (with zero gradient)
    // when either vector has near-zero norm.
    Node* cosine(Node* a, Node* b) {
        require(a->val().same_shape(b->val()) && a->val().ndim() == 1, "cosine: vector mismatch");
        Node* n = new_op(Op::kCosine, {a, b}, Tensor({1}));
        double na = 0.0, nb = 0.0, ab = 0.0;
        for (std::size_t i = 0; i < a->val().numel(); ++i) {
            na += a->val()[i] * a->val()[i];
            nb += b->val()[i] * b->val()[i];
            ab += a->val()[i] * b->val()[i];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        n->owned[0] = (na < kZeroNorm || nb < kZeroNorm) ? 0.0 : ab / (na * nb);
        return n;
    }

    // Reverse sweep from a scalar loss. Gradients of parameter leaves are
    // accumulated into their ParameterStore entries; repeated calls without
    // zero_grads() keep accumulating.
    void backward(Node* loss) {
        require(loss != nullptr, "backward: null loss");
        if (!loss->is_scalar()) {
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        shape_str(loss->val()));
        }
        accum_grad(loss, Tensor::scalar(1.0));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node& n = *it;
            if (n.grad.numel() == 0 || n.op == Op::kLeaf) continue;
            backward_op(n);
        }
        for (auto& [entry, node] : param_nodes_) {
            if (!entry->trainable || node->grad.numel() == 0) continue;
            for (std::size_t i = 0; i < entry->grad.numel(); ++i) {
                entry->grad[i] += node->grad[i];
            }
        }
    }

    static void softmax_inplace(const std::vector<double>& in, std::vector<double>& out) {
        double mx = in[0];
        for (double v : in) mx = std::max(mx, v);
        double total = 0.0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            out[i] = std::exp(in[i] - mx);
            total += out[i];
        }
        const double inv = 1.0 / total;
        for (double& v : out) v *= inv;
    }

  private:
    static constexpr double kZeroNorm = 1e-30;

    static void require(bool ok, const char* msg) {
        if (!ok) throw std::invalid_argument(msg);
    }

    Node* new_node(Op op) {
        nodes_.emplace_back();
        Node* n = &nodes_.back();
        n->op = op;
        return n;
    }

    Node* new_op(Op op, std::vector<Node*> inputs, Tensor value) {
        Node* n = new_node(op);
        n->inputs = std::move(inputs);
        n->owned = std::move(value);
        n->value = &n->owned;
        for (Node* in : n->inputs) n->needs_grad = n->needs_grad || in->needs_grad;
        return n;
    }

    static void ensure_grad(Node* n) {
        if (n->grad.numel() == 0) n->grad = Tensor(n->value->shape);
    }

    void accum_grad(Node* n, const Tensor& g) {
        if (!n->needs_grad) return;
        ensure_grad(n);
        for (std::size_t i = 0; i < g.numel(); ++i) n->grad[i] += g[i];
    }

    // Adds into in->grad only when the input participates in a gradient path.
    static Tensor* grad_sink(Node* in) {
        if (!in->needs_grad) return nullptr;
        ensure_grad(in);
        return &in->grad;
    }

    void backward_op(Node& n) {
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::kAdd: {
                if (Tensor* ga = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
                }
                if (Tensor* gb = grad_sink(n.inputs[1])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i];
                }
                break;
            }
            case Op::kSub: {
                if (Tensor* ga = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
                }
                if (Tensor* gb = grad_sink(n.inputs[1])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] -= g[i];
                }
                break;
            }
            case Op::kMul: {
                const Tensor& a = n.inputs[0]->val();
                const Tensor& b = n.inputs[1]->val();
                if (Tensor* ga = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * b[i];
                }
                if (Tensor* gb = grad_sink(n.inputs[1])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * a[i];
                }
                break;
            }
            case Op::kAffine: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += n.c0 * g[i];
                }
                break;
            }
            case Op::kLinear: {
                Node* w = n.inputs[0];
                Node* x = n.inputs[1];
                Node* b = n.inputs[2];
                const std::size_t m = w->val().rows(), k = w->val().cols();
                if (Tensor* gw = grad_sink(w)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        double* row = gw->data.data() + i * k;
                        const double gi = g[i];
                        for (std::size_t j = 0; j < k; ++j) row[j] += gi * x->val()[j];
                    }
                }
                if (Tensor* gx = grad_sink(x)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* row = w->val().data.data() + i * k;
                        const double gi = g[i];
                        for (std::size_t j = 0; j < k; ++j) (*gx)[j] += gi * row[j];
                    }
                }
                if (Tensor* gb = grad_sink(b)) {
                    for (std::size_t i = 0; i < m; ++i) (*gb)[i] += g[i];
                }
                break;
            }
            case Op::kMatmulNT: {
                Node* a = n.inputs[0];
                Node* b = n.inputs[1];
                const std::size_t l = a->val().rows(), k = a->val().cols(), m = b->val().rows();
                if (Tensor* ga = grad_sink(a)) {
                    // gA += G B
                    for (std::size_t i = 0; i < l; ++i) {
                        for (std::size_t j = 0; j < m; ++j) {
                            const double gij = g.at(i, j);
                            if (gij == 0.0) continue;
                            const double* br = b->val().data.data() + j * k;
                            double* gr = ga->data.data() + i * k;
                            for (std::size_t t = 0; t < k; ++t) gr[t] += gij * br[t];
                        }
                    }
                }
                if (Tensor* gb = grad_sink(b)) {
                    // gB += G^T A
                    for (std::size_t i = 0; i < l; ++i) {
                        const double* ar = a->val().data.data() + i * k;
                        for (std::size_t j = 0; j < m; ++j) {
                            const double gij = g.at(i, j);
                            if (gij == 0.0) continue;
                            double* gr = gb->data.data() + j * k;
                            for (std::size_t t = 0; t < k; ++t) gr[t] += gij * ar[t];
                        }
                    }
                }
                break;
            }
            case Op::kMatvec: {
                Node* a = n.inputs[0];
                Node* x = n.inputs[1];
                const std::size_t m = a->val().rows(), k = a->val().cols();
                if (Tensor* ga = grad_sink(a)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        double* row = ga->data.data() + i * k;
                        const double gi = g[i];
                        for (std::size_t j = 0; j < k; ++j) row[j] += gi * x->val()[j];
                    }
                }
                if (Tensor* gx = grad_sink(x)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* row = a->val().data.data() + i * k;
                        const double gi = g[i];
                        for (std::size_t j = 0; j < k; ++j) (*gx)[j] += gi * row[j];
                    }
                }
                break;
            }
            case Op::kTMatvec: {
                Node* a = n.inputs[0];
                Node* x = n.inputs[1];
                const std::size_t m = a->val().rows(), k = a->val().cols();
                if (Tensor* ga = grad_sink(a)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double xi = x->val()[i];
                        double* row = ga->data.data() + i * k;
                        for (std::size_t j = 0; j < k; ++j) row[j] += xi * g[j];
                    }
                }
                if (Tensor* gx = grad_sink(x)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* row = a->val().data.data() + i * k;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < k; ++j) acc += row[j] * g[j];
                        (*gx)[i] += acc;
                    }
                }
                break;
            }
            case Op::kAddRowvec: {
                const std::size_t rows = n.val().rows(), cols = n.val().cols();
                if (Tensor* gm = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gm)[i] += g[i];
                }
                if (Tensor* gv = grad_sink(n.inputs[1])) {
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < cols; ++j) (*gv)[j] += g.at(i, j);
                    }
                }
                break;
            }
            case Op::kTanh: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) {
                        const double y = n.val()[i];
                        (*gx)[i] += g[i] * (1.0 - y * y);
                    }
                }
                break;
            }
            case Op::kSigmoid: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) {
                        const double y = n.val()[i];
                        (*gx)[i] += g[i] * y * (1.0 - y);
                    }
                }
                break;
            }
            case Op::kSoftmax: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    double gy = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) gy += g[i] * n.val()[i];
                    for (std::size_t i = 0; i < g.numel(); ++i) {
                        (*gx)[i] += n.val()[i] * (g[i] - gy);
                    }
                }
                break;
            }
            case Op::kLog: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) {
                        (*gx)[i] += g[i] / n.inputs[0]->val()[i];
                    }
                }
                break;
            }
            case Op::kClampMin: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) {
                        if (n.inputs[0]->val()[i] > n.c0) (*gx)[i] += g[i];
                    }
                }
                break;
            }
            case Op::kSum: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < gx->numel(); ++i) (*gx)[i] += g[0];
                }
                break;
            }
            case Op::kDot: {
                const Tensor& a = n.inputs[0]->val();
                const Tensor& b = n.inputs[1]->val();
                if (Tensor* ga = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < a.numel(); ++i) (*ga)[i] += g[0] * b[i];
                }
                if (Tensor* gb = grad_sink(n.inputs[1])) {
                    for (std::size_t i = 0; i < b.numel(); ++i) (*gb)[i] += g[0] * a[i];
                }
                break;
            }
            case Op::kPick: {
                if (Tensor* gx = grad_sink(n.inputs[0])) (*gx)[n.i0] += g[0];
                break;
            }
            case Op::kGather: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t k = 0; k < n.idx.size(); ++k) (*gx)[n.idx[k]] += g[k];
                }
                break;
            }
            case Op::kScatterAdd: {
                if (Tensor* gx = grad_sink(n.inputs[0])) {
                    for (std::size_t k = 0; k < n.idx.size(); ++k) (*gx)[k] += g[n.idx[k]];
                }
                break;
            }
            case Op::kConcat: {
                std::size_t off = 0;
                for (Node* p : n.inputs) {
                    if (Tensor* gp = grad_sink(p)) {
                        for (std::size_t i = 0; i < p->val().numel(); ++i) {
                            (*gp)[i] += g[off + i];
                        }
                    }
                    off += p->val().numel();
                }
                break;
            }
            case Op::kStackRows: {
                const std::size_t width = n.val().cols();
                for (std::size_t r = 0; r < n.inputs.size(); ++r) {
                    if (Tensor* gr = grad_sink(n.inputs[r])) {
                        for (std::size_t j = 0; j < width; ++j) (*gr)[j] += g.at(r, j);
                    }
                }
                break;
            }
            case Op::kMeanRows: {
                if (Tensor* gm = grad_sink(n.inputs[0])) {
                    const std::size_t cols = n.inputs[0]->val().cols();
                    const double inv = 1.0 / static_cast<double>(n.i1 - n.i0);
                    for (std::size_t r = n.i0; r < n.i1; ++r) {
                        for (std::size_t j = 0; j < cols; ++j) {
                            gm->at(r, j) += g[j] * inv;
                        }
                    }
                }
                break;
            }
            case Op::kEmbedRow: {
                if (Tensor* gt = grad_sink(n.inputs[0])) {
                    const std::size_t cols = n.inputs[0]->val().cols();
                    double* row = gt->data.data() + n.i0 * cols;
                    for (std::size_t j = 0; j < cols; ++j) row[j] += g[j];
                }
                break;
            }
            case Op::kDivScalar: {
                const double s = n.inputs[1]->scalar_value();
                if (Tensor* gv = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gv)[i] += g[i] / s;
                }
                if (Tensor* gs = grad_sink(n.inputs[1])) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * n.val()[i];
                    (*gs)[0] -= acc / s;
                }
                break;
            }
            case Op::kMulScalar: {
                const double s = n.inputs[1]->scalar_value();
                const Tensor& v = n.inputs[0]->val();
                if (Tensor* gv = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < g.numel(); ++i) (*gv)[i] += g[i] * s;
                }
                if (Tensor* gs = grad_sink(n.inputs[1])) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * v[i];
                    (*gs)[0] += acc;
                }
                break;
            }
            case Op::kCosine: {
                const Tensor& a = n.inputs[0]->val();
                const Tensor& b = n.inputs[1]->val();
                double na = 0.0, nb = 0.0, ab = 0.0;
                for (std::size_t i = 0; i < a.numel(); ++i) {
                    na += a[i] * a[i];
                    nb += b[i] * b[i];
                    ab += a[i] * b[i];
                }
                na = std::sqrt(na);
                nb = std::sqrt(nb);
                if (na < kZeroNorm || nb < kZeroNorm) break;  // flat at the zero convention
                const double inv = 1.0 / (na * nb);
                const double cosv = ab * inv;
                if (Tensor* ga = grad_sink(n.inputs[0])) {
                    for (std::size_t i = 0; i < a.numel(); ++i) {
                        (*ga)[i] += g[0] * (b[i] * inv - cosv * a[i] / (na * na));
                    }
                }
                if (Tensor* gb = grad_sink(n.inputs[1])) {
                    for (std::size_t i = 0; i < b.numel(); ++i) {
                        (*gb)[i] += g[0] * (a[i] * inv - cosv * b[i] / (nb * nb));
                    }
                }
                break;
            }
            case Op::kLeaf:
                break;
        }
    }

    std::deque<Node> nodes_;
    std::unordered_map<ParamEntry*, Node*> param_nodes_;
};

// Value-level softmax for code that runs outside a graph.
inline Tensor softmax(const Tensor& v) {
    if (v.numel() == 0) throw std::invalid_argument("softmax: empty input");
    Tensor out(v.shape);
    Graph::softmax_inplace(v.data, out.data);
    return out;
}

// --- GRU cell ----------------------------------------------------------------
//
// Gate convention (reset applied inside the candidate):
//   r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n  = tanh(W_in x + b_in + r o (W_hn h + b_hn))
//   h' = (1 - z) o n + z o h

struct GruParams {
    Node* w_ir;
    Node* w_iz;
    Node* w_in;
    Node* w_hr;
    Node* w_hz;
    Node* w_hn;
    Node* b_ir;
    Node* b_iz;
    Node* b_in;
    Node* b_hr;
    Node* b_hz;
    Node* b_hn;
};

inline const char* kGruParamNames[] = {"w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn",
                                       "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn"};

inline void register_gru(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                         std::size_t hidden_dim,
                         const std::function<void(Tensor&, const std::string&)>& init) {
    for (const char* name : kGruParamNames) {
        std::string full = prefix + "." + name;
        bool is_bias = name[0] == 'b';
        bool is_input = name[2] == 'i';
        Tensor t = is_bias ? Tensor({hidden_dim})
                           : Tensor({hidden_dim, is_input ? input_dim : hidden_dim});
        init(t, full);
        store.add(full, std::move(t));
    }
}

inline GruParams bind_gru(Graph& g, ParameterStore& store, const std::string& prefix) {
    auto p = [&](const char* name) { return g.param(store, prefix + "." + name); };
    return GruParams{p("w_ir"), p("w_iz"), p("w_in"), p("w_hr"), p("w_hz"), p("w_hn"),
                     p("b_ir"), p("b_iz"), p("b_in"), p("b_hr"), p("b_hz"), p("b_hn")};
}

inline Node* gru_cell(Graph& g, Node* x, Node* h_prev, const GruParams& p) {
    Node* r = g.sigmoid(g.add(g.linear(p.w_ir, x, p.b_ir), g.linear(p.w_hr, h_prev, p.b_hr)));
    Node* z = g.sigmoid(g.add(g.linear(p.w_iz, x, p.b_iz), g.linear(p.w_hz, h_prev, p.b_hz)));
    Node* cand = g.tanh(
        g.add(g.linear(p.w_in, x, p.b_in), g.mul(r, g.linear(p.w_hn, h_prev, p.b_hn))));
    return g.add(g.mul(g.one_minus(z), cand), g.mul(z, h_prev));
}

// --- finite-difference verification -------------------------------------------
//
// build_loss must construct the loss in the supplied graph from the current
// parameter values and be deterministic (run dropout in eval mode). Returns
// the max over all trainable entries of
//   |analytic - central| / max(|analytic|, |central|, 1e-8)
// where |.| is the Euclidean norm over the entry. Central differences carry
// cancellation noise of about machine_eps * |loss| / eps per element, so the
// comparison is made per entry rather than per element.

template <typename BuildLoss>
double grad_check(BuildLoss&& build_loss, ParameterStore& params, double eps) {
    if (eps < 1e-7 || eps > 1e-4) {
        throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
    }
    auto eval = [&]() {
        Graph g;
        Node* loss = build_loss(g, params);
        if (!loss->is_scalar()) throw std::invalid_argument("grad_check: loss must be scalar");
        return loss->scalar_value();
    };
    const double v0 = eval();
    const double v1 = eval();
    if (v0 != v1) {
        throw std::runtime_error("grad_check: loss function is not deterministic");
    }

    params.zero_grads();
    {
        Graph g;
        Node* loss = build_loss(g, params);
        g.backward(loss);
    }

    double worst = 0.0;
    for (auto& entry : params.entries()) {
        if (!entry->trainable) continue;
        double diff2 = 0.0, analytic2 = 0.0, numeric2 = 0.0;
        for (std::size_t i = 0; i < entry->value.numel(); ++i) {
            const double saved = entry->value[i];
            entry->value[i] = saved + eps;
            const double up = eval();
            entry->value[i] = saved - eps;
            const double down = eval();
            entry->value[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = entry->grad[i];
            diff2 += (analytic - numeric) * (analytic - numeric);
            analytic2 += analytic * analytic;
            numeric2 += numeric * numeric;
        }
        const double denom =
            std::max({std::sqrt(analytic2), std::sqrt(numeric2), 1e-8});
        worst = std::max(worst, std::sqrt(diff2) / denom);
    }
    return worst;
}

}  // namespace ad
}  // namespace dialsum
