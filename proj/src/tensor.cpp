#include "mmcse/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mmcse/kernels.hpp"

namespace mmcse {

index_t shape_numel(const Shape& s) {
    index_t n = 1;
    for (index_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
    for (index_t d : shape_) {
        if (d <= 0)
            throw ShapeError("tensor extents must be positive, got " +
                             shape_str(shape_));
    }
    const auto n = static_cast<std::size_t>(shape_numel(shape_));
    data_ = std::make_shared<std::vector<double>>(n, 0.0);
    if (requires_grad_) grad_ = std::make_shared<std::vector<double>>(n, 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    kernels::fill(t.mutable_data(), value, t.numel());
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values,
                           bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<index_t>(values.size()) != t.numel())
        throw ShapeError("from_vector: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(t.shape()));
    *t.data_ = std::move(values);
    t.check_finite("from_vector");
    return t;
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    double* d = t.mutable_data();
    const index_t n = t.numel();
    for (index_t i = 0; i < n; ++i) d[i] = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, Rng& rng,
                      bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    double* d = t.mutable_data();
    const index_t n = t.numel();
    for (index_t i = 0; i < n; ++i) d[i] = mean + stddev * rng.normal();
    return t;
}

double Tensor::item() const {
    if (numel() != 1)
        throw ShapeError("item: tensor has shape " + shape_str(shape_));
    return (*data_)[0];
}

double Tensor::at(std::initializer_list<index_t> idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw ShapeError("at: index rank mismatch for shape " +
                         shape_str(shape_));
    index_t flat = 0;
    int i = 0;
    for (index_t v : idx) {
        if (v < 0 || v >= shape_[static_cast<std::size_t>(i)])
            throw ShapeError("at: index out of range for shape " +
                             shape_str(shape_));
        flat = flat * shape_[static_cast<std::size_t>(i)] + v;
        ++i;
    }
    return (*data_)[static_cast<std::size_t>(flat)];
}

void Tensor::zero_grad() {
    if (grad_) kernels::fill(grad_->data(), 0.0, static_cast<index_t>(grad_->size()));
}

bool Tensor::all_finite() const {
    return kernels::all_finite(data(), numel());
}

void Tensor::check_finite(const char* what) const {
    if (!all_finite())
        throw ValueError(std::string(what) + ": tensor contains non-finite values");
}

namespace {

thread_local int g_no_grad_depth = 0;

// Post-order DFS over recorded nodes; parents come before children. Order is
// fixed by construction order, never by pointer values.
std::vector<Tensor> topo_order(const Tensor& root) {
    std::vector<Tensor> order;
    if (!root.node()) return order;
    std::unordered_set<const Node*> visited;
    std::vector<std::pair<Tensor, std::size_t>> stack;
    visited.insert(root.node().get());
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
        const std::size_t top = stack.size() - 1;
        Tensor t = stack[top].first;
        std::size_t ci = stack[top].second;
        const auto& parents = t.node()->parents;
        bool pushed = false;
        while (ci < parents.size()) {
            const Tensor& p = parents[ci];
            ++ci;
            if (p.node() && visited.insert(p.node().get()).second) {
                stack[top].second = ci;
                stack.emplace_back(p, 0);
                pushed = true;
                break;
            }
        }
        if (!pushed) {
            order.push_back(t);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ShapeError("backward: loss must be a scalar, got shape " +
                         shape_str(loss.shape()));
    if (!loss.requires_grad()) return;
    Tensor seed = loss;
    seed.grad_data()[0] = 1.0;
    std::vector<Tensor> order = topo_order(loss);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        it->node()->bwd(*it);
    }
}

Graph::Graph(const Tensor& root) : topo_(topo_order(root)), root_(root) {}

std::vector<double> Graph::replay() const {
    std::unordered_map<const Node*, std::shared_ptr<std::vector<double>>> computed;
    for (const Tensor& t : topo_) {
        std::vector<const double*> ins;
        ins.reserve(t.node()->parents.size());
        for (const Tensor& p : t.node()->parents) {
            if (p.node())
                ins.push_back(computed.at(p.node().get())->data());
            else
                ins.push_back(p.data());
        }
        auto buf = std::make_shared<std::vector<double>>(
            static_cast<std::size_t>(t.numel()));
        t.node()->fwd(ins, buf->data());
        computed[t.node().get()] = std::move(buf);
    }
    if (!root_.node()) return root_.values();
    return *computed.at(root_.node().get());
}

std::optional<std::string> first_nonfinite_op(const Tensor& root) {
    for (const Tensor& t : topo_order(root)) {
        if (!t.all_finite()) return std::string(t.node()->op);
    }
    return std::nullopt;
}

}  // namespace mmcse
