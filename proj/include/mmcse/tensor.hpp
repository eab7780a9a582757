#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmcse/errors.hpp"
#include "mmcse/rng.hpp"

namespace mmcse {

using index_t = std::int64_t;
using Shape = std::vector<index_t>;

index_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;

// One recorded primitive application. `fwd` re-executes the primitive from
// explicit input buffers (used by Graph::replay), `bwd` accumulates adjoints
// into the parents' grad buffers.
struct Node {
    const char* op = "";
    std::vector<Tensor> parents;
    std::function<void(const std::vector<const double*>&, double*)> fwd;
    std::function<void(const Tensor& out)> bwd;
};

// Dense row-major 64-bit real tensor. Copies share storage; data is treated
// as immutable once an op has consumed it. Leaf tensors created with
// requires_grad own a same-shape grad buffer from the start, so every copy
// sees accumulated gradients.
class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<double> values,
                              bool requires_grad = false);
    // Uniform in [lo, hi); consumes one Rng draw per element in row-major order.
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                          bool requires_grad = false);
    static Tensor normal(Shape shape, double mean, double stddev, Rng& rng,
                         bool requires_grad = false);

    bool defined() const { return static_cast<bool>(data_); }
    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    index_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    index_t numel() const { return data_ ? static_cast<index_t>(data_->size()) : 0; }

    const double* data() const { return data_->data(); }
    double* mutable_data() { return data_->data(); }
    const std::vector<double>& values() const { return *data_; }

    double item() const;
    double at(std::initializer_list<index_t> idx) const;

    bool requires_grad() const { return requires_grad_; }
    bool has_grad() const { return static_cast<bool>(grad_); }
    const double* grad_data() const { return grad_->data(); }
    double* grad_data() { return grad_->data(); }
    const std::vector<double>& grad() const { return *grad_; }
    void zero_grad();

    bool all_finite() const;
    // Throws ValueError when any entry is non-finite.
    void check_finite(const char* what) const;

    const std::shared_ptr<Node>& node() const { return node_; }
    void set_node(std::shared_ptr<Node> n) { node_ = std::move(n); }

   private:
    Tensor(Shape shape, bool requires_grad);

    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    std::shared_ptr<std::vector<double>> grad_;
    std::shared_ptr<Node> node_;
    bool requires_grad_ = false;
};

// Gradient recording is on unless a NoGradGuard is alive on this thread.
bool grad_enabled();
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Reverse-mode sweep from a scalar loss. Accumulates d loss / d leaf into
// every requires_grad leaf reachable from `loss`; unreachable leaves keep
// whatever their grad buffer holds (zeros after zero_grad).
void backward(const Tensor& loss);

// The recorded applications reachable from a root, in topological order
// (parents first). Replay re-executes every primitive from the leaves
// forward and returns the recomputed root data.
class Graph {
   public:
    explicit Graph(const Tensor& root);
    std::size_t num_applications() const { return topo_.size(); }
    std::vector<double> replay() const;

   private:
    std::vector<Tensor> topo_;
    Tensor root_;
};

// Name of the first recorded op (topological order) whose output holds a
// non-finite value; nullopt when the whole graph is finite.
std::optional<std::string> first_nonfinite_op(const Tensor& root);

}  // namespace mmcse
