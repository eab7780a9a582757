#include "mmcse/ops.hpp"

#include <utility>

#include "mmcse/kernels.hpp"

namespace mmcse::ops {

namespace {

using Fwd = std::function<void(const std::vector<const double*>&, double*)>;
using Bwd = std::function<void(const Tensor&)>;

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts) {
        if (t.requires_grad()) return true;
    }
    return false;
}

// Runs `fwd` on the parents' buffers and, when recording, attaches the node.
Tensor run_op(const char* name, Shape out_shape, std::vector<Tensor> parents,
              Fwd fwd, Bwd bwd) {
    const bool rec = grad_enabled() && any_requires_grad(parents);
    Tensor out = Tensor::zeros(std::move(out_shape), rec);
    std::vector<const double*> ins;
    ins.reserve(parents.size());
    for (const auto& p : parents) ins.push_back(p.data());
    fwd(ins, out.mutable_data());
    if (rec) {
        auto node = std::make_shared<Node>();
        node->op = name;
        node->parents = std::move(parents);
        node->fwd = std::move(fwd);
        node->bwd = std::move(bwd);
        out.set_node(std::move(node));
    }
    return out;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_defined(const char* op, const Tensor& t) {
    if (!t.defined())
        throw ShapeError(std::string(op) + ": undefined tensor");
}

index_t last_dim(const Tensor& t) {
    return t.shape().back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_defined("add", a);
    check_same_shape("add", a, b);
    const index_t n = a.numel();
    return run_op(
        "add", a.shape(), {a, b},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::add(o, in[0], in[1], n);
        },
        [n](const Tensor& o) {
            auto& ps = o.node()->parents;
            if (ps[0].requires_grad()) kernels::acc(ps[0].grad_data(), o.grad_data(), n);
            if (ps[1].requires_grad()) kernels::acc(ps[1].grad_data(), o.grad_data(), n);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_defined("sub", a);
    check_same_shape("sub", a, b);
    const index_t n = a.numel();
    return run_op(
        "sub", a.shape(), {a, b},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::sub(o, in[0], in[1], n);
        },
        [n](const Tensor& o) {
            auto& ps = o.node()->parents;
            if (ps[0].requires_grad()) kernels::acc(ps[0].grad_data(), o.grad_data(), n);
            if (ps[1].requires_grad())
                kernels::acc_scaled(ps[1].grad_data(), o.grad_data(), -1.0, n);
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_defined("mul", a);
    check_same_shape("mul", a, b);
    const index_t n = a.numel();
    return run_op(
        "mul", a.shape(), {a, b},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::mul(o, in[0], in[1], n);
        },
        [n](const Tensor& o) {
            auto& ps = o.node()->parents;
            if (ps[0].requires_grad())
                kernels::acc_mul(ps[0].grad_data(), o.grad_data(), ps[1].data(), n);
            if (ps[1].requires_grad())
                kernels::acc_mul(ps[1].grad_data(), o.grad_data(), ps[0].data(), n);
        });
}

Tensor scale(const Tensor& a, double s) {
    check_defined("scale", a);
    const index_t n = a.numel();
    return run_op(
        "scale", a.shape(), {a},
        [n, s](const std::vector<const double*>& in, double* o) {
            kernels::scale(o, in[0], s, n);
        },
        [n, s](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_scaled(p.grad_data(), o.grad_data(), s, n);
        });
}

Tensor relu(const Tensor& x) {
    check_defined("relu", x);
    const index_t n = x.numel();
    return run_op(
        "relu", x.shape(), {x},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::relu(o, in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_relu_grad(p.grad_data(), o.grad_data(), p.data(), n);
        });
}

Tensor sigmoid(const Tensor& x) {
    check_defined("sigmoid", x);
    const index_t n = x.numel();
    return run_op(
        "sigmoid", x.shape(), {x},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::sigmoid(o, in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_sigmoid_grad(p.grad_data(), o.grad_data(), o.data(), n);
        });
}

Tensor exp(const Tensor& x) {
    check_defined("exp", x);
    const index_t n = x.numel();
    return run_op(
        "exp", x.shape(), {x},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::exp_(o, in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_exp_grad(p.grad_data(), o.grad_data(), o.data(), n);
        });
}

Tensor log(const Tensor& x) {
    check_defined("log", x);
    const index_t n = x.numel();
    return run_op(
        "log", x.shape(), {x},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::log_(o, in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_log_grad(p.grad_data(), o.grad_data(), p.data(), n);
        });
}

Tensor abs(const Tensor& x) {
    check_defined("abs", x);
    const index_t n = x.numel();
    return run_op(
        "abs", x.shape(), {x},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::abs_(o, in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_abs_grad(p.grad_data(), o.grad_data(), p.data(), n);
        });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    check_defined("clamp", x);
    const index_t n = x.numel();
    return run_op(
        "clamp", x.shape(), {x},
        [n, lo, hi](const std::vector<const double*>& in, double* o) {
            kernels::clamp(o, in[0], lo, hi, n);
        },
        [n, lo, hi](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::acc_clamp_grad(p.grad_data(), o.grad_data(), p.data(),
                                        lo, hi, n);
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined("matmul", a);
    check_defined("matmul", b);
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    const index_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    return run_op(
        "matmul", {m, n}, {a, b},
        [m, k, n](const std::vector<const double*>& in, double* o) {
            kernels::matmul(o, in[0], in[1], m, k, n, false);
        },
        [m, k, n](const Tensor& o) {
            auto& ps = o.node()->parents;
            // dA += G * B^T, dB += A^T * G
            if (ps[0].requires_grad())
                kernels::matmul_nt(ps[0].grad_data(), o.grad_data(), ps[1].data(),
                                   m, n, k, true);
            if (ps[1].requires_grad())
                kernels::matmul_tn(ps[1].grad_data(), ps[0].data(), o.grad_data(),
                                   k, m, n, true);
        });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    check_defined("bmm", a);
    check_defined("bmm", b);
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(1))
        throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    const index_t bt = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    return run_op(
        "bmm", {bt, m, n}, {a, b},
        [bt, m, k, n](const std::vector<const double*>& in, double* o) {
            kernels::bmm(o, in[0], in[1], bt, m, k, n, false);
        },
        [bt, m, k, n](const Tensor& o) {
            auto& ps = o.node()->parents;
            if (ps[0].requires_grad())
                kernels::bmm_nt(ps[0].grad_data(), o.grad_data(), ps[1].data(),
                                bt, m, n, k, true);
            if (ps[1].requires_grad())
                kernels::bmm_tn(ps[1].grad_data(), ps[0].data(), o.grad_data(),
                                bt, k, m, n, true);
        });
}

Tensor transpose_last2(const Tensor& x) {
    check_defined("transpose_last2", x);
    if (x.rank() < 2)
        throw ShapeError("transpose_last2: needs rank >= 2, got " +
                         shape_str(x.shape()));
    Shape out_shape = x.shape();
    const auto r = out_shape.size();
    std::swap(out_shape[r - 2], out_shape[r - 1]);
    const index_t rows = x.dim(static_cast<int>(r) - 2);
    const index_t cols = x.dim(static_cast<int>(r) - 1);
    const index_t batch = x.numel() / (rows * cols);
    return run_op(
        "transpose_last2", std::move(out_shape), {x},
        [batch, rows, cols](const std::vector<const double*>& in, double* o) {
            kernels::transpose_last2(o, in[0], batch, rows, cols);
        },
        [batch, rows, cols](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::transpose_last2_acc(p.grad_data(), o.grad_data(), batch,
                                             rows, cols);
        });
}

Tensor reshape(const Tensor& x, Shape shape) {
    check_defined("reshape", x);
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(shape));
    const index_t n = x.numel();
    return run_op(
        "reshape", std::move(shape), {x},
        [n](const std::vector<const double*>& in, double* o) {
            kernels::copy(o, in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad()) kernels::acc(p.grad_data(), o.grad_data(), n);
        });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_last: no inputs");
    for (const auto& p : parts) check_defined("concat_last", p);
    Shape lead = parts[0].shape();
    lead.pop_back();
    index_t total = 0;
    std::vector<index_t> widths;
    for (const auto& p : parts) {
        Shape pl = p.shape();
        const index_t w = pl.back();
        pl.pop_back();
        if (pl != lead)
            throw ShapeError("concat_last: leading shape mismatch " +
                             shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        widths.push_back(w);
        total += w;
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    const index_t rows = shape_numel(lead);
    return run_op(
        "concat_last", std::move(out_shape), parts,
        [rows, widths, total](const std::vector<const double*>& in, double* o) {
            for (index_t r = 0; r < rows; ++r) {
                index_t off = 0;
                for (std::size_t s = 0; s < widths.size(); ++s) {
                    const index_t w = widths[s];
                    for (index_t j = 0; j < w; ++j)
                        o[r * total + off + j] = in[s][r * w + j];
                    off += w;
                }
            }
        },
        [rows, widths, total](const Tensor& o) {
            auto& ps = o.node()->parents;
            const double* g = o.grad_data();
            index_t off = 0;
            for (std::size_t s = 0; s < widths.size(); ++s) {
                const index_t w = widths[s];
                if (ps[s].requires_grad()) {
                    double* pg = ps[s].grad_data();
                    for (index_t r = 0; r < rows; ++r)
                        for (index_t j = 0; j < w; ++j)
                            pg[r * w + j] += g[r * total + off + j];
                }
                off += w;
            }
        });
}

Tensor slice_last(const Tensor& x, index_t offset, index_t length) {
    check_defined("slice_last", x);
    const index_t width = last_dim(x);
    if (offset < 0 || length <= 0 || offset + length > width)
        throw ShapeError("slice_last: [" + std::to_string(offset) + "," +
                         std::to_string(offset + length) + ") out of range for " +
                         shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape.back() = length;
    const index_t rows = x.numel() / width;
    return run_op(
        "slice_last", std::move(out_shape), {x},
        [rows, width, offset, length](const std::vector<const double*>& in,
                                      double* o) {
            for (index_t r = 0; r < rows; ++r)
                for (index_t j = 0; j < length; ++j)
                    o[r * length + j] = in[0][r * width + offset + j];
        },
        [rows, width, offset, length](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (!p.requires_grad()) return;
            double* pg = p.grad_data();
            const double* g = o.grad_data();
            for (index_t r = 0; r < rows; ++r)
                for (index_t j = 0; j < length; ++j)
                    pg[r * width + offset + j] += g[r * length + j];
        });
}

std::vector<Tensor> split_last(const Tensor& x,
                               const std::vector<index_t>& sizes) {
    index_t total = 0;
    for (index_t s : sizes) total += s;
    if (total != last_dim(x))
        throw ShapeError("split_last: sizes do not tile the last axis of " +
                         shape_str(x.shape()));
    std::vector<Tensor> out;
    index_t off = 0;
    for (index_t s : sizes) {
        out.push_back(slice_last(x, off, s));
        off += s;
    }
    return out;
}

Tensor broadcast_axis(const Tensor& x, int axis, index_t n) {
    check_defined("broadcast_axis", x);
    if (axis < 0 || axis > x.rank())
        throw ShapeError("broadcast_axis: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(x.shape()));
    if (n <= 0) throw ShapeError("broadcast_axis: extent must be positive");
    Shape out_shape = x.shape();
    out_shape.insert(out_shape.begin() + axis, n);
    index_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis; i < x.rank(); ++i) inner *= x.dim(i);
    return run_op(
        "broadcast_axis", std::move(out_shape), {x},
        [outer, n, inner](const std::vector<const double*>& in, double* o) {
            kernels::broadcast_axis(o, in[0], outer, n, inner);
        },
        [outer, n, inner](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (!p.requires_grad()) return;
            double* pg = p.grad_data();
            const double* g = o.grad_data();
            for (index_t oi = 0; oi < outer; ++oi)
                for (index_t m = 0; m < n; ++m)
                    for (index_t i = 0; i < inner; ++i)
                        pg[oi * inner + i] += g[(oi * n + m) * inner + i];
        });
}

namespace {

Tensor reduce_axis_op(const char* name, const Tensor& x, int axis, bool mean) {
    if (axis < 0 || axis >= x.rank())
        throw ShapeError(std::string(name) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    const index_t n = out_shape[static_cast<std::size_t>(axis)];
    out_shape.erase(out_shape.begin() + axis);
    if (out_shape.empty()) out_shape.push_back(1);
    index_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    const double gscale = mean ? 1.0 / static_cast<double>(n) : 1.0;
    return run_op(
        name, std::move(out_shape), {x},
        [outer, n, inner, mean](const std::vector<const double*>& in, double* o) {
            kernels::reduce_axis(o, in[0], outer, n, inner, mean);
        },
        [outer, n, inner, gscale](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::broadcast_axis_acc(p.grad_data(), o.grad_data(), outer,
                                            n, inner, gscale);
        });
}

}  // namespace

Tensor sum_axis(const Tensor& x, int axis) {
    check_defined("sum_axis", x);
    return reduce_axis_op("sum_axis", x, axis, false);
}

Tensor mean_axis(const Tensor& x, int axis) {
    check_defined("mean_axis", x);
    return reduce_axis_op("mean_axis", x, axis, true);
}

Tensor sum_all(const Tensor& x) {
    check_defined("sum_all", x);
    const index_t n = x.numel();
    return run_op(
        "sum_all", {1}, {x},
        [n](const std::vector<const double*>& in, double* o) {
            o[0] = kernels::sum_all(in[0], n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (!p.requires_grad()) return;
            const double g = o.grad_data()[0];
            double* pg = p.grad_data();
            for (index_t i = 0; i < n; ++i) pg[i] += g;
        });
}

Tensor mean_all(const Tensor& x) {
    check_defined("mean_all", x);
    const index_t n = x.numel();
    return run_op(
        "mean_all", {1}, {x},
        [n](const std::vector<const double*>& in, double* o) {
            // division (not reciprocal multiply) keeps exact cases exact
            o[0] = kernels::sum_all(in[0], n) / static_cast<double>(n);
        },
        [n](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (!p.requires_grad()) return;
            const double g = o.grad_data()[0] / static_cast<double>(n);
            double* pg = p.grad_data();
            for (index_t i = 0; i < n; ++i) pg[i] += g;
        });
}

Tensor softmax_last(const Tensor& x) {
    check_defined("softmax_last", x);
    if (x.numel() == 0 || x.rank() < 1)
        throw ShapeError("softmax_last: empty input");
    x.check_finite("softmax_last");
    const index_t cols = last_dim(x);
    const index_t rows = x.numel() / cols;
    return run_op(
        "softmax_last", x.shape(), {x},
        [rows, cols](const std::vector<const double*>& in, double* o) {
            kernels::softmax_rows(o, in[0], rows, cols);
        },
        [rows, cols](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::softmax_rows_acc_grad(p.grad_data(), o.grad_data(),
                                               o.data(), rows, cols);
        });
}

Tensor l2_normalize_last(const Tensor& x, double eps) {
    check_defined("l2_normalize_last", x);
    if (eps <= 0.0) throw ValueError("l2_normalize_last: eps must be positive");
    const index_t cols = last_dim(x);
    const index_t rows = x.numel() / cols;
    return run_op(
        "l2_normalize_last", x.shape(), {x},
        [rows, cols, eps](const std::vector<const double*>& in, double* o) {
            kernels::l2norm_rows(o, in[0], rows, cols, eps);
        },
        [rows, cols, eps](const Tensor& o) {
            auto& p = o.node()->parents[0];
            if (p.requires_grad())
                kernels::l2norm_rows_acc_grad(p.grad_data(), o.grad_data(),
                                              p.data(), rows, cols, eps);
        });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_defined("linear", x);
    check_defined("linear", w);
    if (w.rank() != 2 || last_dim(x) != w.dim(0))
        throw ShapeError("linear: input " + shape_str(x.shape()) +
                         " incompatible with weight " + shape_str(w.shape()));
    const index_t in_dim = w.dim(0), out_dim = w.dim(1);
    const index_t rows = x.numel() / in_dim;
    Tensor x2 = x.rank() == 2 ? x : reshape(x, {rows, in_dim});
    Tensor y = matmul(x2, w);
    if (b.defined()) {
        if (b.rank() != 1 || b.dim(0) != out_dim)
            throw ShapeError("linear: bias " + shape_str(b.shape()) +
                             " incompatible with weight " + shape_str(w.shape()));
        y = add(y, broadcast_axis(b, 0, rows));
    }
    if (x.rank() == 2) return y;
    Shape out_shape = x.shape();
    out_shape.back() = out_dim;
    return reshape(y, std::move(out_shape));
}

}  // namespace mmcse::ops
