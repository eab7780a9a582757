#include "mmcse/gradcheck.hpp"

#include <cmath>

namespace mmcse {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
    NoGradGuard ng;
    const Tensor out = f();
    if (out.numel() != 1)
        throw ShapeError("grad_check: f must return a scalar, got " +
                         shape_str(out.shape()));
    const double v = out.item();
    if (!std::isfinite(v)) throw NumericError("grad_check: f is non-finite");
    return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<NamedLeaf>& leaves, double step) {
    if (step <= 0.0) throw ValueError("grad_check: step must be positive");
    for (const auto& leaf : leaves) {
        if (!leaf.tensor.requires_grad())
            throw ValueError("grad_check: leaf '" + leaf.name +
                             "' does not require gradients");
    }

    // Analytic pass.
    for (const auto& leaf : leaves) {
        Tensor t = leaf.tensor;
        t.zero_grad();
    }
    Tensor loss = f();
    if (loss.numel() != 1)
        throw ShapeError("grad_check: f must return a scalar, got " +
                         shape_str(loss.shape()));
    if (!std::isfinite(loss.item()))
        throw NumericError("grad_check: f is non-finite at the base point");
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& leaf : leaves) analytic.push_back(leaf.tensor.grad());

    // Central differences, one entry at a time.
    GradCheckReport report;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor t = leaves[li].tensor;
        double* vals = t.mutable_data();
        const index_t n = t.numel();
        for (index_t i = 0; i < n; ++i) {
            const double saved = vals[i];
            vals[i] = saved + step;
            const double fp = eval_scalar(f);
            vals[i] = saved - step;
            const double fm = eval_scalar(f);
            vals[i] = saved;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[li][static_cast<std::size_t>(i)];
            const double denom = std::max({1.0, std::fabs(an), std::fabs(fd)});
            const double rel = std::fabs(an - fd) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_leaf = leaves[li].name;
                report.worst_index = i;
                report.analytic = an;
                report.numeric = fd;
            }
        }
    }
    return report;
}

}  // namespace mmcse
