#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmcse/tensor.hpp"

namespace mmcse {

// A named leaf handed to the gradient checker. The tensor must require
// gradients; the checker perturbs its storage in place and restores it.
struct NamedLeaf {
    std::string name;
    Tensor tensor;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_leaf;
    index_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares reverse-mode gradients of `f` against central finite differences
// over every entry of every leaf. `f` must rebuild its forward pass from the
// leaves' current values on each call and return a scalar. The error metric
// is |analytic - fd| / max(1, |analytic|, |fd|), maximized over entries.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<NamedLeaf>& leaves,
                           double step = 1e-5);

}  // namespace mmcse
