#pragma once

#include <vector>

#include "mmcse/model.hpp"

namespace mmcse::testing {

inline LinearParams make_linear(Shape wshape, std::vector<double> w,
                                std::vector<double> b) {
    LinearParams lp;
    lp.w = Tensor::from_vector(std::move(wshape), std::move(w), true);
    lp.b = Tensor::from_vector({lp.w.dim(1)}, std::move(b), true);
    return lp;
}

inline LinearParams zero_linear(index_t in, index_t out) {
    return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

inline Tensor identity_matrix(index_t n, double scale = 1.0) {
    Tensor t = Tensor::zeros({n, n}, true);
    for (index_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = scale;
    return t;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && a.values() == b.values();
}

inline bool max_abs_diff_below(const Tensor& a, const Tensor& b, double tol) {
    if (a.shape() != b.shape()) return false;
    for (index_t i = 0; i < a.numel(); ++i) {
        const double d = a.values()[static_cast<std::size_t>(i)] -
                         b.values()[static_cast<std::size_t>(i)];
        if (!(d < tol && d > -tol)) return false;
    }
    return true;
}

}  // namespace mmcse::testing
