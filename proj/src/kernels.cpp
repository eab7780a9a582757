#include "mmcse/kernels.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <vector>

namespace mmcse::kernels {

namespace {

std::atomic<Mode> g_mode{Mode::Parallel};

// Work below this many flops/elements is not worth forking a team for.
// Purely a scheduling decision; results are identical either way.
constexpr index_t kParallelCutoff = 1 << 14;

inline bool go_parallel(index_t work) {
    return g_mode.load(std::memory_order_relaxed) == Mode::Parallel &&
           work >= kParallelCutoff && omp_get_max_threads() > 1;
}

}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }
void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}
int max_threads() { return omp_get_max_threads(); }

// Elementwise loops share this dispatcher; each index writes one slot, so the
// pragma cannot change results.
template <typename F>
static inline void for_each(index_t n, F&& f) {
    if (go_parallel(n)) {
#pragma omp parallel for schedule(static)
        for (index_t i = 0; i < n; ++i) f(i);
    } else {
        for (index_t i = 0; i < n; ++i) f(i);
    }
}

void add(double* out, const double* a, const double* b, index_t n) {
    for_each(n, [=](index_t i) { out[i] = a[i] + b[i]; });
}
void sub(double* out, const double* a, const double* b, index_t n) {
    for_each(n, [=](index_t i) { out[i] = a[i] - b[i]; });
}
void mul(double* out, const double* a, const double* b, index_t n) {
    for_each(n, [=](index_t i) { out[i] = a[i] * b[i]; });
}
void scale(double* out, const double* a, double s, index_t n) {
    for_each(n, [=](index_t i) { out[i] = a[i] * s; });
}
void relu(double* out, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] = x[i] > 0.0 ? x[i] : 0.0; });
}
void sigmoid(double* out, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] = 1.0 / (1.0 + std::exp(-x[i])); });
}
void exp_(double* out, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] = std::exp(x[i]); });
}
void log_(double* out, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] = std::log(x[i]); });
}
void abs_(double* out, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] = std::fabs(x[i]); });
}
void clamp(double* out, const double* x, double lo, double hi, index_t n) {
    for_each(n, [=](index_t i) {
        out[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
    });
}
void fill(double* out, double v, index_t n) {
    for_each(n, [=](index_t i) { out[i] = v; });
}
void copy(double* out, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] = x[i]; });
}

void acc(double* out, const double* g, index_t n) {
    for_each(n, [=](index_t i) { out[i] += g[i]; });
}
void acc_scaled(double* out, const double* g, double s, index_t n) {
    for_each(n, [=](index_t i) { out[i] += g[i] * s; });
}
void acc_mul(double* out, const double* g, const double* h, index_t n) {
    for_each(n, [=](index_t i) { out[i] += g[i] * h[i]; });
}
void acc_relu_grad(double* out, const double* g, const double* x, index_t n) {
    for_each(n, [=](index_t i) {
        if (x[i] > 0.0) out[i] += g[i];
    });
}
void acc_sigmoid_grad(double* out, const double* g, const double* y,
                      index_t n) {
    for_each(n, [=](index_t i) { out[i] += g[i] * y[i] * (1.0 - y[i]); });
}
void acc_exp_grad(double* out, const double* g, const double* y, index_t n) {
    for_each(n, [=](index_t i) { out[i] += g[i] * y[i]; });
}
void acc_log_grad(double* out, const double* g, const double* x, index_t n) {
    for_each(n, [=](index_t i) { out[i] += g[i] / x[i]; });
}
void acc_abs_grad(double* out, const double* g, const double* x, index_t n) {
    for_each(n, [=](index_t i) {
        if (x[i] > 0.0)
            out[i] += g[i];
        else if (x[i] < 0.0)
            out[i] -= g[i];
    });
}
void acc_clamp_grad(double* out, const double* g, const double* x, double lo,
                    double hi, index_t n) {
    for_each(n, [=](index_t i) {
        if (x[i] > lo && x[i] < hi) out[i] += g[i];
    });
}

// ---- matrix products ----

namespace {

// One output row; the k-loop order fixes the accumulation order.
inline void matmul_row(double* c, const double* a, const double* b, index_t k,
                       index_t n, bool accumulate, index_t i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    if (!accumulate) {
        for (index_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (index_t kk = 0; kk < k; ++kk) {
        const double aik = ai[kk];
        const double* bk = b + kk * n;
        for (index_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
}

inline void matmul_tn_row(double* c, const double* a, const double* b,
                          index_t m, index_t k, index_t n, bool accumulate,
                          index_t i) {
    // a stored [k, m]; row i of A^T is column i of a.
    double* ci = c + i * n;
    if (!accumulate) {
        for (index_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (index_t kk = 0; kk < k; ++kk) {
        const double aik = a[kk * m + i];
        const double* bk = b + kk * n;
        for (index_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
}

inline void matmul_nt_row(double* c, const double* a, const double* b,
                          index_t k, index_t n, bool accumulate, index_t i) {
    // b stored [n, k]; C[i,j] = dot(a_row_i, b_row_j).
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (index_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double s = 0.0;
        for (index_t kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
        ci[j] = accumulate ? ci[j] + s : s;
    }
}

}  // namespace

void matmul(double* c, const double* a, const double* b, index_t m, index_t k,
            index_t n, bool accumulate) {
    if (go_parallel(m * k * n)) {
#pragma omp parallel for schedule(static)
        for (index_t i = 0; i < m; ++i) matmul_row(c, a, b, k, n, accumulate, i);
    } else {
        for (index_t i = 0; i < m; ++i) matmul_row(c, a, b, k, n, accumulate, i);
    }
}

void matmul_tn(double* c, const double* a, const double* b, index_t m,
               index_t k, index_t n, bool accumulate) {
    if (go_parallel(m * k * n)) {
#pragma omp parallel for schedule(static)
        for (index_t i = 0; i < m; ++i)
            matmul_tn_row(c, a, b, m, k, n, accumulate, i);
    } else {
        for (index_t i = 0; i < m; ++i)
            matmul_tn_row(c, a, b, m, k, n, accumulate, i);
    }
}

void matmul_nt(double* c, const double* a, const double* b, index_t m,
               index_t k, index_t n, bool accumulate) {
    if (go_parallel(m * k * n)) {
#pragma omp parallel for schedule(static)
        for (index_t i = 0; i < m; ++i)
            matmul_nt_row(c, a, b, k, n, accumulate, i);
    } else {
        for (index_t i = 0; i < m; ++i)
            matmul_nt_row(c, a, b, k, n, accumulate, i);
    }
}

void bmm(double* c, const double* a, const double* b, index_t batch, index_t m,
         index_t k, index_t n, bool accumulate) {
    if (go_parallel(batch * m * k * n)) {
#pragma omp parallel for collapse(2) schedule(static)
        for (index_t bt = 0; bt < batch; ++bt)
            for (index_t i = 0; i < m; ++i)
                matmul_row(c + bt * m * n, a + bt * m * k, b + bt * k * n, k, n,
                           accumulate, i);
    } else {
        for (index_t bt = 0; bt < batch; ++bt)
            for (index_t i = 0; i < m; ++i)
                matmul_row(c + bt * m * n, a + bt * m * k, b + bt * k * n, k, n,
                           accumulate, i);
    }
}

void bmm_tn(double* c, const double* a, const double* b, index_t batch,
            index_t m, index_t k, index_t n, bool accumulate) {
    for (index_t bt = 0; bt < batch; ++bt)
        matmul_tn(c + bt * m * n, a + bt * k * m, b + bt * k * n, m, k, n,
                  accumulate);
}

void bmm_nt(double* c, const double* a, const double* b, index_t batch,
            index_t m, index_t k, index_t n, bool accumulate) {
    for (index_t bt = 0; bt < batch; ++bt)
        matmul_nt(c + bt * m * n, a + bt * m * k, b + bt * n * k, m, k, n,
                  accumulate);
}

void transpose_last2(double* out, const double* x, index_t batch, index_t rows,
                     index_t cols) {
    for_each(batch * rows * cols, [=](index_t idx) {
        const index_t b = idx / (rows * cols);
        const index_t r = (idx / cols) % rows;
        const index_t c = idx % cols;
        out[b * rows * cols + c * rows + r] = x[idx];
    });
}

void transpose_last2_acc(double* out, const double* g, index_t batch,
                         index_t rows, index_t cols) {
    for_each(batch * rows * cols, [=](index_t idx) {
        const index_t b = idx / (rows * cols);
        const index_t r = (idx / cols) % rows;
        const index_t c = idx % cols;
        out[idx] += g[b * rows * cols + c * rows + r];
    });
}

// ---- row-wise maps ----

namespace {

inline void softmax_row(double* out, const double* x, index_t cols,
                        index_t r) {
    const double* xr = x + r * cols;
    double* yr = out + r * cols;
    double mx = xr[0];
    for (index_t j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
    double sum = 0.0;
    for (index_t j = 0; j < cols; ++j) {
        yr[j] = std::exp(xr[j] - mx);
        sum += yr[j];
    }
    for (index_t j = 0; j < cols; ++j) yr[j] /= sum;
}

inline void l2norm_row(double* out, const double* x, index_t cols, double eps,
                       index_t r) {
    const double* xr = x + r * cols;
    double* yr = out + r * cols;
    double sq = 0.0;
    for (index_t j = 0; j < cols; ++j) sq += xr[j] * xr[j];
    const double norm = std::sqrt(sq);
    const double denom = norm > eps ? norm : eps;
    for (index_t j = 0; j < cols; ++j) yr[j] = xr[j] / denom;
}

}  // namespace

void softmax_rows(double* out, const double* x, index_t rows, index_t cols) {
    if (go_parallel(rows * cols)) {
#pragma omp parallel for schedule(static)
        for (index_t r = 0; r < rows; ++r) softmax_row(out, x, cols, r);
    } else {
        for (index_t r = 0; r < rows; ++r) softmax_row(out, x, cols, r);
    }
}

void softmax_rows_acc_grad(double* dx, const double* g, const double* y,
                           index_t rows, index_t cols) {
    if (go_parallel(rows * cols)) {
#pragma omp parallel for schedule(static)
        for (index_t r = 0; r < rows; ++r) {
            const double* gr = g + r * cols;
            const double* yr = y + r * cols;
            double dot = 0.0;
            for (index_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
            for (index_t j = 0; j < cols; ++j)
                dx[r * cols + j] += yr[j] * (gr[j] - dot);
        }
    } else {
        for (index_t r = 0; r < rows; ++r) {
            const double* gr = g + r * cols;
            const double* yr = y + r * cols;
            double dot = 0.0;
            for (index_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
            for (index_t j = 0; j < cols; ++j)
                dx[r * cols + j] += yr[j] * (gr[j] - dot);
        }
    }
}

void l2norm_rows(double* out, const double* x, index_t rows, index_t cols,
                 double eps) {
    if (go_parallel(rows * cols)) {
#pragma omp parallel for schedule(static)
        for (index_t r = 0; r < rows; ++r) l2norm_row(out, x, cols, eps, r);
    } else {
        for (index_t r = 0; r < rows; ++r) l2norm_row(out, x, cols, eps, r);
    }
}

void l2norm_rows_acc_grad(double* dx, const double* g, const double* x,
                          index_t rows, index_t cols, double eps) {
    for (index_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        const double* gr = g + r * cols;
        double sq = 0.0;
        for (index_t j = 0; j < cols; ++j) sq += xr[j] * xr[j];
        const double norm = std::sqrt(sq);
        if (norm <= eps) continue;  // constant-zero region
        double dot = 0.0;
        for (index_t j = 0; j < cols; ++j) dot += xr[j] * gr[j];
        const double inv = 1.0 / norm;
        const double inv3 = inv * inv * inv;
        for (index_t j = 0; j < cols; ++j)
            dx[r * cols + j] += gr[j] * inv - xr[j] * dot * inv3;
    }
}

// ---- reductions / broadcasts ----

void reduce_axis(double* out, const double* x, index_t outer, index_t n,
                 index_t inner, bool mean) {
    const index_t total = outer * inner;
    for_each(total, [=](index_t idx) {
        const index_t o = idx / inner;
        const index_t i = idx % inner;
        double s = 0.0;
        for (index_t m = 0; m < n; ++m) s += x[(o * n + m) * inner + i];
        out[idx] = mean ? s / static_cast<double>(n) : s;
    });
}

void broadcast_axis_acc(double* dx, const double* g, index_t outer, index_t n,
                        index_t inner, double s) {
    for_each(outer * n * inner, [=](index_t idx) {
        const index_t o = idx / (n * inner);
        const index_t i = idx % inner;
        dx[idx] += g[o * inner + i] * s;
    });
}

void broadcast_axis(double* out, const double* x, index_t outer, index_t n,
                    index_t inner) {
    for_each(outer * n * inner, [=](index_t idx) {
        const index_t o = idx / (n * inner);
        const index_t i = idx % inner;
        out[idx] = x[o * inner + i];
    });
}

double sum_all(const double* x, index_t n) {
    // Fixed 4096-wide blocks, partials combined in block order. The block
    // grid does not depend on the thread count, so the result is stable.
    constexpr index_t kBlock = 4096;
    const index_t nblocks = (n + kBlock - 1) / kBlock;
    if (nblocks <= 1) {
        double s = 0.0;
        for (index_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
    if (go_parallel(n)) {
#pragma omp parallel for schedule(static)
        for (index_t b = 0; b < nblocks; ++b) {
            const index_t lo = b * kBlock;
            const index_t hi = lo + kBlock < n ? lo + kBlock : n;
            double s = 0.0;
            for (index_t i = lo; i < hi; ++i) s += x[i];
            partial[static_cast<std::size_t>(b)] = s;
        }
    } else {
        for (index_t b = 0; b < nblocks; ++b) {
            const index_t lo = b * kBlock;
            const index_t hi = lo + kBlock < n ? lo + kBlock : n;
            double s = 0.0;
            for (index_t i = lo; i < hi; ++i) s += x[i];
            partial[static_cast<std::size_t>(b)] = s;
        }
    }
    double total = 0.0;
    for (index_t b = 0; b < nblocks; ++b)
        total += partial[static_cast<std::size_t>(b)];
    return total;
}

bool all_finite(const double* x, index_t n) {
    for (index_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) return false;
    }
    return true;
}

// ---- serial reference ----

namespace ref {

void matmul(double* c, const double* a, const double* b, index_t m, index_t k,
            index_t n, bool accumulate) {
    for (index_t i = 0; i < m; ++i) {
        if (!accumulate) {
            for (index_t j = 0; j < n; ++j) c[i * n + j] = 0.0;
        }
        for (index_t kk = 0; kk < k; ++kk) {
            for (index_t j = 0; j < n; ++j)
                c[i * n + j] += a[i * k + kk] * b[kk * n + j];
        }
    }
}

void bmm(double* c, const double* a, const double* b, index_t batch, index_t m,
         index_t k, index_t n, bool accumulate) {
    for (index_t bt = 0; bt < batch; ++bt)
        ref::matmul(c + bt * m * n, a + bt * m * k, b + bt * k * n, m, k, n,
                    accumulate);
}

void softmax_rows(double* out, const double* x, index_t rows, index_t cols) {
    for (index_t r = 0; r < rows; ++r) softmax_row(out, x, cols, r);
}

void l2norm_rows(double* out, const double* x, index_t rows, index_t cols,
                 double eps) {
    for (index_t r = 0; r < rows; ++r) l2norm_row(out, x, cols, eps, r);
}

void reduce_axis(double* out, const double* x, index_t outer, index_t n,
                 index_t inner, bool mean) {
    for (index_t o = 0; o < outer; ++o) {
        for (index_t i = 0; i < inner; ++i) {
            double s = 0.0;
            for (index_t m = 0; m < n; ++m) s += x[(o * n + m) * inner + i];
            out[o * inner + i] = mean ? s / static_cast<double>(n) : s;
        }
    }
}

double sum_all(const double* x, index_t n) {
    constexpr index_t kBlock = 4096;
    double total = 0.0;
    for (index_t lo = 0; lo < n; lo += kBlock) {
        const index_t hi = lo + kBlock < n ? lo + kBlock : n;
        double s = 0.0;
        for (index_t i = lo; i < hi; ++i) s += x[i];
        total += s;
    }
    return total;
}

}  // namespace ref

}  // namespace mmcse::kernels
