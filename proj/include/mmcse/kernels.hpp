#pragma once

#include <cstddef>
#include <cstdint>

// Dense double-precision kernels backing the tensor engine.
//
// Every kernel computes each output element with a fixed accumulation order,
// so Serial and Parallel modes (and any OpenMP thread count) produce
// bit-identical results. Reductions to a scalar use a fixed block schedule
// with partials combined in block order for the same reason.
//
// kernels::ref holds plain serial loops of the same contracts; the test suite
// asserts bitwise parity between ref and the OpenMP paths, and the benchmark
// target compares their throughput.

namespace mmcse::kernels {

using index_t = std::int64_t;

enum class Mode { Serial, Parallel };

Mode mode();
void set_mode(Mode m);
// 0 keeps the OpenMP runtime default.
void set_threads(int n);
int max_threads();

// ---- elementwise ----
void add(double* out, const double* a, const double* b, index_t n);
void sub(double* out, const double* a, const double* b, index_t n);
void mul(double* out, const double* a, const double* b, index_t n);
void scale(double* out, const double* a, double s, index_t n);
void relu(double* out, const double* x, index_t n);
void sigmoid(double* out, const double* x, index_t n);
void exp_(double* out, const double* x, index_t n);
void log_(double* out, const double* x, index_t n);
void abs_(double* out, const double* x, index_t n);
void clamp(double* out, const double* x, double lo, double hi, index_t n);
void fill(double* out, double v, index_t n);
void copy(double* out, const double* x, index_t n);

// ---- elementwise accumulators (backward passes) ----
void acc(double* out, const double* g, index_t n);               // out += g
void acc_scaled(double* out, const double* g, double s, index_t n);  // out += s*g
void acc_mul(double* out, const double* g, const double* h, index_t n);  // out += g*h
// out += g where pred(x) holds; masks are the ReLU/clamp/abs adjoints
void acc_relu_grad(double* out, const double* g, const double* x, index_t n);
void acc_sigmoid_grad(double* out, const double* g, const double* y, index_t n);
void acc_exp_grad(double* out, const double* g, const double* y, index_t n);
void acc_log_grad(double* out, const double* g, const double* x, index_t n);
void acc_abs_grad(double* out, const double* g, const double* x, index_t n);
void acc_clamp_grad(double* out, const double* g, const double* x, double lo,
                    double hi, index_t n);

// ---- matrix products ----
// C[M,N] (+)= A[M,K] * B[K,N], row-major.
void matmul(double* c, const double* a, const double* b, index_t m, index_t k,
            index_t n, bool accumulate);
// C[M,N] (+)= A^T * B with A stored [K,M].
void matmul_tn(double* c, const double* a, const double* b, index_t m,
               index_t k, index_t n, bool accumulate);
// C[M,N] (+)= A * B^T with B stored [N,K].
void matmul_nt(double* c, const double* a, const double* b, index_t m,
               index_t k, index_t n, bool accumulate);
// Batched over a leading axis: C[b] (+)= A[b] * B[b] for b in [0,batch).
void bmm(double* c, const double* a, const double* b, index_t batch, index_t m,
         index_t k, index_t n, bool accumulate);
void bmm_tn(double* c, const double* a, const double* b, index_t batch,
            index_t m, index_t k, index_t n, bool accumulate);
void bmm_nt(double* c, const double* a, const double* b, index_t batch,
            index_t m, index_t k, index_t n, bool accumulate);

// ---- layout ----
// out[b,c,r] = x[b,r,c]
void transpose_last2(double* out, const double* x, index_t batch, index_t rows,
                     index_t cols);
void transpose_last2_acc(double* out, const double* g, index_t batch,
                         index_t rows, index_t cols);

// ---- row-wise nonlinear maps (rows = numel / cols) ----
// Max-subtracted softmax per row.
void softmax_rows(double* out, const double* x, index_t rows, index_t cols);
// dx += y * (g - sum(g*y)) per row.
void softmax_rows_acc_grad(double* dx, const double* g, const double* y,
                           index_t rows, index_t cols);
// Row divided by max(euclidean norm, eps).
void l2norm_rows(double* out, const double* x, index_t rows, index_t cols,
                 double eps);
// Adjoint of l2norm_rows; rows with norm <= eps are treated as constant.
void l2norm_rows_acc_grad(double* dx, const double* g, const double* x,
                          index_t rows, index_t cols, double eps);

// ---- reductions / broadcasts (x viewed as [outer, n, inner]) ----
// out[o,i] = sum_m x[o,m,i]; divides by n when mean is set.
void reduce_axis(double* out, const double* x, index_t outer, index_t n,
                 index_t inner, bool mean);
// dx[o,m,i] += g[o,i] * s
void broadcast_axis_acc(double* dx, const double* g, index_t outer, index_t n,
                        index_t inner, double s);
// out[o,m,i] = x[o,i] for all m (forward of broadcast-over-new-axis).
void broadcast_axis(double* out, const double* x, index_t outer, index_t n,
                    index_t inner);

// Deterministic blocked full reduction.
double sum_all(const double* x, index_t n);

bool all_finite(const double* x, index_t n);

// Plain serial reference implementations, kept for parity tests and the
// benchmark baseline. Same accumulation order as the kernels above.
namespace ref {
void matmul(double* c, const double* a, const double* b, index_t m, index_t k,
            index_t n, bool accumulate);
void bmm(double* c, const double* a, const double* b, index_t batch, index_t m,
         index_t k, index_t n, bool accumulate);
void softmax_rows(double* out, const double* x, index_t rows, index_t cols);
void l2norm_rows(double* out, const double* x, index_t rows, index_t cols,
                 double eps);
void reduce_axis(double* out, const double* x, index_t outer, index_t n,
                 index_t inner, bool mean);
double sum_all(const double* x, index_t n);
}  // namespace ref

}  // namespace mmcse::kernels
