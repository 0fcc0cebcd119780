#pragma once

#include <vector>

#include "lanecast/tensor.hpp"

namespace lanecast {

// Differentiable primitives. Every function validates operand shapes and
// throws ShapeError naming the primitive and the offending dimensions.
// Results are recorded on the tape whenever grad is enabled and at least one
// input requires a gradient.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);      // [m,k]x[k,n]
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);   // a * b^T, [m,k]x[n,k]
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);  // x*w + b

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);  // same shape
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);  // elementwise
Tensor scalar_mul(Tape& tape, const Tensor& x, double c);
Tensor add_scalar(Tape& tape, const Tensor& x, double c);

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts);
Tensor slice_cols(Tape& tape, const Tensor& x, int64_t start, int64_t len);

Tensor index_select_rows(Tape& tape, const Tensor& x, std::vector<int64_t> rows);
Tensor index_add_rows(Tape& tape, const Tensor& x, std::vector<int64_t> rows, const Tensor& y);
// out[v] = sum of x[u] over u in adj[v]; adj may be ragged, indices into rows of x.
Tensor gather_sum_rows(Tape& tape, const Tensor& x, const std::vector<std::vector<int32_t>>& adj);

Tensor softmax_rows(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
Tensor elu(Tape& tape, const Tensor& x);
Tensor log_elem(Tape& tape, const Tensor& x);
Tensor clamp(Tape& tape, const Tensor& x, double lo, double hi);

// Row-wise normalization with learnable gain/bias (the phi used throughout).
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);

// x: [L, c_in], w: [c_out, c_in*k], b: [c_out]; odd k, same padding.
Tensor conv1d_same(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b, int64_t kernel);
// kernel 2, stride 2, ceil mode (trailing singleton window allowed).
Tensor maxpool1d_2(Tape& tape, const Tensor& x);

Tensor transpose(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, std::vector<int64_t> shape);

Tensor reduce_sum_all(Tape& tape, const Tensor& x);   // -> [1]
Tensor reduce_mean_all(Tape& tape, const Tensor& x);  // -> [1]
Tensor reduce_max_rows(Tape& tape, const Tensor& x);  // column-wise max, [m,n] -> [1,n]
Tensor reduce_sum_cols(Tape& tape, const Tensor& x);  // row-wise sum,    [m,n] -> [m,1]
// subtract column vector v[m,1] from every column of x[m,n]
Tensor sub_colvec(Tape& tape, const Tensor& x, const Tensor& v);
// sum consecutive groups of `group` rows: [m,n] -> [m/group, n]
Tensor group_sum_rows(Tape& tape, const Tensor& x, int64_t group);

// Sum over rows of the branchy penalty on the row norm r = |row|_2:
// 0.5*r^2 for r < 1, r - 0.5 otherwise. Input is the error matrix.
Tensor smooth_l1_sum(Tape& tape, const Tensor& diff);

}  // namespace lanecast
