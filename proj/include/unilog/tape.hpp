// Copyright 2026 The unilog Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// A small reverse-mode automatic differentiation tape over dense double
// matrices. Operations are coarse (matrix products, layer norm, fused
// attention) so the bookkeeping cost stays negligible next to the arithmetic.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "unilog/common.hpp"

namespace unilog::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Var {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

// A contiguous run of rows belonging to one sequence of a packed batch.
struct Segment {
  std::int32_t offset = 0;
  std::int32_t length = 0;
};

class Tape {
 public:
  // With record_gradients false the tape only evaluates values: parameters
  // enter as non-differentiable and no backward closures are stored.
  explicit Tape(bool record_gradients = true) : record_(record_gradients) { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Reads the parameter's storage in place; backward accumulates into p.grad.
  Var param(Parameter& p);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.index)];
    return n.external ? *n.external : n.value;
  }
  double scalar(Var v) const { return value(v)(0, 0); }

  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.index)].requires_grad; }

  // Gradient buffer of `v`, allocated as zeros on first use.
  Matrix& grad(Var v);

  using BackwardFn = std::function<void(Tape&, Var self)>;
  Var push(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward function in
  // reverse order. `loss` must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const Matrix* external = nullptr;
    Parameter* param = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_ = true;
};

// --- elementwise and linear algebra ---------------------------------------

Var matmul(Tape& t, Var a, Var b);     // a * b
Var matmul_nt(Tape& t, Var a, Var b);  // a * b^T
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);        // elementwise
Var scale(Tape& t, Var a, double s);
Var add_bias(Tape& t, Var x, Var bias);  // bias is 1 x cols, broadcast over rows
Var sigmoid(Tape& t, Var x);
Var tanh(Tape& t, Var x);
// x * sigmoid(beta * x); beta is a 1x1 variable.
Var swish(Tape& t, Var x, Var beta);
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-6);
Var softmax_rows(Tape& t, Var x);
Var dropout(Tape& t, Var x, double p, Rng* rng);  // identity when rng is null or p == 0

// --- indexing --------------------------------------------------------------

Var embedding(Tape& t, Var table, std::span<const TokenId> ids);
Var gather_rows(Tape& t, Var x, std::span<const std::int32_t> rows);
Var mean_pool(Tape& t, Var x, std::span<const Segment> segments);  // one row per segment

// --- reductions and losses ---------------------------------------------------

Var sum_all(Tape& t, Var x);
// Mean token cross entropy of softmax(logits) against targets; rows whose
// target is negative are ignored.
Var cross_entropy(Tape& t, Var logits, std::span<const std::int32_t> targets);
// Mean over all elements of (a - b)^2.
Var mean_squared(Tape& t, Var a, Var b);

// --- attention ---------------------------------------------------------------

struct AttentionSpec {
  int n_heads = 1;
  bool causal = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
  // Relative-position bias table (n_buckets x n_heads) and bucket function;
  // no bias when the table is invalid.
  Var rel_bias;
  std::function<int(int)> bucket;  // key_pos - query_pos -> bucket
};

// Multi-head scaled dot-product attention over packed sequences. Query
// segment i attends to key segment i. q is (Tq x D), k and v are (Tk x D).
Var attention(Tape& t, Var q, Var k, Var v, std::span<const Segment> q_segments,
              std::span<const Segment> k_segments, const AttentionSpec& spec);

}  // namespace unilog::nn
