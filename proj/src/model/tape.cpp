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

#include <cmath>
#include <limits>

#include "unilog/tape.hpp"

namespace unilog::nn {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.index)];
  if (!n.has_grad) {
    const Matrix& val = n.external ? *n.external : n.value;
    n.grad.setZero(val.rows(), val.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_[static_cast<std::size_t>(p.index)].requires_grad;
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw UsageError("Tape::backward: loss must be a scalar");
  grad(loss)(0, 0) += 1.0;
  for (std::int32_t i = loss.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, Var{i});
    if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->zero_grad();
      }
      n.param->grad += n.grad;
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.rows()) throw UsageError("matmul: inner dimensions differ");
  Matrix C;
  C.noalias() = A * B;
  return t.push(std::move(C), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.cols()) throw UsageError("matmul_nt: inner dimensions differ");
  Matrix C;
  C.noalias() = A * B.transpose();
  return t.push(std::move(C), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b);
    if (t.requires_grad(b)) t.grad(b).noalias() += g.transpose() * t.value(a);
  });
}

Var add(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "add");
  Matrix C = t.value(a) + t.value(b);
  return t.push(std::move(C), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) += g;
  });
}

Var sub(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "sub");
  Matrix C = t.value(a) - t.value(b);
  return t.push(std::move(C), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) -= g;
  });
}

Var mul(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "mul");
  Matrix C = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(C), {a, b}, [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Tape& t, Var a, double s) {
  Matrix C = t.value(a) * s;
  return t.push(std::move(C), {a}, [a, s](Tape& t, Var self) { t.grad(a) += t.grad(self) * s; });
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Matrix& X = t.value(x);
  const Matrix& B = t.value(bias);
  if (B.rows() != 1 || B.cols() != X.cols()) throw UsageError("add_bias: bias must be 1 x cols");
  Matrix C = X.rowwise() + B.row(0);
  return t.push(std::move(C), {x, bias}, [x, bias](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(x)) t.grad(x) += g;
    if (t.requires_grad(bias)) t.grad(bias) += g.colwise().sum();
  });
}

Var sigmoid(Tape& t, Var x) {
  Matrix Y = t.value(x).unaryExpr([](double v) { return stable_sigmoid(v); });
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) {
    const Matrix& y = t.value(self);
    t.grad(x).array() += t.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(Tape& t, Var x) {
  Matrix Y = t.value(x).array().tanh().matrix();
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) {
    const Matrix& y = t.value(self);
    t.grad(x).array() += t.grad(self).array() * (1.0 - y.array().square());
  });
}

Var swish(Tape& t, Var x, Var beta) {
  const Matrix& X = t.value(x);
  const double b = t.scalar(beta);
  Matrix S = (X * b).unaryExpr([](double v) { return stable_sigmoid(v); });
  Matrix Y = X.cwiseProduct(S);
  return t.push(std::move(Y), {x, beta}, [x, beta, S = std::move(S)](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    const Matrix& X = t.value(x);
    const double b = t.scalar(beta);
    // d/dx = s + b x s (1 - s);  d/db = x^2 s (1 - s)
    const Eigen::ArrayXXd ds = S.array() * (1.0 - S.array());
    if (t.requires_grad(x)) t.grad(x).array() += g.array() * (S.array() + b * X.array() * ds);
    if (t.requires_grad(beta)) t.grad(beta)(0, 0) += (g.array() * X.array().square() * ds).sum();
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Matrix& X = t.value(x);
  const Matrix& G = t.value(gain);
  const Matrix& B = t.value(bias);
  const auto n = X.cols();
  if (G.cols() != n || B.cols() != n) throw UsageError("layer_norm: gain/bias width mismatch");
  Matrix xhat(X.rows(), n);
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
  }
  Matrix Y = (xhat.array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
  return t.push(std::move(Y), {x, gain, bias},
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, Var self) {
                  const Matrix& g = t.grad(self);
                  if (t.requires_grad(gain)) t.grad(gain) += g.cwiseProduct(xhat).colwise().sum();
                  if (t.requires_grad(bias)) t.grad(bias) += g.colwise().sum();
                  if (!t.requires_grad(x)) return;
                  const Matrix& G = t.value(gain);
                  Matrix& gx = t.grad(x);
                  const double n = static_cast<double>(xhat.cols());
                  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                    Eigen::ArrayXd gh = (g.row(r).array() * G.row(0).array()).transpose();
                    Eigen::ArrayXd xh = xhat.row(r).array().transpose();
                    const double m1 = gh.sum() / n;
                    const double m2 = (gh * xh).sum() / n;
                    gx.row(r).array() += (inv_std(r) * (gh - m1 - xh * m2)).transpose();
                  }
                });
}

Var softmax_rows(Tape& t, Var x) {
  const Matrix& X = t.value(x);
  Matrix Y(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    Y.row(r) = (X.row(r).array() - m).exp();
    Y.row(r) /= Y.row(r).sum();
  }
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Eigen::VectorXd dot = (g.cwiseProduct(y)).rowwise().sum();
    t.grad(x).array() += y.array() * (g.colwise() - dot).array();
  });
}

Var dropout(Tape& t, Var x, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  const Matrix& X = t.value(x);
  Matrix mask(X.rows(), X.cols());
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < p ? 0.0 : keep;
  Matrix Y = X.cwiseProduct(mask);
  return t.push(std::move(Y), {x}, [x, mask = std::move(mask)](Tape& t, Var self) {
    t.grad(x) += t.grad(self).cwiseProduct(mask);
  });
}

Var embedding(Tape& t, Var table, std::span<const TokenId> ids) {
  const Matrix& E = t.value(table);
  Matrix Y(static_cast<Eigen::Index>(ids.size()), E.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= E.rows()) throw UsageError("embedding: token id out of range");
    Y.row(static_cast<Eigen::Index>(i)) = E.row(ids[i]);
  }
  std::vector<TokenId> idv(ids.begin(), ids.end());
  return t.push(std::move(Y), {table}, [table, idv = std::move(idv)](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    Matrix& gE = t.grad(table);
    for (std::size_t i = 0; i < idv.size(); ++i) gE.row(idv[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var gather_rows(Tape& t, Var x, std::span<const std::int32_t> rows) {
  const Matrix& X = t.value(x);
  Matrix Y(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= X.rows()) throw UsageError("gather_rows: row out of range");
    Y.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  std::vector<std::int32_t> rv(rows.begin(), rows.end());
  return t.push(std::move(Y), {x}, [x, rv = std::move(rv)](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x);
    for (std::size_t i = 0; i < rv.size(); ++i) gx.row(rv[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var mean_pool(Tape& t, Var x, std::span<const Segment> segments) {
  const Matrix& X = t.value(x);
  Matrix Y(static_cast<Eigen::Index>(segments.size()), X.cols());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.length <= 0) throw UsageError("mean_pool: empty segment");
    Y.row(static_cast<Eigen::Index>(s)) = X.middleRows(seg.offset, seg.length).colwise().mean();
  }
  std::vector<Segment> sv(segments.begin(), segments.end());
  return t.push(std::move(Y), {x}, [x, sv = std::move(sv)](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x);
    for (std::size_t s = 0; s < sv.size(); ++s) {
      const double inv = 1.0 / sv[s].length;
      gx.middleRows(sv[s].offset, sv[s].length).rowwise() += g.row(static_cast<Eigen::Index>(s)) * inv;
    }
  });
}

Var sum_all(Tape& t, Var x) {
  Matrix Y(1, 1);
  Y(0, 0) = t.value(x).sum();
  return t.push(std::move(Y), {x}, [x](Tape& t, Var self) { t.grad(x).array() += t.grad(self)(0, 0); });
}

Var cross_entropy(Tape& t, Var logits, std::span<const std::int32_t> targets) {
  const Matrix& L = t.value(logits);
  if (static_cast<std::size_t>(L.rows()) != targets.size()) throw UsageError("cross_entropy: row/target count mismatch");
  Matrix P(L.rows(), L.cols());
  double total = 0.0;
  std::size_t counted = 0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const double m = L.row(r).maxCoeff();
    P.row(r) = (L.row(r).array() - m).exp();
    const double z = P.row(r).sum();
    P.row(r) /= z;
    const auto tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0) continue;
    if (tgt >= L.cols()) throw UsageError("cross_entropy: target out of range");
    total += -(L(r, tgt) - m - std::log(z));
    ++counted;
  }
  Matrix Y(1, 1);
  Y(0, 0) = counted ? total / static_cast<double>(counted) : 0.0;
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return t.push(std::move(Y), {logits},
                [logits, P = std::move(P), tv = std::move(tv), counted](Tape& t, Var self) {
                  if (counted == 0) return;
                  const double g = t.grad(self)(0, 0) / static_cast<double>(counted);
                  Matrix& gl = t.grad(logits);
                  for (Eigen::Index r = 0; r < P.rows(); ++r) {
                    const auto tgt = tv[static_cast<std::size_t>(r)];
                    if (tgt < 0) continue;
                    gl.row(r) += g * P.row(r);
                    gl(r, tgt) -= g;
                  }
                });
}

Var mean_squared(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "mean_squared");
  Matrix D = t.value(a) - t.value(b);
  const double n = static_cast<double>(std::max<Eigen::Index>(D.size(), 1));
  Matrix Y(1, 1);
  Y(0, 0) = D.size() ? D.squaredNorm() / n : 0.0;
  return t.push(std::move(Y), {a, b}, [a, b, D = std::move(D), n](Tape& t, Var self) {
    const double g = t.grad(self)(0, 0) * 2.0 / n;
    if (t.requires_grad(a)) t.grad(a) += g * D;
    if (t.requires_grad(b)) t.grad(b) -= g * D;
  });
}

Var attention(Tape& t, Var q, Var k, Var v, std::span<const Segment> q_segments,
              std::span<const Segment> k_segments, const AttentionSpec& spec) {
  const Matrix& Q = t.value(q);
  const Matrix& K = t.value(k);
  const Matrix& V = t.value(v);
  const Eigen::Index D = Q.cols();
  if (K.cols() != D || V.cols() != D || K.rows() != V.rows()) throw UsageError("attention: shape mismatch");
  if (q_segments.size() != k_segments.size()) throw UsageError("attention: segment count mismatch");
  if (spec.n_heads <= 0 || D % spec.n_heads != 0) throw UsageError("attention: heads must divide width");
  const int H = spec.n_heads;
  const Eigen::Index dh = D / H;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool has_bias = spec.rel_bias.valid();
  const Matrix* bias = has_bias ? &t.value(spec.rel_bias) : nullptr;
  const bool use_dropout = spec.rng != nullptr && spec.dropout > 0.0;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - spec.dropout) : 1.0;

  struct Saved {
    Matrix probs;    // softmax weights
    Matrix dropped;  // weights after dropout (aliases probs when off)
    std::vector<int> buckets;
  };
  // One entry per (segment, head).
  std::vector<Saved> saved(q_segments.size() * static_cast<std::size_t>(H));
  Matrix O = Matrix::Zero(Q.rows(), D);

  for (std::size_t s = 0; s < q_segments.size(); ++s) {
    const Segment qs = q_segments[s];
    const Segment ks = k_segments[s];
    std::vector<int> buckets;
    if (has_bias) {
      buckets.resize(static_cast<std::size_t>(qs.length) * ks.length);
      for (int i = 0; i < qs.length; ++i)
        for (int j = 0; j < ks.length; ++j) buckets[static_cast<std::size_t>(i) * ks.length + j] = spec.bucket(j - i);
    }
    for (int h = 0; h < H; ++h) {
      auto Qh = Q.block(qs.offset, h * dh, qs.length, dh);
      auto Kh = K.block(ks.offset, h * dh, ks.length, dh);
      auto Vh = V.block(ks.offset, h * dh, ks.length, dh);
      Matrix S;
      S.noalias() = Qh * Kh.transpose();
      S *= inv_sqrt;
      if (has_bias) {
        for (int i = 0; i < qs.length; ++i)
          for (int j = 0; j < ks.length; ++j) S(i, j) += (*bias)(buckets[static_cast<std::size_t>(i) * ks.length + j], h);
      }
      if (spec.causal) {
        for (int i = 0; i < qs.length; ++i)
          for (int j = i + 1; j < ks.length; ++j) S(i, j) = -std::numeric_limits<double>::infinity();
      }
      for (Eigen::Index r = 0; r < S.rows(); ++r) {
        const double m = S.row(r).maxCoeff();
        S.row(r) = (S.row(r).array() - m).exp();
        S.row(r) /= S.row(r).sum();
      }
      Saved& sv = saved[s * H + h];
      if (use_dropout) {
        sv.dropped.resize(S.rows(), S.cols());
        for (Eigen::Index i = 0; i < S.size(); ++i) {
          sv.dropped.data()[i] = spec.rng->uniform() < spec.dropout ? 0.0 : S.data()[i] * keep_scale;
        }
        O.block(qs.offset, h * dh, qs.length, dh).noalias() = sv.dropped * Vh;
      } else {
        O.block(qs.offset, h * dh, qs.length, dh).noalias() = S * Vh;
      }
      sv.probs = std::move(S);
      if (h == 0) sv.buckets = buckets;
    }
  }

  std::vector<Segment> qsv(q_segments.begin(), q_segments.end());
  std::vector<Segment> ksv(k_segments.begin(), k_segments.end());
  Var rel_bias = spec.rel_bias;
  auto backward = [q, k, v, rel_bias, H, dh, inv_sqrt, has_bias, use_dropout, keep_scale,
                   saved = std::move(saved), qsv = std::move(qsv), ksv = std::move(ksv)](Tape& t, Var self) {
    const Matrix& G = t.grad(self);
    const Matrix& Q = t.value(q);
    const Matrix& K = t.value(k);
    const Matrix& V = t.value(v);
    const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
    const bool gb = has_bias && t.requires_grad(rel_bias);
    Matrix* dQ = gq ? &t.grad(q) : nullptr;
    Matrix* dK = gk ? &t.grad(k) : nullptr;
    Matrix* dV = gv ? &t.grad(v) : nullptr;
    Matrix* dB = gb ? &t.grad(rel_bias) : nullptr;
    for (std::size_t s = 0; s < qsv.size(); ++s) {
      const Segment qs = qsv[s];
      const Segment ks = ksv[s];
      const std::vector<int>& buckets = saved[s * H].buckets;
      for (int h = 0; h < H; ++h) {
        const Saved& sv = saved[s * H + h];
        const Matrix& P = sv.probs;
        const Matrix& Pd = use_dropout ? sv.dropped : sv.probs;
        auto Gh = G.block(qs.offset, h * dh, qs.length, dh);
        auto Qh = Q.block(qs.offset, h * dh, qs.length, dh);
        auto Kh = K.block(ks.offset, h * dh, ks.length, dh);
        auto Vh = V.block(ks.offset, h * dh, ks.length, dh);
        if (dV) dV->block(ks.offset, h * dh, ks.length, dh).noalias() += Pd.transpose() * Gh;
        Matrix dP;
        dP.noalias() = Gh * Vh.transpose();
        if (use_dropout) {
          // Dropped entries have Pd == 0; kept entries scale by keep_scale.
          for (Eigen::Index i = 0; i < dP.size(); ++i) dP.data()[i] = Pd.data()[i] == 0.0 ? 0.0 : dP.data()[i] * keep_scale;
        }
        Eigen::VectorXd dot = dP.cwiseProduct(P).rowwise().sum();
        Matrix dS = P.array() * (dP.colwise() - dot).array();
        if (dB) {
          for (int i = 0; i < qs.length; ++i)
            for (int j = 0; j < ks.length; ++j) (*dB)(buckets[static_cast<std::size_t>(i) * ks.length + j], h) += dS(i, j);
        }
        if (dQ) dQ->block(qs.offset, h * dh, qs.length, dh).noalias() += inv_sqrt * (dS * Kh);
        if (dK) dK->block(ks.offset, h * dh, ks.length, dh).noalias() += inv_sqrt * (dS.transpose() * Qh);
      }
    }
  };
  if (has_bias) return t.push(std::move(O), {q, k, v, rel_bias}, std::move(backward));
  return t.push(std::move(O), {q, k, v}, std::move(backward));
}

}  // namespace unilog::nn
