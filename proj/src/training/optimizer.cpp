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

#include "unilog/training.hpp"

namespace unilog::training {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseAbs2();
    if (lr == 0.0) continue;
    p.value *= 1.0 - lr * config_.weight_decay;
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

model::TrainState AdamW::state() const {
  model::TrainState s;
  s.step = t_;
  s.m = m_;
  s.v = v_;
  return s;
}

void AdamW::load_state(const model::TrainState& s) {
  if (s.m.size() != params_.size() || s.v.size() != params_.size()) {
    throw DataError("optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (s.m[i].rows() != m_[i].rows() || s.m[i].cols() != m_[i].cols()) {
      throw DataError("optimizer state shape mismatch for " + params_[i]->name);
    }
  }
  m_ = s.m;
  v_ = s.v;
  t_ = s.step;
}

ExponentialSchedule::ExponentialSchedule(double lr0, std::uint64_t total_steps)
    : lr0_(lr0), gamma_(std::pow(0.01, 1.0 / static_cast<double>(std::max<std::uint64_t>(total_steps, 1)))) {
  if (!(lr0 > 0.0)) throw UsageError("learning rate must be positive");
}

double ExponentialSchedule::lr(std::uint64_t step) const {
  return lr0_ * std::pow(gamma_, static_cast<double>(step));
}

}  // namespace unilog::training
