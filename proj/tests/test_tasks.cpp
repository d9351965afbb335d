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

#include "doctest.h"
#include "unilog/tasks.hpp"
#include "unilog/training.hpp"

using namespace unilog;
using namespace unilog::tasks;
using tokenizer::SpecialIds;

namespace {

model::Checkpoint small_checkpoint(std::uint64_t seed) {
  tokenizer::Vocabulary vocab;
  for (const char* w : {"disk", "full", "link", "down", "fan", "ok", "alarm", "clear"}) vocab.add(w);
  model::ModelConfig c;
  c.n_blocks = 1;
  c.n_heads = 2;
  c.d_head = 4;
  c.d_model = 8;
  c.d_ffn = 16;
  c.max_len = 20;
  c.vocab_size = static_cast<int>(vocab.size());
  return training::new_checkpoint(c, vocab, seed);
}

std::vector<TokenId> ids_of(std::initializer_list<int> offsets) {
  std::vector<TokenId> v;
  for (int o : offsets) v.push_back(SpecialIds::kFirstRegular + o);
  return v;
}

}  // namespace

TEST_CASE("verdicts") {
  CHECK(make_verdict(2e-3, kDefaultAnomalyThreshold).anomalous);
  CHECK_FALSE(make_verdict(5e-4, kDefaultAnomalyThreshold).anomalous);
  CHECK_FALSE(make_verdict(1e9, std::numeric_limits<double>::infinity()).anomalous);
  CHECK(make_verdict(0.0, -1.0).anomalous);
  bool seen_anomalous = false;
  for (double s = 0.0; s < 0.01; s += 1e-4) {
    const bool a = make_verdict(s, 1e-3).anomalous;
    CHECK((!seen_anomalous || a));
    seen_anomalous = seen_anomalous || a;
  }
}

TEST_CASE("anomaly scores do not depend on batching") {
  auto ckpt = small_checkpoint(2);
  std::vector<std::vector<TokenId>> seqs = {ids_of({0, 1, 2, 3, 4, 5}), ids_of({1, 1, 2}), ids_of({7, 6, 5, 4, 3, 2, 1, 0})};
  const auto batched = detect_anomalies(ckpt, seqs);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto single = detect_anomaly(ckpt, seqs[i]);
    CHECK(single.score == batched[i].score);
    CHECK(single.score >= 0.0);
  }
  CHECK(detect_anomaly(ckpt, seqs[0], std::numeric_limits<double>::infinity()).anomalous == false);
  CHECK(detect_anomaly(ckpt, seqs[0], -1.0).anomalous == true);
}

TEST_CASE("failure prediction") {
  auto ckpt = small_checkpoint(5);
  SUBCASE("a fresh head is undecided") {
    CHECK(predict_failure(ckpt, ids_of({0, 1, 2})) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("probabilities are a distribution") {
    Rng rng(1);
    for (auto* p : ckpt.model.head_parameters(TaskKind::kFailure)) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = rng.normal();
    }
    for (const auto& s : {ids_of({0}), ids_of({1, 2, 3}), ids_of({4, 4, 4, 4, 4})}) {
      std::vector<TokenId> in = {SpecialIds::task_prefix(TaskKind::kFailure)};
      in.insert(in.end(), s.begin(), s.end());
      const model::Matrix z = ckpt.model.forward(in, {}, TaskKind::kFailure).head_output;
      const double p1 = std::exp(z(0, 1)) / (std::exp(z(0, 0)) + std::exp(z(0, 1)));
      const double p0 = std::exp(z(0, 0)) / (std::exp(z(0, 0)) + std::exp(z(0, 1)));
      const double p = predict_failure(ckpt, s);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p == doctest::Approx(p1).epsilon(1e-12));
      CHECK(std::abs(p0 + p1 - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("summaries are deterministic and bounded") {
  auto ckpt = small_checkpoint(8);
  const auto in = ids_of({0, 1, 2, 3});
  for (std::size_t max_out : {0u, 1u, 3u, 50u}) {
    const auto a = summarize(ckpt, in, max_out);
    CHECK(a.size() <= max_out);
    CHECK(a == summarize(ckpt, in, max_out));
  }
}

TEST_CASE("precision, recall and F1") {
  SUBCASE("perfect") {
    const auto r = precision_recall_f1({true, false, true}, {true, false, true});
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
  }
  SUBCASE("hand counted") {
    const auto r = precision_recall_f1({true, true, false}, {true, false, false});
    CHECK(r.precision == doctest::Approx(0.5));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 0);
  }
  SUBCASE("precision 0.98 and recall 1.00") {
    CHECK(f1_score(0.98, 1.0) == doctest::Approx(0.98989899).epsilon(1e-8));
    std::vector<bool> pred(50, true);
    std::vector<bool> truth(50, true);
    truth[0] = false;
    const auto r = precision_recall_f1(pred, truth);
    CHECK(r.precision == doctest::Approx(0.98));
    CHECK(r.recall == 1.0);
    CHECK(std::round(r.f1 * 1e4) / 1e4 == doctest::Approx(0.9899));
  }
  SUBCASE("zero over zero") {
    const auto r = precision_recall_f1({false, false}, {false, false});
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
  }
  SUBCASE("length mismatch") { CHECK_THROWS_AS(precision_recall_f1({true}, {true, false}), UsageError); }
  SUBCASE("F1 lies between precision and recall") {
    Rng rng(3);
    for (int k = 0; k < 200; ++k) {
      std::vector<bool> p(30);
      std::vector<bool> t(30);
      for (std::size_t i = 0; i < 30; ++i) {
        p[i] = rng.bernoulli(0.4);
        t[i] = rng.bernoulli(0.4);
      }
      const auto r = precision_recall_f1(p, t);
      if (r.precision > 0 && r.recall > 0) {
        CHECK(r.f1 <= std::max(r.precision, r.recall) + 1e-15);
        CHECK(r.f1 >= std::min(r.precision, r.recall) - 1e-15);
      }
    }
  }
  SUBCASE("report") {
    const std::string kv = report_kv(precision_recall_f1({true}, {true}));
    CHECK(kv.find("f1=1") != std::string::npos);
    CHECK(kv.find("tp=1") != std::string::npos);
  }
}

TEST_CASE("token F1") {
  const std::vector<std::string> pred = {"disk", "full", "full"};
  const std::vector<std::string> truth = {"disk", "full", "alarm"};
  const auto r = token_f1(pred, truth);
  CHECK(r.tp == 2);
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall == doctest::Approx(2.0 / 3.0));
  const std::vector<std::vector<std::string>> many_pred = {pred, {"a"}};
  const std::vector<std::vector<std::string>> many_truth = {truth, {"a"}};
  const auto m = token_f1(many_pred, many_truth);
  CHECK(m.tp == 3);
  CHECK(m.precision == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("compression rate") {
  CHECK(compression_rate(29, 1000) == doctest::Approx(0.029));
  CHECK(compression_rate(1000, 1000) == 1.0);
  CHECK_THROWS(compression_rate(5, 0));
}
