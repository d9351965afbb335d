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
#include <numeric>

#include "doctest.h"
#include "test_util.hpp"
#include "unilog/compression.hpp"
#include "unilog/log_ingest.hpp"
#include "unilog/training.hpp"

using namespace unilog;
using namespace unilog::compression;
using tokenizer::SpecialIds;

namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string as_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::string synthetic_text(std::size_t lines) {
  ingest::SyntheticCorpusSpec spec;
  spec.n_lines = lines;
  return ingest::generate_synthetic_corpus(spec).text();
}

tokenizer::Vocabulary vocab_for(const std::string& text) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& r : ingest::split_log_lines(text, "t")) corpus.push_back(tokenizer::tokenize(r.raw_text));
  return tokenizer::build_vocab(corpus);
}

model::ModelConfig small_config(std::size_t vocab) {
  model::ModelConfig c;
  c.n_blocks = 2;
  c.n_heads = 2;
  c.d_head = 4;
  c.d_model = 8;
  c.d_ffn = 16;
  c.dropout = 0.0;
  c.max_len = 32;
  c.n_rel_buckets = 8;
  c.vocab_size = static_cast<int>(vocab);
  return c;
}

// Randomizes every weight, including the zero-initialized head layers.
model::Checkpoint random_checkpoint(const tokenizer::Vocabulary& vocab, std::uint64_t seed) {
  model::Checkpoint ck = training::new_checkpoint(small_config(vocab.size()), vocab, seed);
  Rng rng(seed + 1);
  for (model::Parameter* p : ck.model.parameters()) {
    const bool around_one = p->name.ends_with(".g") || p->name.ends_with(".beta");
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] = (around_one ? 1.0 : 0.0) + 0.3 * rng.normal();
    }
  }
  return ck;
}

// Reference logits: the full decoder forward pass over BOS + context, last row.
std::vector<double> reference_logits(model::Checkpoint& ck, const std::vector<TokenId>& context) {
  const std::vector<TokenId> enc = {SpecialIds::task_prefix(TaskKind::kCompression)};
  std::vector<TokenId> dec = {SpecialIds::kBos};
  dec.insert(dec.end(), context.begin(), context.end());
  const model::ForwardOutput out = ck.model.forward(enc, dec, TaskKind::kCompression);
  std::vector<double> row(static_cast<std::size_t>(out.logits.cols()));
  for (Eigen::Index j = 0; j < out.logits.cols(); ++j) row[static_cast<std::size_t>(j)] = out.logits(out.logits.rows() - 1, j);
  return row;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Records every call so encoder and decoder traffic can be compared.
class LoggingPredictor : public Predictor {
 public:
  explicit LoggingPredictor(Predictor& inner) : inner_(inner) {}
  void reset() override {
    log.push_back("reset");
    inner_.reset();
  }
  const QuantizedPmf& pmf() override {
    log.push_back("pmf");
    return inner_.pmf();
  }
  void push(TokenId id) override {
    log.push_back("push " + std::to_string(id));
    inner_.push(id);
  }
  std::vector<std::string> log;

 private:
  Predictor& inner_;
};

}  // namespace

TEST_CASE("uniform probabilities over four symbols quantize to 16384 each") {
  std::vector<double> p(SpecialIds::kFirstRegular + 4, 0.0);
  std::vector<bool> support(p.size(), false);
  for (std::size_t i = SpecialIds::kFirstRegular; i < p.size(); ++i) {
    p[i] = 1.0;
    support[i] = true;
  }
  const QuantizedPmf q = QuantizedPmf::from_probabilities(p, support);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q.count(i) == (support[i] ? 16384u : 0u));
  CHECK(q.cumulative().back() == kPmfTotal);
}

TEST_CASE("quantized pmf sums to the total, floors at one and stays close to softmax") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(2000);
    std::vector<double> logits(n);
    for (double& x : logits) x = 6.0 * rng.normal();
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += (p[i] = std::exp(logits[i] - m));
    for (double& x : p) x /= z;
    const std::vector<bool> support(n, true);
    const QuantizedPmf q = QuantizedPmf::from_probabilities(p, support);
    std::uint64_t sum = 0;
    double tv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(q.count(i) >= 1u);
      sum += q.count(i);
      tv += std::abs(static_cast<double>(q.count(i)) / kPmfTotal - p[i]);
    }
    CHECK(sum == kPmfTotal);
    CHECK(0.5 * tv <= static_cast<double>(n) / kPmfTotal + 1e-12);
  }
}

TEST_CASE("pmf construction errors") {
  CHECK_THROWS_AS(QuantizedPmf::from_probabilities(std::vector<double>{0.5, 0.5}, std::vector<bool>{true}),
                  UsageError);
  CHECK_THROWS_AS(QuantizedPmf::from_probabilities(std::vector<double>{0.5, 0.5}, std::vector<bool>{false, false}),
                  UsageError);
  CHECK_THROWS_AS(QuantizedPmf::from_exact_counts(std::vector<std::uint32_t>{1, 2, 3}), DataError);
  const QuantizedPmf u = QuantizedPmf::uniform(4);
  CHECK(u.find(0) == 0);
  CHECK(u.find(16384) == 1);
  CHECK(u.find(kPmfTotal - 1) == 3);
  CHECK_THROWS_AS(u.find(kPmfTotal), DataError);
}

TEST_CASE("a single token at probability one half codes in at most 33 bits") {
  StaticPredictor pred(QuantizedPmf::uniform(2));
  const std::vector<TokenId> ids = {1};
  const EncodeResult r = ac_encode(ids, pred);
  CHECK(r.bits <= 33u);
  CHECK(ac_decode(r.bytes, pred, 1) == ids);
}

TEST_CASE("100 uniform tokens over four symbols cost between 200 and 232 bits") {
  StaticPredictor pred(QuantizedPmf::uniform(4));
  Rng rng(5);
  std::vector<TokenId> ids(100);
  for (TokenId& t : ids) t = static_cast<TokenId>(rng.uniform_int(4));
  const EncodeResult r = ac_encode(ids, pred);
  CHECK(r.bits >= 200u);
  CHECK(r.bits <= 232u);
  CHECK(r.bytes.size() == (r.bits + 7) / 8);
  CHECK(ac_decode(r.bytes, pred, ids.size()) == ids);
}

TEST_CASE("coded length is within 32 bits of the per-symbol bound on skewed sources") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(300);
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = 1 + rng.uniform_int(1000) * rng.uniform_int(3) * rng.uniform_int(50);
    StaticPredictor pred(QuantizedPmf::from_counts(counts));
    std::vector<TokenId> ids(1 + rng.uniform_int(2000));
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    for (TokenId& t : ids) {
      std::uint64_t r = rng.uniform_int(total);
      std::size_t s = 0;
      while (r >= counts[s]) r -= counts[s++];
      t = static_cast<TokenId>(s);
    }
    const EncodeResult enc = ac_encode(ids, pred);
    CHECK(static_cast<double>(enc.bits) <= code_length_bound_bits(ids, pred) + 32.0);
    CHECK(ac_decode(enc.bytes, pred, ids.size()) == ids);
  }
}

TEST_CASE("empty input codes to nothing and truncated payloads are refused") {
  StaticPredictor pred(QuantizedPmf::uniform(4));
  const EncodeResult empty = ac_encode(std::vector<TokenId>{}, pred);
  CHECK(empty.bytes.empty());
  CHECK(empty.bits == 0u);
  CHECK(ac_decode(empty.bytes, pred, 0).empty());

  Rng rng(3);
  std::vector<TokenId> ids(1000);
  for (TokenId& t : ids) t = static_cast<TokenId>(rng.uniform_int(4));
  const EncodeResult r = ac_encode(ids, pred);
  const Bytes cut(r.bytes.begin(), r.bytes.begin() + static_cast<std::ptrdiff_t>(r.bytes.size() / 10));
  CHECK_THROWS_AS(ac_decode(cut, pred, ids.size()), DataError);
}

TEST_CASE("tokens outside the support cannot be encoded") {
  std::vector<std::uint64_t> counts = {5, 0, 5};
  StaticPredictor pred(QuantizedPmf::from_counts(counts));
  CHECK_THROWS_AS(ac_encode(std::vector<TokenId>{0, 1}, pred), UsageError);
}

TEST_CASE("predictor logits match the full decoder forward pass") {
  const std::string text = synthetic_text(60);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  model::Checkpoint ck = random_checkpoint(vocab, 21);
  ModelPredictor pred(ck);
  CHECK(pred.context_window() == ck.config.max_len);
  const TokenStream ts = build_token_stream(vocab, as_bytes(text));
  std::vector<TokenId> context;
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(max_abs_diff(pred.logits(), reference_logits(ck, context)) < 1e-9);
    pred.push(ts.ids[i]);
    context.push_back(ts.ids[i]);
  }
  pred.reset();
  CHECK(max_abs_diff(pred.logits(), reference_logits(ck, {})) < 1e-9);
}

TEST_CASE("a full context restarts from BOS and the last quarter of the window") {
  const std::string text = synthetic_text(60);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  model::Checkpoint ck = random_checkpoint(vocab, 4);
  ModelPredictor pred(ck, 8);
  const TokenStream ts = build_token_stream(vocab, as_bytes(text));
  // BOS plus seven tokens fills the window; the eighth push restarts.
  for (std::size_t i = 0; i < 8; ++i) pred.push(ts.ids[i]);
  CHECK(max_abs_diff(pred.logits(), reference_logits(ck, {ts.ids[6], ts.ids[7]})) < 1e-9);
  pred.push(ts.ids[8]);
  CHECK(max_abs_diff(pred.logits(), reference_logits(ck, {ts.ids[6], ts.ids[7], ts.ids[8]})) < 1e-9);

  CHECK_THROWS_AS(ModelPredictor(ck, 7), UsageError);
  CHECK_THROWS_AS(ModelPredictor(ck, ck.config.max_len + 1), UsageError);
  CHECK_THROWS_AS(pred.push(static_cast<TokenId>(vocab.size())), UsageError);
}

TEST_CASE("the model predictor puts no mass on reserved ids") {
  const tokenizer::Vocabulary vocab = vocab_for(synthetic_text(30));
  model::Checkpoint ck = random_checkpoint(vocab, 8);
  ModelPredictor pred(ck);
  const QuantizedPmf& q = pred.pmf();
  const std::vector<bool> support = token_support(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) CHECK((q.count(i) > 0) == support[i]);
  CHECK(!support[SpecialIds::kPad]);
  CHECK(!support[SpecialIds::kBos]);
  CHECK(support[SpecialIds::kEos]);
  CHECK(support[SpecialIds::kUnk]);
}

TEST_CASE("encoder and decoder make the same predictor calls") {
  const std::string text = synthetic_text(40);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  model::Checkpoint ck = random_checkpoint(vocab, 6);
  const TokenStream ts = build_token_stream(vocab, as_bytes(text));
  ModelPredictor a(ck, 16);
  LoggingPredictor enc_log(a);
  const EncodeResult r = ac_encode(ts.ids, enc_log);
  ModelPredictor b(ck, 16);
  LoggingPredictor dec_log(b);
  CHECK(ac_decode(r.bytes, dec_log, ts.ids.size()) == ts.ids);
  CHECK(enc_log.log == dec_log.log);
}

TEST_CASE("token stream and residual reproduce the input exactly") {
  const std::string text = synthetic_text(80);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  const std::vector<std::string> inputs = {
      text,
      "",
      "\n",
      "no trailing newline",
      "crlf line\r\nanother\r\n",
      "\n\n\nblank lines\n\n",
      "Mixed CASE Words and UPPER and lower 0x1f 12.5\n",
      std::string("binary \x00\x01\xff\xfe bytes\n", 18),
      "unseen vocabulary zebra quokka\n",
      "tabs\tand  double  spaces \n",
  };
  for (const std::string& in : inputs) {
    CAPTURE(in);
    const TokenStream ts = build_token_stream(vocab, as_bytes(in));
    const std::size_t eos = static_cast<std::size_t>(std::count(ts.ids.begin(), ts.ids.end(), SpecialIds::kEos));
    const std::size_t lines = static_cast<std::size_t>(std::count(in.begin(), in.end(), '\n')) +
                              (!in.empty() && in.back() != '\n' ? 1 : 0);
    CHECK(eos == lines);
    CHECK(as_string(reconstruct_text(vocab, ts.ids, ts.residual)) == in);
  }
}

TEST_CASE("corrupt residual streams are refused") {
  const std::string text = "alpha beta\ngamma\n";
  const tokenizer::Vocabulary vocab = vocab_for(text);
  const TokenStream ts = build_token_stream(vocab, as_bytes(text));
  Bytes extra = ts.residual;
  extra.push_back(0);
  CHECK_THROWS_AS(reconstruct_text(vocab, ts.ids, extra), DataError);
  std::vector<TokenId> short_ids(ts.ids.begin(), ts.ids.end() - 1);
  CHECK_THROWS_AS(reconstruct_text(vocab, short_ids, ts.residual), DataError);
}

TEST_CASE("packed bytes round trip") {
  Rng rng(13);
  std::vector<Bytes> cases = {{}, {7}, Bytes(1000, 42)};
  for (int i = 0; i < 20; ++i) {
    Bytes b(rng.uniform_int(3000));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.uniform_int(1 + rng.uniform_int(256)));
    cases.push_back(b);
  }
  for (const Bytes& b : cases) CHECK(unpack_bytes(pack_bytes(b)) == b);
  const Bytes skewed(5000, 'a');
  CHECK(pack_bytes(skewed).size() < 40u);
}

TEST_CASE("blob round trip and header") {
  const std::string text = synthetic_text(50);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  const model::Checkpoint ck = random_checkpoint(vocab, 2);
  CompressStats stats;
  const Bytes blob = compress_bytes(ck, as_bytes(text), &stats);
  CHECK(as_string(decompress_bytes(ck, blob)) == text);
  CHECK(stats.original_bytes == text.size());
  CHECK(stats.blob_bytes == blob.size());
  const BlobHeader h = read_blob_header(blob);
  CHECK(h.original_bytes == text.size());
  CHECK(h.token_count == stats.token_count);
  CHECK(h.checkpoint_hash == model::checkpoint_hash(ck));
  CHECK(h.vocab_hash == vocab.content_hash());
  CHECK(h.context_window == static_cast<std::uint32_t>(ck.config.max_len));
  CHECK(as_string(decompress_bytes(ck, compress_bytes(ck, {}))).empty());
}

TEST_CASE("damaged blobs and mismatched checkpoints are refused") {
  const std::string text = synthetic_text(20);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  const model::Checkpoint ck = random_checkpoint(vocab, 2);
  const Bytes blob = compress_bytes(ck, as_bytes(text));
  for (std::size_t pos : {std::size_t{0}, std::size_t{5}, std::size_t{20}, blob.size() / 2, blob.size() - 1}) {
    Bytes bad = blob;
    bad[pos] ^= 0x10;
    CHECK_THROWS_AS(decompress_bytes(ck, bad), DataError);
  }
  CHECK_THROWS_AS(decompress_bytes(ck, Bytes(blob.begin(), blob.begin() + 10)), DataError);
  const model::Checkpoint other = random_checkpoint(vocab, 3);
  CHECK_THROWS_AS(decompress_bytes(other, blob), DataError);
}

TEST_CASE("file helpers write a restorable blob") {
  test::TempDir dir;
  const std::string text = synthetic_text(30);
  const tokenizer::Vocabulary vocab = vocab_for(text);
  const model::Checkpoint ck = random_checkpoint(vocab, 2);
  const auto in = dir.write("in.log", text);
  const CompressStats s = compress_file(ck, in, dir / "in.ulzc");
  CHECK(s.blob_bytes == std::filesystem::file_size(dir / "in.ulzc"));
  decompress_file(ck, dir / "in.ulzc", dir / "out.log");
  CHECK(test::read_text(dir / "out.log") == text);
}
