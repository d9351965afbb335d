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

// Lossless log compression: a model-driven arithmetic coder over the token
// stream plus a residual stream that restores the exact original bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "unilog/binary_io.hpp"
#include "unilog/model.hpp"

namespace unilog::compression {

inline constexpr std::uint32_t kPmfBits = 16;
inline constexpr std::uint32_t kPmfTotal = 1u << kPmfBits;

// Integer distribution with counts summing to exactly kPmfTotal. Symbols in
// the support have count >= 1; others have count 0.
class QuantizedPmf {
 public:
  QuantizedPmf() = default;

  // Largest-remainder rounding of `probs` (renormalized over the support)
  // after reserving a count of 1 for every supported symbol. Ties in the
  // remainder go to the lower symbol.
  static QuantizedPmf from_probabilities(std::span<const double> probs, const std::vector<bool>& support);
  static QuantizedPmf uniform(std::size_t n);
  // Quantizes raw counts (e.g. a byte histogram) over the symbols with
  // nonzero count.
  static QuantizedPmf from_counts(std::span<const std::uint64_t> counts);
  // Rebuilds a distribution from exact integer counts; they must sum to
  // kPmfTotal.
  static QuantizedPmf from_exact_counts(std::span<const std::uint32_t> counts);

  std::size_t size() const { return cum_.empty() ? 0 : cum_.size() - 1; }
  std::uint32_t count(std::size_t s) const { return cum_[s + 1] - cum_[s]; }
  std::uint32_t low(std::size_t s) const { return cum_[s]; }
  std::uint32_t high(std::size_t s) const { return cum_[s + 1]; }
  // Symbol whose [low, high) interval contains `target`.
  std::size_t find(std::uint32_t target) const;
  const std::vector<std::uint32_t>& cumulative() const { return cum_; }

  bool operator==(const QuantizedPmf&) const = default;

 private:
  std::vector<std::uint32_t> cum_;
};

// --- arithmetic coder -----------------------------------------------------------

// 32-bit low/high registers with a pending (straddle) bit counter.
class ArithmeticEncoder {
 public:
  void encode(std::uint32_t low, std::uint32_t high, std::uint32_t total);
  // Flushes the final disambiguating bits; the result is padded with zero
  // bits to a whole byte.
  Bytes finish();
  std::uint64_t bits() const { return bit_count_; }

 private:
  void emit(int bit);
  void emit_with_pending(int bit);

  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t pending_ = 0;
  Bytes out_;
  int filled_ = 0;
  std::uint8_t cur_ = 0;
  std::uint64_t bit_count_ = 0;
};

class ArithmeticDecoder {
 public:
  explicit ArithmeticDecoder(std::span<const std::uint8_t> data);
  // Value in [0, total) identifying the next symbol's interval.
  std::uint32_t target(std::uint32_t total) const;
  // Consumes the symbol with interval [low, high).
  void consume(std::uint32_t low, std::uint32_t high, std::uint32_t total);

 private:
  int next_bit();

  std::span<const std::uint8_t> data_;
  std::uint64_t bit_pos_ = 0;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t value_ = 0;
};

// --- predictors -------------------------------------------------------------------

// Supplies the distribution of the next token given everything pushed since
// the last reset.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void reset() = 0;
  virtual const QuantizedPmf& pmf() = 0;
  virtual void push(TokenId id) = 0;
};

// The same distribution at every step.
class StaticPredictor : public Predictor {
 public:
  explicit StaticPredictor(QuantizedPmf pmf) : pmf_(std::move(pmf)) {}
  void reset() override {}
  const QuantizedPmf& pmf() override { return pmf_; }
  void push(TokenId) override {}

 private:
  QuantizedPmf pmf_;
};

// Ids the model may assign probability to: everything except PAD, BOS, the
// sentinels and the task prefixes.
std::vector<bool> token_support(std::size_t vocab_size);

// exp() computed with a fixed sequence of IEEE operations, so it returns the
// same bits on every platform.
double portable_exp(double x);

// Runs the decoder of a checkpoint one token at a time with a key/value
// cache, in plain scalar code with a fixed summation order. The encoder sees
// only the <compression> prefix. The decoder context holds at most
// `context_window` positions (BOS included); when it is full the context is
// rebuilt from BOS and the most recent context_window/4 tokens.
class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const model::Checkpoint& ckpt, int context_window = 0);
  ~ModelPredictor() override;

  void reset() override;
  const QuantizedPmf& pmf() override;
  void push(TokenId id) override;

  // Next-token logits for the current context (after the compression head).
  std::vector<double> logits();
  int context_window() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct EncodeResult {
  Bytes bytes;
  std::uint64_t bits = 0;  // before byte padding
};

EncodeResult ac_encode(std::span<const TokenId> tokens, Predictor& predictor);
// Throws DataError when the stream ends too early.
std::vector<TokenId> ac_decode(std::span<const std::uint8_t> payload, Predictor& predictor, std::uint64_t count);

// Sum over tokens of ceil(-log2(count / kPmfTotal)) under `predictor`.
double code_length_bound_bits(std::span<const TokenId> tokens, Predictor& predictor);

// --- exact text reconstruction ---------------------------------------------------

// Token ids (one EOS after each line) and the raw residual bytes that,
// together with the vocabulary, reproduce the input byte for byte.
struct TokenStream {
  std::vector<TokenId> ids;
  Bytes residual;
};

TokenStream build_token_stream(const tokenizer::Vocabulary& vocab, std::span<const std::uint8_t> data);
Bytes reconstruct_text(const tokenizer::Vocabulary& vocab, std::span<const TokenId> ids,
                       std::span<const std::uint8_t> residual);

// Static order-0 arithmetic coding of a byte string; the symbol table is
// stored in front of the code.
Bytes pack_bytes(std::span<const std::uint8_t> data);
Bytes unpack_bytes(std::span<const std::uint8_t> packed);

// --- blob --------------------------------------------------------------------------

inline constexpr std::uint16_t kBlobVersion = 1;

struct BlobHeader {
  Sha256 checkpoint_hash{};
  Sha256 vocab_hash{};
  std::uint64_t token_count = 0;
  std::uint64_t original_bytes = 0;
  std::uint32_t context_window = 0;
};

struct CompressStats {
  std::uint64_t original_bytes = 0;
  std::uint64_t blob_bytes = 0;
  std::uint64_t token_count = 0;
  std::uint64_t payload_bits = 0;
  std::uint64_t residual_bytes = 0;
};

// context_window 0 means the checkpoint's max_len; the window used is stored
// in the blob header.
Bytes compress_bytes(const model::Checkpoint& ckpt, std::span<const std::uint8_t> data,
                     CompressStats* stats = nullptr, int context_window = 0);
// Refuses (DataError) on checksum, version or hash mismatch before decoding.
Bytes decompress_bytes(const model::Checkpoint& ckpt, std::span<const std::uint8_t> blob);
BlobHeader read_blob_header(std::span<const std::uint8_t> blob);

CompressStats compress_file(const model::Checkpoint& ckpt, const std::filesystem::path& in,
                            const std::filesystem::path& out, int context_window = 0);
void decompress_file(const model::Checkpoint& ckpt, const std::filesystem::path& in,
                     const std::filesystem::path& out);

}  // namespace unilog::compression
