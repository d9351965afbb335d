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

// Integer arithmetic coder in the style of Witten, Neal and Cleary (1987).

#include <cmath>

#include "unilog/compression.hpp"
#include "unilog/tokenizer.hpp"

namespace unilog::compression {

namespace {

constexpr std::uint64_t kTop = 0xFFFFFFFFull;
constexpr std::uint64_t kHalf = 0x80000000ull;
constexpr std::uint64_t kQuarter = 0x40000000ull;
constexpr std::uint64_t kThreeQuarters = 0xC0000000ull;
// The decoder looks 32 bits ahead; an honest stream never needs more than
// that past its last byte.
constexpr std::uint64_t kMaxOverread = 32;

void check_interval(std::uint32_t low, std::uint32_t high, std::uint32_t total) {
  if (!(low < high && high <= total)) throw UsageError("arithmetic coder: empty or invalid interval");
}

}  // namespace

void ArithmeticEncoder::emit(int bit) {
  cur_ = static_cast<std::uint8_t>(cur_ | (bit << (7 - filled_)));
  if (++filled_ == 8) {
    out_.push_back(cur_);
    cur_ = 0;
    filled_ = 0;
  }
  ++bit_count_;
}

void ArithmeticEncoder::emit_with_pending(int bit) {
  emit(bit);
  for (; pending_ > 0; --pending_) emit(!bit);
}

void ArithmeticEncoder::encode(std::uint32_t low, std::uint32_t high, std::uint32_t total) {
  check_interval(low, high, total);
  const std::uint64_t range = high_ - low_ + 1;
  high_ = low_ + range * high / total - 1;
  low_ = low_ + range * low / total;
  for (;;) {
    if (high_ < kHalf) {
      emit_with_pending(0);
    } else if (low_ >= kHalf) {
      emit_with_pending(1);
      low_ -= kHalf;
      high_ -= kHalf;
    } else if (low_ >= kQuarter && high_ < kThreeQuarters) {
      ++pending_;
      low_ -= kQuarter;
      high_ -= kQuarter;
    } else {
      break;
    }
    low_ = 2 * low_;
    high_ = 2 * high_ + 1;
  }
}

Bytes ArithmeticEncoder::finish() {
  ++pending_;
  emit_with_pending(low_ < kQuarter ? 0 : 1);
  if (filled_ > 0) {
    out_.push_back(cur_);
    cur_ = 0;
    filled_ = 0;
  }
  return std::move(out_);
}

ArithmeticDecoder::ArithmeticDecoder(std::span<const std::uint8_t> data) : data_(data) {
  for (int i = 0; i < 32; ++i) value_ = (value_ << 1) | static_cast<std::uint64_t>(next_bit());
}

int ArithmeticDecoder::next_bit() {
  const std::uint64_t byte = bit_pos_ >> 3;
  int bit = 0;
  if (byte < data_.size()) {
    bit = (data_[byte] >> (7 - (bit_pos_ & 7))) & 1;
  } else if (bit_pos_ - 8 * data_.size() >= kMaxOverread) {
    throw DataError("arithmetic decoder: truncated stream");
  }
  ++bit_pos_;
  return bit;
}

std::uint32_t ArithmeticDecoder::target(std::uint32_t total) const {
  const std::uint64_t range = high_ - low_ + 1;
  const std::uint64_t t = ((value_ - low_ + 1) * total - 1) / range;
  if (t >= total) throw DataError("arithmetic decoder: corrupt stream");
  return static_cast<std::uint32_t>(t);
}

void ArithmeticDecoder::consume(std::uint32_t low, std::uint32_t high, std::uint32_t total) {
  check_interval(low, high, total);
  const std::uint64_t range = high_ - low_ + 1;
  high_ = low_ + range * high / total - 1;
  low_ = low_ + range * low / total;
  for (;;) {
    if (high_ < kHalf) {
      // nothing to subtract
    } else if (low_ >= kHalf) {
      value_ -= kHalf;
      low_ -= kHalf;
      high_ -= kHalf;
    } else if (low_ >= kQuarter && high_ < kThreeQuarters) {
      value_ -= kQuarter;
      low_ -= kQuarter;
      high_ -= kQuarter;
    } else {
      break;
    }
    low_ = 2 * low_;
    high_ = 2 * high_ + 1;
    value_ = (2 * value_ + static_cast<std::uint64_t>(next_bit())) & kTop;
  }
}

EncodeResult ac_encode(std::span<const TokenId> tokens, Predictor& predictor) {
  EncodeResult out;
  if (tokens.empty()) return out;
  predictor.reset();
  ArithmeticEncoder enc;
  for (TokenId id : tokens) {
    const QuantizedPmf& pmf = predictor.pmf();
    const auto s = static_cast<std::size_t>(id);
    if (id < 0 || s >= pmf.size() || pmf.count(s) == 0) {
      throw UsageError("ac_encode: token " + std::to_string(id) + " outside the predictor's support");
    }
    enc.encode(pmf.low(s), pmf.high(s), kPmfTotal);
    predictor.push(id);
  }
  out.bytes = enc.finish();
  out.bits = enc.bits();
  return out;
}

std::vector<TokenId> ac_decode(std::span<const std::uint8_t> payload, Predictor& predictor, std::uint64_t count) {
  std::vector<TokenId> out;
  if (count == 0) return out;
  out.reserve(count);
  predictor.reset();
  ArithmeticDecoder dec(payload);
  for (std::uint64_t i = 0; i < count; ++i) {
    const QuantizedPmf& pmf = predictor.pmf();
    const std::size_t s = pmf.find(dec.target(kPmfTotal));
    dec.consume(pmf.low(s), pmf.high(s), kPmfTotal);
    const auto id = static_cast<TokenId>(s);
    out.push_back(id);
    predictor.push(id);
  }
  return out;
}

double code_length_bound_bits(std::span<const TokenId> tokens, Predictor& predictor) {
  predictor.reset();
  double bits = 0.0;
  for (TokenId id : tokens) {
    const QuantizedPmf& pmf = predictor.pmf();
    bits += std::ceil(-std::log2(static_cast<double>(pmf.count(static_cast<std::size_t>(id))) / kPmfTotal));
    predictor.push(id);
  }
  return bits;
}

std::vector<bool> token_support(std::size_t vocab_size) {
  using tokenizer::SpecialIds;
  std::vector<bool> s(vocab_size, true);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    const auto id = static_cast<TokenId>(i);
    if (id == SpecialIds::kPad || id == SpecialIds::kBos || SpecialIds::is_sentinel(id) ||
        SpecialIds::is_task_prefix(id)) {
      s[i] = false;
    }
  }
  return s;
}

}  // namespace unilog::compression
