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

// Residual stream layout (before order-0 packing):
//   u8 1 if the input ends with '\n'
//   per line, u8 mode:
//     0  tokenized: per token { gap, u8 surface flag [, literal] }, then the
//        trailing gap
//     1  raw: the whole line as one byte string
// where a gap or literal is a LEB128 length followed by the bytes. Surface
// flags: 0 exactly the vocabulary token, 1 capitalized, 2 all upper case,
// 3 literal spelling follows.

#include <algorithm>
#include <array>
#include <cctype>

#include "unilog/compression.hpp"
#include "unilog/tokenizer.hpp"

namespace unilog::compression {

using tokenizer::SpecialIds;

namespace {

enum : std::uint8_t { kModeTokenized = 0, kModeRaw = 1 };
enum : std::uint8_t { kExact = 0, kCapitalized = 1, kUpper = 2, kLiteral = 3 };

void put_varint(Bytes& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_string(Bytes& out, std::string_view s) {
  put_varint(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    if (pos_ >= data_.size()) throw DataError("residual stream: unexpected end");
    return data_[pos_++];
  }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = u8();
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if (!(b & 0x80)) return v;
    }
    throw DataError("residual stream: malformed length");
  }
  std::string_view string() {
    const std::uint64_t n = varint();
    if (n > data_.size() - pos_) throw DataError("residual stream: unexpected end");
    std::string_view s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool in_support(TokenId id) {
  return !(id == SpecialIds::kPad || id == SpecialIds::kBos || SpecialIds::is_sentinel(id) ||
           SpecialIds::is_task_prefix(id));
}

std::string surface_of(const tokenizer::Vocabulary& vocab, TokenId id, std::uint8_t flag) {
  const std::string& tok = vocab.token(id);
  switch (flag) {
    case kExact: return tok;
    case kCapitalized: return capitalized(tok);
    case kUpper: return upper(tok);
    default: throw DataError("residual stream: bad surface flag");
  }
}

// Encodes one line; returns false when the tokenized form cannot reproduce
// it, in which case nothing is appended.
bool encode_line(const tokenizer::Vocabulary& vocab, std::string_view line, std::vector<TokenId>& ids, Bytes& res) {
  std::vector<TokenId> line_ids;
  Bytes line_res{kModeTokenized};
  std::size_t prev = 0;
  std::string rebuilt;
  for (const tokenizer::TokenSpan& span : tokenizer::tokenize_with_spans(line)) {
    if (span.begin < prev || span.end > line.size() || span.begin >= span.end) return false;
    const std::string_view gap = line.substr(prev, span.begin - prev);
    const std::string_view surface = line.substr(span.begin, span.end - span.begin);
    TokenId id = vocab.id(span.token);
    if (!in_support(id)) id = SpecialIds::kUnk;
    put_string(line_res, gap);
    std::uint8_t flag = kLiteral;
    if (id != SpecialIds::kUnk) {
      const std::string& tok = vocab.token(id);
      if (surface == tok) flag = kExact;
      else if (surface == capitalized(tok)) flag = kCapitalized;
      else if (surface == upper(tok)) flag = kUpper;
    }
    line_res.push_back(flag);
    rebuilt += gap;
    if (flag == kLiteral) {
      put_string(line_res, surface);
      rebuilt += surface;
    } else {
      rebuilt += surface_of(vocab, id, flag);
    }
    line_ids.push_back(id);
    prev = span.end;
  }
  put_string(line_res, line.substr(prev));
  rebuilt += line.substr(prev);
  if (rebuilt != line) return false;
  ids.insert(ids.end(), line_ids.begin(), line_ids.end());
  res.insert(res.end(), line_res.begin(), line_res.end());
  return true;
}

}  // namespace

TokenStream build_token_stream(const tokenizer::Vocabulary& vocab, std::span<const std::uint8_t> data) {
  TokenStream ts;
  const std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());
  const bool trailing_newline = !text.empty() && text.back() == '\n';
  ts.residual.push_back(trailing_newline ? 1 : 0);
  if (text.empty()) return ts;
  const std::string_view body = trailing_newline ? text.substr(0, text.size() - 1) : text;
  std::size_t start = 0;
  for (;;) {
    const std::size_t nl = body.find('\n', start);
    const std::string_view line = body.substr(start, nl == std::string_view::npos ? body.npos : nl - start);
    if (!encode_line(vocab, line, ts.ids, ts.residual)) {
      ts.residual.push_back(kModeRaw);
      put_string(ts.residual, line);
    }
    ts.ids.push_back(SpecialIds::kEos);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return ts;
}

Bytes reconstruct_text(const tokenizer::Vocabulary& vocab, std::span<const TokenId> ids,
                       std::span<const std::uint8_t> residual) {
  Cursor cur(residual);
  const std::uint8_t trailing_newline = cur.u8();
  if (trailing_newline > 1) throw DataError("residual stream: bad header");
  std::string out;
  std::size_t i = 0;
  std::size_t lines = 0;
  while (i < ids.size()) {
    if (lines++ > 0) out += '\n';
    const std::uint8_t mode = cur.u8();
    if (mode == kModeRaw) {
      out += cur.string();
      if (ids[i] != SpecialIds::kEos) throw DataError("residual stream: raw line carries tokens");
      ++i;
      continue;
    }
    if (mode != kModeTokenized) throw DataError("residual stream: bad line mode");
    for (; i < ids.size() && ids[i] != SpecialIds::kEos; ++i) {
      out += cur.string();
      const std::uint8_t flag = cur.u8();
      out += flag == kLiteral ? std::string(cur.string()) : surface_of(vocab, ids[i], flag);
    }
    if (i == ids.size()) throw DataError("token stream: missing end of line");
    out += cur.string();
    ++i;
  }
  if (!cur.done()) throw DataError("residual stream: trailing data");
  if (trailing_newline && lines > 0) out += '\n';
  return Bytes(out.begin(), out.end());
}

Bytes pack_bytes(std::span<const std::uint8_t> data) {
  ByteWriter w;
  w.u64(data.size());
  if (data.empty()) return w.take();
  std::array<std::uint64_t, 256> hist{};
  for (std::uint8_t b : data) ++hist[b];
  const QuantizedPmf pmf = QuantizedPmf::from_counts(hist);
  std::uint16_t present = 0;
  for (std::size_t s = 0; s < 256; ++s) present += pmf.count(s) > 0;
  w.u16(static_cast<std::uint16_t>(present - 1));
  for (std::size_t s = 0; s < 256; ++s) {
    if (pmf.count(s) == 0) continue;
    w.u8(static_cast<std::uint8_t>(s));
    w.u16(static_cast<std::uint16_t>(pmf.count(s) - 1));
  }
  ArithmeticEncoder enc;
  for (std::uint8_t b : data) enc.encode(pmf.low(b), pmf.high(b), kPmfTotal);
  w.bytes(enc.finish());
  return w.take();
}

Bytes unpack_bytes(std::span<const std::uint8_t> packed) {
  ByteReader r(packed);
  const std::uint64_t n = r.u64();
  if (n == 0) {
    if (r.remaining() != 0) throw DataError("packed bytes: trailing data");
    return {};
  }
  const std::size_t present = static_cast<std::size_t>(r.u16()) + 1;
  if (present > 256) throw DataError("packed bytes: bad symbol table");
  std::array<std::uint32_t, 256> counts{};
  int last = -1;
  for (std::size_t i = 0; i < present; ++i) {
    const std::uint8_t s = r.u8();
    if (static_cast<int>(s) <= last) throw DataError("packed bytes: unordered symbol table");
    last = s;
    counts[s] = static_cast<std::uint32_t>(r.u16()) + 1;
  }
  const QuantizedPmf pmf = QuantizedPmf::from_exact_counts(counts);
  ArithmeticDecoder dec(packed.subspan(r.pos()));
  Bytes out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t s = pmf.find(dec.target(kPmfTotal));
    dec.consume(pmf.low(s), pmf.high(s), kPmfTotal);
    out.push_back(static_cast<std::uint8_t>(s));
  }
  return out;
}

}  // namespace unilog::compression
