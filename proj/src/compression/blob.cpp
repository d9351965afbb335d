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

// Blob layout (little-endian):
//   "ULZC" u16 version
//   32  SHA-256 of the checkpoint file
//   32  SHA-256 of the vocabulary
//   u64 token count, u64 original byte count, u32 context window
//   u64 residual length, residual (order-0 packed)
//   payload (arithmetic code of the token stream, byte padded)
//   u32 CRC-32 of everything before it

#include <algorithm>

#include "unilog/compression.hpp"

namespace unilog::compression {

namespace {

constexpr char kMagic[4] = {'U', 'L', 'Z', 'C'};
constexpr std::size_t kFixedHeader = 4 + 2 + 32 + 32 + 8 + 8 + 4 + 8;

struct Parsed {
  BlobHeader header;
  std::span<const std::uint8_t> residual;
  std::span<const std::uint8_t> payload;
};

Parsed parse(std::span<const std::uint8_t> blob) {
  if (blob.size() < kFixedHeader + 4 || !std::equal(kMagic, kMagic + 4, blob.begin())) {
    throw DataError("blob: not a unilog compressed file");
  }
  const auto body = blob.first(blob.size() - 4);
  if (crc32(body) != ByteReader(blob.last(4)).u32()) throw DataError("blob: checksum mismatch (file is corrupt)");
  ByteReader r(body);
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kBlobVersion) throw DataError("blob: unsupported version " + std::to_string(version));
  Parsed p;
  auto ch = r.bytes(32);
  std::copy(ch.begin(), ch.end(), p.header.checkpoint_hash.begin());
  auto vh = r.bytes(32);
  std::copy(vh.begin(), vh.end(), p.header.vocab_hash.begin());
  p.header.token_count = r.u64();
  p.header.original_bytes = r.u64();
  p.header.context_window = r.u32();
  const std::uint64_t residual_len = r.u64();
  if (residual_len > r.remaining()) throw DataError("blob: residual length exceeds file");
  p.residual = r.bytes(static_cast<std::size_t>(residual_len));
  p.payload = body.subspan(r.pos());
  return p;
}

}  // namespace

BlobHeader read_blob_header(std::span<const std::uint8_t> blob) { return parse(blob).header; }

Bytes compress_bytes(const model::Checkpoint& ckpt, std::span<const std::uint8_t> data, CompressStats* stats,
                     int context_window) {
  const TokenStream ts = build_token_stream(ckpt.vocab, data);
  const Bytes residual = pack_bytes(ts.residual);
  ModelPredictor predictor(ckpt, context_window);
  const EncodeResult code = ac_encode(ts.ids, predictor);

  ByteWriter w;
  w.str(std::string_view(kMagic, 4));
  w.u16(kBlobVersion);
  w.bytes(model::checkpoint_hash(ckpt));
  w.bytes(ckpt.vocab.content_hash());
  w.u64(ts.ids.size());
  w.u64(data.size());
  w.u32(static_cast<std::uint32_t>(predictor.context_window()));
  w.u64(residual.size());
  w.bytes(residual);
  w.bytes(code.bytes);
  w.u32(crc32(w.data()));
  Bytes out = w.take();
  if (stats) {
    stats->original_bytes = data.size();
    stats->blob_bytes = out.size();
    stats->token_count = ts.ids.size();
    stats->payload_bits = code.bits;
    stats->residual_bytes = residual.size();
  }
  return out;
}

Bytes decompress_bytes(const model::Checkpoint& ckpt, std::span<const std::uint8_t> blob) {
  const Parsed p = parse(blob);
  if (p.header.checkpoint_hash != model::checkpoint_hash(ckpt)) {
    throw DataError("blob was written with a different checkpoint; refusing to decode");
  }
  if (p.header.vocab_hash != ckpt.vocab.content_hash()) {
    throw DataError("blob was written with a different vocabulary; refusing to decode");
  }
  ModelPredictor predictor(ckpt, static_cast<int>(p.header.context_window));
  const std::vector<TokenId> ids = ac_decode(p.payload, predictor, p.header.token_count);
  Bytes text = reconstruct_text(ckpt.vocab, ids, unpack_bytes(p.residual));
  if (text.size() != p.header.original_bytes) throw DataError("blob: decoded size differs from header");
  return text;
}

CompressStats compress_file(const model::Checkpoint& ckpt, const std::filesystem::path& in,
                            const std::filesystem::path& out, int context_window) {
  CompressStats stats;
  write_file(out, compress_bytes(ckpt, read_file(in), &stats, context_window));
  return stats;
}

void decompress_file(const model::Checkpoint& ckpt, const std::filesystem::path& in, const std::filesystem::path& out) {
  write_file(out, decompress_bytes(ckpt, read_file(in)));
}

}  // namespace unilog::compression
