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

// Layout (little-endian):
//   "ULOG" u16 version
//   lstr  model config as key=value lines
//   32    SHA-256 of the vocabulary text
//   lstr  vocabulary text
//   u32   parameter count, then per parameter: lstr name, u32 rows, u32 cols,
//         rows*cols f64 in row-major order
//   lstr  provenance as key=value lines
//   u8    1 if optimizer state follows: u64 step, then first and second
//         moments for every parameter in declaration order
//   u32   CRC-32 of all preceding bytes

#include <algorithm>
#include <sstream>

#include "unilog/binary_io.hpp"
#include "unilog/model.hpp"

namespace unilog::model {

namespace {

constexpr char kMagic[4] = {'U', 'L', 'O', 'G'};
constexpr std::uint16_t kVersion = 1;

void write_matrix_values(ByteWriter& w, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

void read_matrix_values(ByteReader& r, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
}

std::string provenance_text(const std::map<std::string, std::string>& prov) {
  std::string out;
  for (const auto& [k, v] : prov) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw UsageError("provenance entries may not contain '=' in keys or newlines: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> parse_provenance(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: malformed provenance line");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace

Bytes serialize_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model.config() != ckpt.config) throw UsageError("checkpoint: model and config disagree");
  if (ckpt.vocab.size() != static_cast<std::size_t>(ckpt.config.vocab_size)) {
    throw UsageError("checkpoint: vocabulary size does not match config");
  }
  ByteWriter w;
  w.str(std::string_view(kMagic, 4));
  w.u16(kVersion);
  w.lstr(ckpt.config.to_kv());
  const std::string vocab_text = ckpt.vocab.serialize();
  const Sha256 vh = sha256(vocab_text);
  w.bytes(vh);
  w.lstr(vocab_text);
  const auto params = ckpt.model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.lstr(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rows()));
    w.u32(static_cast<std::uint32_t>(p->value.cols()));
    write_matrix_values(w, p->value);
  }
  w.lstr(provenance_text(ckpt.provenance));
  if (ckpt.train_state) {
    const TrainState& s = *ckpt.train_state;
    if (s.m.size() != params.size() || s.v.size() != params.size()) {
      throw UsageError("checkpoint: optimizer state does not match parameters");
    }
    w.u8(1);
    w.u64(s.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (s.m[i].rows() != params[i]->value.rows() || s.m[i].cols() != params[i]->value.cols() ||
          s.v[i].rows() != params[i]->value.rows() || s.v[i].cols() != params[i]->value.cols()) {
        throw UsageError("checkpoint: optimizer moment shape mismatch for " + params[i]->name);
      }
      write_matrix_values(w, s.m[i]);
      write_matrix_values(w, s.v[i]);
    }
  } else {
    w.u8(0);
  }
  w.u32(crc32(w.data()));
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw DataError("checkpoint: bad magic (not a unilog checkpoint)");
  }
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader trailer(bytes.last(4));
  if (crc32(body) != trailer.u32()) throw DataError("checkpoint: checksum mismatch (file is corrupt)");

  ByteReader r(body);
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const ModelConfig config = ModelConfig::from_kv(r.lstr());
  Sha256 stored_hash;
  auto h = r.bytes(32);
  std::copy(h.begin(), h.end(), stored_hash.begin());
  const std::string vocab_text = r.lstr();
  if (sha256(vocab_text) != stored_hash) throw DataError("checkpoint: vocabulary hash mismatch");
  tokenizer::Vocabulary vocab = tokenizer::Vocabulary::parse(vocab_text);
  if (vocab.size() != static_cast<std::size_t>(config.vocab_size)) {
    throw DataError("checkpoint: vocabulary size does not match config");
  }

  Checkpoint ckpt(config, std::move(vocab));
  auto params = ckpt.model.parameters();
  const std::uint32_t n = r.u32();
  if (n != params.size()) throw DataError("checkpoint: parameter count mismatch");
  for (Parameter* p : params) {
    const std::string name = r.lstr();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (name != p->name) throw DataError("checkpoint: expected parameter " + p->name + ", found " + name);
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw DataError("checkpoint: shape mismatch for parameter " + name);
    }
    read_matrix_values(r, p->value);
  }
  ckpt.provenance = parse_provenance(r.lstr());
  const std::uint8_t has_state = r.u8();
  if (has_state > 1) throw DataError("checkpoint: bad optimizer-state flag");
  if (has_state) {
    TrainState s;
    s.step = r.u64();
    for (Parameter* p : params) {
      Matrix m(p->value.rows(), p->value.cols());
      Matrix v(p->value.rows(), p->value.cols());
      read_matrix_values(r, m);
      read_matrix_values(r, v);
      s.m.push_back(std::move(m));
      s.v.push_back(std::move(v));
    }
    ckpt.train_state = std::move(s);
  }
  if (r.remaining() != 0) throw DataError("checkpoint: trailing bytes before checksum");
  ckpt.model.zero_grad();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

Sha256 checkpoint_hash(const Checkpoint& ckpt) { return sha256(serialize_checkpoint(ckpt)); }

}  // namespace unilog::model
