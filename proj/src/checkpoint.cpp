// Copyright 2026 The medt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "medt/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "medt/error.hpp"

namespace medt::inline MEDT_NS {

namespace {

constexpr char kMagic[4] = {'M', 'E', 'D', 'T'};
constexpr std::size_t kHeaderSize = 12;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint: truncated archive");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void CheckpointArchive::add(const std::string& name, const Tensor& values) {
  if (name.empty() || name.size() > 0xffff) throw ContractError("checkpoint: invalid tensor name");
  if (values.rank() > 0xff) throw ContractError("checkpoint: rank too large for " + name);
  Tensor copy = values.detach();
  for (auto& e : entries_) {
    if (e.first == name) {
      e.second = std::move(copy);
      return;
    }
  }
  entries_.emplace_back(name, std::move(copy));
}

void CheckpointArchive::add_text(const std::string& name, const std::string& text) {
  // Text metadata is stored one byte per payload value.
  std::vector<Real> values(text.begin(), text.end());
  if (values.empty()) values.push_back(Real(0));
  const std::size_t n = values.size();
  add(name, Tensor({n}, std::move(values)));
}

const Tensor* CheckpointArchive::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return &e.second;
  return nullptr;
}

std::string CheckpointArchive::text(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw FormatError("checkpoint: missing metadata entry " + name);
  std::string s;
  for (Real v : t->data()) {
    if (v != Real(0)) s.push_back(static_cast<char>(static_cast<int>(v)));
  }
  return s;
}

std::vector<std::uint8_t> CheckpointArchive::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (Real v : t.data()) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  put_u32(out, crc32(std::span<const std::uint8_t>(out).subspan(kHeaderSize)));
  return out;
}

CheckpointArchive CheckpointArchive::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (not a MEDT archive)");
  }
  Reader r(bytes);
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  CheckpointArchive archive;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u16());
    const std::size_t rank = r.u8();
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    const std::size_t n = shape_numel(shape);
    r.need(n * 4);
    std::vector<Real> values(n);
    for (auto& v : values) {
      const std::uint32_t bits = r.u32();
      float f;
      std::memcpy(&f, &bits, sizeof f);
      v = static_cast<Real>(f);
    }
    archive.entries_.emplace_back(name, Tensor(std::move(shape), std::move(values)));
  }
  const std::size_t payload_end = r.pos();
  const std::uint32_t stored = r.u32();
  if (r.pos() != bytes.size()) throw FormatError("checkpoint: trailing bytes after CRC");
  const auto region = bytes.subspan(kHeaderSize, payload_end - kHeaderSize);
  if (crc32(region) != stored) throw FormatError("checkpoint: CRC mismatch");
  return archive;
}

void CheckpointArchive::save(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

CheckpointArchive CheckpointArchive::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

CheckpointArchive snapshot_parameters(const ParameterRegistry& registry) {
  CheckpointArchive archive;
  for (const auto& [name, t] : registry) archive.add(name, t);
  return archive;
}

void restore_parameters(ParameterRegistry& registry, const CheckpointArchive& archive) {
  for (const auto& [name, t] : registry) {
    const Tensor* src = archive.find(name);
    if (!src) throw FormatError("checkpoint: missing parameter " + name);
    if (src->shape() != t.shape()) {
      throw FormatError("checkpoint: shape mismatch for " + name + ": " + shape_to_string(src->shape()) +
                        " vs " + shape_to_string(t.shape()));
    }
  }
  for (const auto& [name, t] : registry) {
    Tensor dest = t;
    auto src = archive.find(name)->data();
    std::copy(src.begin(), src.end(), dest.mutable_data().begin());
  }
}

std::string serialize_model_config(const ModelConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "variant=" << variant_name(c.variant) << '\n'
     << "encoder_layers=" << c.encoder_layers << '\n'
     << "decoder_layers=" << c.decoder_layers << '\n'
     << "d_model=" << c.d_model << '\n'
     << "d_ff=" << c.d_ff << '\n'
     << "heads=" << c.heads << '\n'
     << "tokens_a=" << c.tokens_a << '\n'
     << "tokens_b=" << c.tokens_b << '\n'
     << "d_feat=" << c.d_feat << '\n'
     << "conv_channels=" << c.conv_channels << '\n'
     << "encoder_final_norm=" << (c.encoder_final_norm ? 1 : 0) << '\n'
     << "dropout=" << c.dropout << '\n'
     << "mol_weight=" << c.mol_weight << '\n'
     << "label_smoothing=" << c.label_smoothing << '\n';
  return os.str();
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    if (key == "variant") c.variant = parse_variant(value);
    else if (key == "encoder_layers") c.encoder_layers = as_size();
    else if (key == "decoder_layers") c.decoder_layers = as_size();
    else if (key == "d_model") c.d_model = as_size();
    else if (key == "d_ff") c.d_ff = as_size();
    else if (key == "heads") c.heads = as_size();
    else if (key == "tokens_a") c.tokens_a = as_size();
    else if (key == "tokens_b") c.tokens_b = as_size();
    else if (key == "d_feat") c.d_feat = as_size();
    else if (key == "conv_channels") c.conv_channels = as_size();
    else if (key == "encoder_final_norm") c.encoder_final_norm = as_size() != 0;
    else if (key == "dropout") c.dropout = std::stod(value);
    else if (key == "mol_weight") c.mol_weight = std::stod(value);
    else if (key == "label_smoothing") c.label_smoothing = std::stod(value);
    else throw FormatError("model config: unknown key '" + key + "'");
  }
  return c;
}

CheckpointArchive model_archive(const MedModel& model) {
  CheckpointArchive archive = snapshot_parameters(model.parameters());
  archive.add_text("__meta.config", serialize_model_config(model.config()));
  return archive;
}

MedModel model_from_archive(const CheckpointArchive& archive) {
  MedModel model(parse_model_config(archive.text("__meta.config")), 0);
  restore_parameters(model.mutable_parameters(), archive);
  return model;
}

void save_model(const std::string& path, const MedModel& model) { model_archive(model).save(path); }

MedModel load_model(const std::string& path) { return model_from_archive(CheckpointArchive::load(path)); }

}  // namespace medt::inline MEDT_NS
