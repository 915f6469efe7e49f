// Copyright (c) 2026 The PPN Engine Authors. All Rights Reserved.
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

#include "ppn/weights_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "ppn/error.hpp"

namespace ppn {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  float f32() {
    float v;
    raw(&v, 4);
    return v;
  }
  void raw(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("weight file: unexpected end of data");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kMaxCount = 1u << 30;

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in pieces.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    c = ::crc32(c, bytes.data() + pos, uInt(n));
    pos += n;
  }
  return std::uint32_t(c);
}

std::vector<std::uint8_t> encode_weights(const WeightFile& file) {
  Writer w;
  w.raw("PPNW", 4);
  w.u32(kWeightFormatVersion);
  w.u32(std::uint32_t(file.kind));
  w.u32(std::uint32_t(file.config.size()));
  w.raw(file.config.data(), file.config.size());
  w.u32(std::uint32_t(file.layers.size()));
  for (const auto& l : file.layers) {
    w.u32(l.kind);
    w.u32(std::uint32_t(l.activation));
    w.u32(l.in);
    w.u32(l.out);
    w.u32(l.kernel_width);
    w.u32(l.causal ? 1u : 0u);
    w.u32(std::uint32_t(l.tensors.size()));
    for (const auto& t : l.tensors) w.u32(std::uint32_t(t.size()));
  }
  for (const auto& l : file.layers) {
    for (const auto& t : l.tensors) w.raw(t.data(), t.size() * sizeof(float));
  }
  w.u32(crc32(w.bytes));
  return std::move(w.bytes);
}

WeightFile decode_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw DataError("weight file truncated (" + std::to_string(bytes.size()) + " bytes)");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc32(body) != stored) throw DataError("weight file checksum mismatch (corrupt or truncated)");

  Reader r(body);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, "PPNW", 4) != 0) throw DataError("not a PPNW weight file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) {
    throw DataError("unsupported weight file version " + std::to_string(version) +
                    " (expected " + std::to_string(kWeightFormatVersion) + ")");
  }
  WeightFile file;
  const std::uint32_t kind = r.u32();
  if (kind > std::uint32_t(ModelKind::kEmbedding)) throw DataError("unknown model kind " + std::to_string(kind));
  file.kind = ModelKind(kind);
  const std::uint32_t cfg = r.u32();
  if (cfg > r.remaining()) throw DataError("weight file: config length out of range");
  file.config.resize(cfg);
  r.raw(file.config.data(), cfg);

  const std::uint32_t n_layers = r.u32();
  if (n_layers > 4096) throw DataError("weight file: implausible layer count");
  file.layers.resize(n_layers);
  for (auto& l : file.layers) {
    l.kind = r.u32();
    if (l.kind > kVectorRecord) throw DataError("weight file: unknown layer kind " + std::to_string(l.kind));
    const std::uint32_t act = r.u32();
    if (act > std::uint32_t(Activation::kRelu)) throw DataError("weight file: unknown activation");
    l.activation = Activation(act);
    l.in = r.u32();
    l.out = r.u32();
    l.kernel_width = r.u32();
    l.causal = (r.u32() & 1u) != 0;
    const std::uint32_t n_tensors = r.u32();
    if (n_tensors > 16) throw DataError("weight file: implausible tensor count");
    l.tensors.resize(n_tensors);
    for (auto& t : l.tensors) {
      const std::uint32_t n = r.u32();
      if (n > kMaxCount) throw DataError("weight file: tensor too large");
      t.resize(n);
    }
  }
  for (auto& l : file.layers) {
    for (auto& t : l.tensors) r.raw(t.data(), t.size() * sizeof(float));
  }
  if (r.remaining() != 0) throw DataError("weight file: trailing bytes before checksum");
  return file;
}

void save_weights(const std::filesystem::path& path, const WeightFile& file) {
  const auto bytes = encode_weights(file);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

WeightFile load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_weights(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <typename T>
LayerRecord to_record(const LayerParams<T>& p) {
  LayerRecord r;
  r.kind = std::uint32_t(p.kind);
  r.activation = p.activation;
  r.in = std::uint32_t(p.in);
  r.out = std::uint32_t(p.out);
  r.kernel_width = std::uint32_t(p.kernel_width);
  r.causal = p.causal;
  for (const auto& t : p.tensors) r.tensors.emplace_back(t.value.begin(), t.value.end());
  return r;
}

template <typename T>
void from_record(const LayerRecord& r, LayerParams<T>& p) {
  if (r.kind != std::uint32_t(p.kind) || r.in != p.in || r.out != p.out ||
      r.kernel_width != p.kernel_width || r.activation != p.activation ||
      r.tensors.size() != p.tensors.size()) {
    throw DataError(std::string("weight file layer does not match model (expected ") +
                    to_string(p.kind) + " " + std::to_string(p.in) + "->" +
                    std::to_string(p.out) + ")");
  }
  for (std::size_t i = 0; i < r.tensors.size(); ++i) {
    auto& v = p.tensors[i].value;
    if (r.tensors[i].size() != v.size()) throw DataError("weight file tensor size mismatch");
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = T(r.tensors[i][j]);
  }
}

template <typename T>
WeightFile pack_layers(ModelKind kind, std::string config,
                       const std::vector<const LayerParams<T>*>& layers) {
  WeightFile f;
  f.kind = kind;
  f.config = std::move(config);
  for (const auto* l : layers) f.layers.push_back(to_record(*l));
  return f;
}

template <typename T>
void unpack_layers(const WeightFile& file, const std::vector<LayerParams<T>*>& layers) {
  if (file.layers.size() != layers.size()) {
    throw DataError("weight file has " + std::to_string(file.layers.size()) +
                    " layers, model expects " + std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) from_record(file.layers[i], *layers[i]);
}

template LayerRecord to_record<float>(const LayerParams<float>&);
template LayerRecord to_record<double>(const LayerParams<double>&);
template void from_record<float>(const LayerRecord&, LayerParams<float>&);
template void from_record<double>(const LayerRecord&, LayerParams<double>&);
template WeightFile pack_layers<float>(ModelKind, std::string, const std::vector<const LayerParams<float>*>&);
template WeightFile pack_layers<double>(ModelKind, std::string, const std::vector<const LayerParams<double>*>&);
template void unpack_layers<float>(const WeightFile&, const std::vector<LayerParams<float>*>&);
template void unpack_layers<double>(const WeightFile&, const std::vector<LayerParams<double>*>&);

}  // namespace ppn
