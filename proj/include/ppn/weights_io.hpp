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

#pragma once

// PPNW weight files.
//
// Little-endian layout:
//   "PPNW"                         magic
//   u32 version                    kWeightFormatVersion
//   u32 model kind                 ModelKind
//   u32 n, n bytes                 model config as "key = value" lines
//   u32 layer count
//   per layer: u32 kind, u32 activation, u32 in, u32 out, u32 kernel width,
//              u32 flags (bit 0: causal), u32 tensor count,
//              u32 element count per tensor
//   f32 payload                    every tensor of every layer, in table order
//   u32 crc32                      over all preceding bytes
//
// Embeddings use the same container with one vector record (kind 4): the
// E values followed by their L2 norm as a one-element checksum tensor.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ppn/layers.hpp"

namespace ppn {

inline constexpr std::uint32_t kWeightFormatVersion = 1;
inline constexpr std::uint32_t kVectorRecord = 4;

enum class ModelKind : std::uint32_t { kGeneric = 0, kEmbedder = 1, kEnhancer = 2, kEmbedding = 3 };

struct LayerRecord {
  std::uint32_t kind = 0;
  Activation activation = Activation::kLinear;
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  std::uint32_t kernel_width = 1;
  bool causal = true;
  std::vector<std::vector<float>> tensors;
};

struct WeightFile {
  ModelKind kind = ModelKind::kGeneric;
  std::string config;
  std::vector<LayerRecord> layers;
};

std::vector<std::uint8_t> encode_weights(const WeightFile& file);
/// Verifies the checksum first, then the magic and version. Any problem is a
/// DataError naming the cause.
WeightFile decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const std::filesystem::path& path, const WeightFile& file);
WeightFile load_weights(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

template <typename T>
LayerRecord to_record(const LayerParams<T>& p);
/// Copies a record into already-shaped parameters; mismatches are DataErrors.
template <typename T>
void from_record(const LayerRecord& r, LayerParams<T>& p);

template <typename T>
WeightFile pack_layers(ModelKind kind, std::string config,
                       const std::vector<const LayerParams<T>*>& layers);
template <typename T>
void unpack_layers(const WeightFile& file, const std::vector<LayerParams<T>*>& layers);

}  // namespace ppn
