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

#include "ppn/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ppn/error.hpp"

namespace ppn {

static_assert(std::endian::native == std::endian::little,
              "WAV and weight I/O assume a little-endian host");

void require_pipeline_audio(const AudioBuffer& audio) {
  if (audio.sample_rate != kSampleRate) {
    throw InputError("sample rate " + std::to_string(audio.sample_rate) +
                     " Hz is not supported; expected 48000 Hz");
  }
  for (float v : audio.samples) {
    if (!std::isfinite(v)) throw InputError("audio contains non-finite samples");
  }
}

double energy(std::span<const float> x) {
  double e = 0.0;
  for (float v : x) e += double(v) * double(v);
  return e;
}

namespace {

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError(where + "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const auto len = load_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Some writers leave a bogus length on the final data chunk.
      if (std::memcmp(chunk, "data", 4) != 0) throw DataError(where + "truncated chunk");
    }
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw DataError(where + "short fmt chunk");
      format = load_le<std::uint16_t>(chunk + 8);
      channels = load_le<std::uint16_t>(chunk + 10);
      rate = load_le<std::uint32_t>(chunk + 12);
      bits = load_le<std::uint16_t>(chunk + 22);
      if (format == 0xFFFE && avail >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: sub-format GUID starts with the format tag.
        format = load_le<std::uint16_t>(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) throw DataError(where + "missing fmt chunk");
  if (data == nullptr) throw DataError(where + "missing data chunk");
  if (channels != 1) {
    throw DataError(where + "expected mono audio, got " + std::to_string(channels) +
                    " channels");
  }
  if (rate != std::uint32_t(kSampleRate)) {
    throw DataError(where + "sample rate " + std::to_string(rate) +
                    " Hz is not supported; expected 48000 Hz (no resampler)");
  }

  AudioBuffer out;
  if (format == 1 && bits == 16) {
    const std::size_t n = data_len / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = float(load_le<std::int16_t>(data + 2 * i)) / 32768.0f;
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t n = data_len / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const float v = load_le<float>(data + 4 * i);
      if (!std::isfinite(v)) throw DataError(where + "non-finite sample");
      out.samples[i] = v;
    }
  } else {
    throw DataError(where + "unsupported encoding (format " + std::to_string(format) +
                    ", " + std::to_string(bits) + " bits); need PCM16 or float32");
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_len = std::uint32_t(audio.size() * (bits / 8));

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_le<std::uint32_t>(out, 36 + data_len);
  out.append("WAVEfmt ");
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, pcm ? 1 : 3);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, std::uint32_t(audio.sample_rate));
  put_le<std::uint32_t>(out, std::uint32_t(audio.sample_rate) * (bits / 8));
  put_le<std::uint16_t>(out, bits / 8);
  put_le<std::uint16_t>(out, bits);
  out.append("data");
  put_le<std::uint32_t>(out, data_len);
  for (float v : audio.samples) {
    if (pcm) {
      const float c = std::clamp(v, -1.0f, 1.0f) * 32767.0f;
      put_le<std::int16_t>(out, std::int16_t(std::lround(c)));
    } else {
      put_le<float>(out, v);
    }
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + tmp.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ppn
