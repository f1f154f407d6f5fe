// include/svseval/audio.hpp

// Copyright 2026 The svseval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "svseval/error.hpp"
#include "svseval/random.hpp"

namespace svseval {

/// Single-channel signal, nominal full scale 1.0.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 44100;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavEncoding { kPcm16, kPcm24, kFloat32 };

namespace detail {

inline std::uint32_t ReadU32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t ReadU16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void PutU32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void PutU16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline std::string ReadFileBytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void CheckFinite(const AudioBuffer &buffer, const char *what) {
  for (double v : buffer.samples) {
    if (!std::isfinite(v)) Fail(ErrorCode::kNonFiniteInput, std::string(what) + " has non-finite samples");
  }
}

}  // namespace detail

/// Decodes an in-memory RIFF/WAVE image. Returns one buffer per channel.
inline std::vector<AudioBuffer> DecodeWav(const std::string &bytes) {
  const auto *data = reinterpret_cast<const unsigned char *>(bytes.data());
  const std::size_t n = bytes.size();
  if (n == 0) Fail(ErrorCode::kEmptyFile, "empty file");
  if (n < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    Fail(ErrorCode::kCorruptHeader, "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_offset = 0, data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint32_t chunk_size = detail::ReadU32(data + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > n) Fail(ErrorCode::kCorruptHeader, "truncated fmt chunk");
      format = detail::ReadU16(data + body);
      channels = detail::ReadU16(data + body + 2);
      rate = detail::ReadU32(data + body + 4);
      bits = detail::ReadU16(data + body + 14);
      if (format == 0xFFFE) {
        if (chunk_size < 40 || body + 26 > n) Fail(ErrorCode::kCorruptHeader, "truncated extensible fmt chunk");
        format = detail::ReadU16(data + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      data_offset = body;
      // Streaming writers leave placeholder sizes; trust the file length.
      data_size = std::min<std::size_t>(chunk_size, n - body);
      have_data = true;
      break;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  if (!have_fmt || !have_data) Fail(ErrorCode::kCorruptHeader, "missing fmt or data chunk");
  if (channels == 0 || rate == 0) Fail(ErrorCode::kCorruptHeader, "zero channels or sample rate");

  double scale = 0.0;
  if (format == 1 && bits == 16) {
    scale = 1.0 / 32768.0;
  } else if (format == 1 && bits == 24) {
    scale = 1.0 / 8388608.0;
  } else if (format == 3 && bits == 32) {
    scale = 1.0;
  } else {
    Fail(ErrorCode::kUnsupportedEncoding,
         "format tag " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) Fail(ErrorCode::kEmptyFile, "no sample frames");

  std::vector<AudioBuffer> out(channels);
  for (auto &ch : out) {
    ch.sample_rate = static_cast<int>(rate);
    ch.samples.resize(frames);
  }
  const unsigned char *p = data + data_offset;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c, p += bytes_per_sample) {
      double v;
      if (bits == 16) {
        v = static_cast<std::int16_t>(detail::ReadU16(p)) * scale;
      } else if (bits == 24) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = s * scale;
      } else {
        v = std::bit_cast<float>(detail::ReadU32(p));
      }
      out[c].samples[f] = v;
    }
  }
  return out;
}

inline std::vector<AudioBuffer> LoadWav(const std::filesystem::path &path) {
  return DecodeWav(detail::ReadFileBytes(path));
}

/// Encodes interleaved channels. PCM encodings round half away from zero
/// and saturate at the integer range.
inline std::string EncodeWav(std::span<const AudioBuffer> channels,
                             WavEncoding encoding = WavEncoding::kFloat32) {
  if (channels.empty()) Fail(ErrorCode::kEmptyBuffer, "no channels to write");
  const std::size_t frames = channels[0].size();
  const int rate = channels[0].sample_rate;
  for (const auto &ch : channels) {
    if (ch.size() != frames) Fail(ErrorCode::kLengthMismatch, "channel lengths differ");
    if (ch.sample_rate != rate) Fail(ErrorCode::kRateMismatch, "channel rates differ");
  }
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : encoding == WavEncoding::kPcm24 ? 24 : 32;
  const std::uint16_t format = encoding == WavEncoding::kFloat32 ? 3 : 1;
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * nch * (bits / 8));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::PutU32(out, 16);
  detail::PutU16(out, format);
  detail::PutU16(out, nch);
  detail::PutU32(out, static_cast<std::uint32_t>(rate));
  detail::PutU32(out, static_cast<std::uint32_t>(rate) * nch * (bits / 8));
  detail::PutU16(out, static_cast<std::uint16_t>(nch * (bits / 8)));
  detail::PutU16(out, bits);
  out += "data";
  detail::PutU32(out, data_bytes);

  auto quantize = [](double v, double full_scale) {
    const double scaled = std::round(v * full_scale);
    return static_cast<std::int32_t>(std::clamp(scaled, -full_scale, full_scale - 1.0));
  };
  for (std::size_t f = 0; f < frames; ++f) {
    for (const auto &ch : channels) {
      const double v = ch.samples[f];
      if (encoding == WavEncoding::kFloat32) {
        detail::PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else if (encoding == WavEncoding::kPcm16) {
        detail::PutU16(out, static_cast<std::uint16_t>(quantize(v, 32768.0)));
      } else {
        const auto s = static_cast<std::uint32_t>(quantize(v, 8388608.0));
        out.push_back(static_cast<char>(s & 0xff));
        out.push_back(static_cast<char>((s >> 8) & 0xff));
        out.push_back(static_cast<char>((s >> 16) & 0xff));
      }
    }
  }
  return out;
}

inline void WriteWav(const std::filesystem::path &path, std::span<const AudioBuffer> channels,
                     WavEncoding encoding = WavEncoding::kFloat32) {
  const std::string bytes = EncodeWav(channels, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kIoError, "short write to " + path.string());
}

inline void WriteWav(const std::filesystem::path &path, const AudioBuffer &mono,
                     WavEncoding encoding = WavEncoding::kFloat32) {
  WriteWav(path, std::span<const AudioBuffer>(&mono, 1), encoding);
}

/// Per-sample arithmetic mean across channels.
inline AudioBuffer MixdownMono(std::span<const AudioBuffer> channels) {
  if (channels.empty()) Fail(ErrorCode::kEmptyBuffer, "no channels to mix");
  if (channels.size() == 1) return channels[0];
  AudioBuffer out;
  out.sample_rate = channels[0].sample_rate;
  out.samples.assign(channels[0].size(), 0.0);
  for (const auto &ch : channels) {
    if (ch.size() != out.size()) Fail(ErrorCode::kLengthMismatch, "channel lengths differ");
    if (ch.sample_rate != out.sample_rate) Fail(ErrorCode::kRateMismatch, "channel rates differ");
  }
  const double inv = 1.0 / static_cast<double>(channels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Summation order fixed by sorting so the result does not depend on
    // channel order.
    double acc = 0.0;
    if (channels.size() == 2) {
      acc = channels[0].samples[i] + channels[1].samples[i];
    } else {
      std::vector<double> column(channels.size());
      for (std::size_t c = 0; c < channels.size(); ++c) column[c] = channels[c].samples[i];
      std::sort(column.begin(), column.end());
      for (double v : column) acc += v;
    }
    out.samples[i] = acc * inv;
  }
  return out;
}

inline AudioBuffer LoadWavMono(const std::filesystem::path &path) {
  return MixdownMono(LoadWav(path));
}

/// RMS level in dBFS. All-zero input yields -infinity.
inline double RmsDbfs(std::span<const double> samples) {
  if (samples.empty()) Fail(ErrorCode::kEmptyBuffer, "rms of empty buffer");
  double energy = 0.0;
  for (double v : samples) energy += v * v;
  const double mean_square = energy / static_cast<double>(samples.size());
  if (mean_square == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mean_square);
}

inline double RmsDbfs(const AudioBuffer &buffer) { return RmsDbfs(std::span<const double>(buffer.samples)); }

inline AudioBuffer Slice(const AudioBuffer &buffer, std::size_t offset, std::size_t length) {
  if (offset + length > buffer.size()) Fail(ErrorCode::kBufferTooShort, "slice past end of buffer");
  AudioBuffer out;
  out.sample_rate = buffer.sample_rate;
  out.samples.assign(buffer.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     buffer.samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

struct ExcerptOptions {
  double duration_s = 5.0;
  double threshold_db = -30.0;
  std::uint32_t rng_seed = 0;
  int max_draws = 10000;
};

/// Draws window offsets uniformly in [0, length - window] until the target's
/// RMS over the window exceeds the threshold. The mixture only has to agree
/// in geometry; it is cut at the same offset by the caller.
inline std::size_t SelectExcerpt(const AudioBuffer &target, const AudioBuffer &mixture,
                                 const ExcerptOptions &options) {
  if (target.size() != mixture.size()) Fail(ErrorCode::kLengthMismatch, "target and mixture lengths differ");
  if (target.sample_rate != mixture.sample_rate) Fail(ErrorCode::kRateMismatch, "target and mixture rates differ");
  const auto window = static_cast<std::size_t>(std::llround(options.duration_s * target.sample_rate));
  if (window == 0 || window > target.size()) {
    Fail(ErrorCode::kBufferTooShort, "excerpt of " + std::to_string(window) + " samples does not fit");
  }
  const std::uint64_t positions = target.size() - window + 1;
  IndexDraw draw(options.rng_seed);
  const std::span<const double> all(target.samples);
  for (int i = 0; i < options.max_draws; ++i) {
    const auto offset = static_cast<std::size_t>(draw(positions));
    if (RmsDbfs(all.subspan(offset, window)) > options.threshold_db) return offset;
  }
  Fail(ErrorCode::kNoQualifyingExcerpt,
       "no window above " + std::to_string(options.threshold_db) + " dB after " +
           std::to_string(options.max_draws) + " draws");
}

}  // namespace svseval
