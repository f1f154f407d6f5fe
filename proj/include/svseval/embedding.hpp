// include/svseval/embedding.hpp

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

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "svseval/audio.hpp"
#include "svseval/error.hpp"

namespace svseval {

using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Time-resolved encoder output, one row per frame.
struct EmbeddingSequence {
  FrameMatrix frames;
  std::string encoder_id;
  float frame_rate = 0.0f;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dims() const { return frames.cols(); }
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::Index frame_count = 0;
};

// EMB1 container, little-endian:
//   "EMB1" | u32 version | u32 T | u32 D | u32 dtype | u16 id_len | id bytes
//   | f32 frame_rate | T*D float32, frame-major.
namespace emb1 {

inline constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 0;
inline constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace emb1

inline std::string EncodeEmbeddings(const EmbeddingSequence &seq) {
  if (seq.encoder_id.size() > 0xffff) Fail(ErrorCode::kDimensionOverflow, "encoder_id too long");
  std::string out(emb1::kMagic, 4);
  detail::PutU32(out, emb1::kVersion);
  detail::PutU32(out, static_cast<std::uint32_t>(seq.num_frames()));
  detail::PutU32(out, static_cast<std::uint32_t>(seq.dims()));
  detail::PutU32(out, emb1::kDtypeFloat32);
  detail::PutU16(out, static_cast<std::uint16_t>(seq.encoder_id.size()));
  out += seq.encoder_id;
  detail::PutU32(out, std::bit_cast<std::uint32_t>(seq.frame_rate));
  out.reserve(out.size() + static_cast<std::size_t>(seq.frames.size()) * 4);
  for (Eigen::Index t = 0; t < seq.num_frames(); ++t) {
    for (Eigen::Index d = 0; d < seq.dims(); ++d) detail::PutU32(out, std::bit_cast<std::uint32_t>(seq.frames(t, d)));
  }
  return out;
}

inline EmbeddingSequence DecodeEmbeddings(const std::string &bytes) {
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 4 || std::memcmp(p, emb1::kMagic, 4) != 0) Fail(ErrorCode::kBadMagic, "not an EMB1 file");
  if (n < 22) Fail(ErrorCode::kCorruptHeader, "truncated EMB1 header");
  const std::uint32_t version = detail::ReadU32(p + 4);
  const std::uint32_t frames = detail::ReadU32(p + 8);
  const std::uint32_t dims = detail::ReadU32(p + 12);
  const std::uint32_t dtype = detail::ReadU32(p + 16);
  const std::uint16_t id_len = detail::ReadU16(p + 20);
  if (version != emb1::kVersion) Fail(ErrorCode::kUnsupportedEncoding, "EMB1 version " + std::to_string(version));
  if (dtype != emb1::kDtypeFloat32) Fail(ErrorCode::kUnsupportedEncoding, "EMB1 dtype " + std::to_string(dtype));
  if (frames == 0 || dims == 0) Fail(ErrorCode::kCorruptHeader, "EMB1 with zero frames or dims");
  const std::uint64_t elements = std::uint64_t{frames} * dims;
  if (elements > emb1::kMaxElements) Fail(ErrorCode::kDimensionOverflow, "EMB1 payload too large");
  const std::size_t header = 22 + std::size_t{id_len} + 4;
  if (n < header) Fail(ErrorCode::kCorruptHeader, "truncated EMB1 header");
  if (n - header < elements * 4) Fail(ErrorCode::kTruncatedPayload, "EMB1 payload shorter than T*D*4 bytes");

  EmbeddingSequence seq;
  seq.encoder_id.assign(bytes.data() + 22, id_len);
  seq.frame_rate = std::bit_cast<float>(detail::ReadU32(p + 22 + id_len));
  seq.frames.resize(frames, dims);
  const unsigned char *payload = p + header;
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint32_t d = 0; d < dims; ++d, payload += 4) seq.frames(t, d) = std::bit_cast<float>(detail::ReadU32(payload));
  }
  return seq;
}

inline EmbeddingSequence ReadEmbeddings(const std::filesystem::path &path) {
  return DecodeEmbeddings(detail::ReadFileBytes(path));
}

inline void WriteEmbeddings(const EmbeddingSequence &seq, const std::filesystem::path &path) {
  const std::string bytes = EncodeEmbeddings(seq);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Mean and unbiased (T-1) covariance of the frames, plus ridge * I.
inline GaussianStats FitGaussian(const EmbeddingSequence &seq, double ridge = 0.0) {
  const Eigen::Index frames = seq.num_frames();
  if (frames < 2) Fail(ErrorCode::kTooFewFrames, "need at least two frames to fit a covariance");
  // Rows are visited in lexicographic order so the statistics are bitwise
  // independent of frame order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(frames));
  for (Eigen::Index t = 0; t < frames; ++t) order[static_cast<std::size_t>(t)] = t;
  const Eigen::Index dims = seq.dims();
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const float *ra = seq.frames.row(a).data();
    const float *rb = seq.frames.row(b).data();
    return std::lexicographical_compare(ra, ra + dims, rb, rb + dims);
  });
  Eigen::MatrixXd x(frames, dims);
  for (Eigen::Index t = 0; t < frames; ++t) x.row(t) = seq.frames.row(order[static_cast<std::size_t>(t)]).cast<double>();
  if (!x.allFinite()) Fail(ErrorCode::kNonFiniteInput, "embedding frames contain non-finite values");
  GaussianStats stats;
  stats.frame_count = frames;
  stats.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - stats.mean.transpose();
  stats.covariance = (centered.transpose() * centered) / static_cast<double>(frames - 1);
  // Exact symmetry regardless of the product kernel's summation order.
  stats.covariance = 0.5 * (stats.covariance + stats.covariance.transpose()).eval();
  stats.covariance.diagonal().array() += ridge;
  return stats;
}

/// Principal square root of the PSD part of a symmetric matrix; negative
/// eigenvalues are clamped to zero.
inline Eigen::MatrixXd PsdSqrt(const Eigen::MatrixXd &m) {
  if (m.rows() != m.cols()) Fail(ErrorCode::kDimensionMismatch, "psd_sqrt needs a square matrix");
  if (!m.allFinite()) Fail(ErrorCode::kNonFiniteInput, "psd_sqrt input has non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) Fail(ErrorCode::kNonFiniteInput, "eigendecomposition did not converge");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd out = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

/// Frechet distance between two Gaussians. trace(sqrt(S1 S2)) is taken as
/// trace(sqrt(R S2 R)) with R = sqrt(S1), which is symmetric PSD. The two
/// arguments are put in a fixed order first so the result does not depend
/// on which one is passed first, down to the last bit.
inline double FrechetDistance(const GaussianStats &a, const GaussianStats &b) {
  if (a.mean.size() != b.mean.size()) Fail(ErrorCode::kDimensionMismatch, "Gaussian dimensions differ");
  auto before = [](const Eigen::MatrixXd &x, const Eigen::MatrixXd &y) {
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  };
  const bool swap = before(b.mean, a.mean) || (a.mean == b.mean && before(b.covariance, a.covariance));
  const GaussianStats &first = swap ? b : a, &second = swap ? a : b;
  const double mean_term = (first.mean - second.mean).squaredNorm();
  const Eigen::MatrixXd root_a = PsdSqrt(first.covariance);
  const Eigen::MatrixXd cross = PsdSqrt(root_a * second.covariance * root_a);
  const double trace_term = first.covariance.trace() + second.covariance.trace() - 2.0 * cross.trace();
  return std::max(0.0, mean_term + trace_term);
}

namespace embedding {

inline void CheckCompatible(const EmbeddingSequence &ref, const EmbeddingSequence &est) {
  if (ref.encoder_id != est.encoder_id) {
    Fail(ErrorCode::kEncoderMismatch, "'" + ref.encoder_id + "' vs '" + est.encoder_id + "'");
  }
  if (ref.dims() != est.dims()) Fail(ErrorCode::kDimensionMismatch, "embedding dimensions differ");
}

inline constexpr double kDefaultRelativeRidge = 1e-6;

inline double DefaultRidge(const GaussianStats &unregularized) {
  const auto dims = static_cast<double>(unregularized.covariance.rows());
  return kDefaultRelativeRidge * unregularized.covariance.trace() / dims;
}

}  // namespace embedding

/// Per-pair Frechet audio distance between the frame distributions of a
/// reference and an estimate. Without an explicit ridge each covariance gets
/// 1e-6 * trace / D on its diagonal.
inline double FadSong2Song(const EmbeddingSequence &ref, const EmbeddingSequence &est,
                           std::optional<double> ridge = std::nullopt) {
  embedding::CheckCompatible(ref, est);
  GaussianStats a = FitGaussian(ref, 0.0);
  GaussianStats b = FitGaussian(est, 0.0);
  const double ridge_a = ridge.value_or(embedding::DefaultRidge(a));
  const double ridge_b = ridge.value_or(embedding::DefaultRidge(b));
  a.covariance.diagonal().array() += ridge_a;
  b.covariance.diagonal().array() += ridge_b;
  return FrechetDistance(a, b);
}

/// Mean squared error over time-aligned frames, truncated to the shorter
/// sequence.
inline double EmbeddingMse(const EmbeddingSequence &ref, const EmbeddingSequence &est) {
  embedding::CheckCompatible(ref, est);
  const Eigen::Index frames = std::min(ref.num_frames(), est.num_frames());
  if (frames < 1) Fail(ErrorCode::kTooFewFrames, "empty embedding sequence");
  if (std::abs(ref.num_frames() - est.num_frames()) > 1) {
    Warn("embedding frame counts differ by more than one (" + std::to_string(ref.num_frames()) + " vs " +
         std::to_string(est.num_frames()) + "); truncating");
  }
  const Eigen::MatrixXd diff =
      ref.frames.topRows(frames).cast<double>() - est.frames.topRows(frames).cast<double>();
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

}  // namespace svseval
