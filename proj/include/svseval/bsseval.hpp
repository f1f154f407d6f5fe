// include/svseval/bsseval.hpp

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

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "svseval/audio.hpp"
#include "svseval/error.hpp"

namespace svseval {

struct ProjectionConfig {
  std::size_t filter_length = 512;
  // Diagonal loading, relative to trace(Gram) / dim.
  double regularization_eps = 1e-10;
  double db_cap = 300.0;

  void Validate() const {
    if (filter_length < 1) Fail(ErrorCode::kInvalidConfig, "filter_length must be >= 1");
    if (!(regularization_eps > 0.0)) Fail(ErrorCode::kInvalidConfig, "regularization_eps must be > 0");
    if (!(db_cap > 0.0)) Fail(ErrorCode::kInvalidConfig, "db_cap must be > 0");
  }
};

struct BssEvalResult {
  double sdr = 0.0;
  std::optional<double> sir;  // present only with interference references
  std::optional<double> sar;
};

/// Energy ratio in dB, saturating at +-cap. A zero numerator is -cap.
inline double CappedDb(double numerator, double denominator, double cap) {
  const double threshold = std::pow(10.0, -cap / 10.0);
  if (numerator <= 0.0) return -cap;
  if (denominator <= numerator * threshold) return cap;
  if (numerator <= denominator * threshold) return -cap;
  return 10.0 * std::log10(numerator / denominator);
}

namespace bss {

// The ridge term bounds how small an FIR projection residual can get
// (about eps times the signal), so ratios beyond 20 log10(1/eps) - 10 dB are
// indistinguishable from an exact fit and are reported as the cap.
inline double ProjectionDb(double numerator, double denominator, const ProjectionConfig &config) {
  const double db = CappedDb(numerator, denominator, config.db_cap);
  const double resolvable = -20.0 * std::log10(config.regularization_eps) - 10.0;
  return db >= resolvable ? config.db_cap : db;
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline bool AllZero(std::span<const double> x) {
  for (double v : x) {
    if (v != 0.0) return false;
  }
  return true;
}

// c[k + (L-1)] = sum_n a[n] * b[n + k] for k in (-L, L).
inline std::vector<double> CrossCorrelation(std::span<const double> a, std::span<const double> b,
                                            std::size_t max_lag) {
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  const auto lags = static_cast<std::ptrdiff_t>(max_lag);
  std::vector<double> c(2 * max_lag - 1, 0.0);
  for (std::ptrdiff_t k = -(lags - 1); k < lags; ++k) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -k);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, n - k);
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) acc += a[i] * b[i + k];
    c[static_cast<std::size_t>(k + lags - 1)] = acc;
  }
  return c;
}

// rhs[l] = sum_n est[n] * ref[n - l]; est is implicitly zero-extended.
inline std::vector<double> FilterCorrelation(std::span<const double> est, std::span<const double> ref,
                                             std::size_t filter_length) {
  std::vector<double> rhs(filter_length, 0.0);
  for (std::size_t l = 0; l < filter_length && l < est.size(); ++l) {
    double acc = 0.0;
    for (std::size_t n = l; n < est.size(); ++n) acc += est[n] * ref[n - l];
    rhs[l] = acc;
  }
  return rhs;
}

/// Solves the symmetric positive definite Toeplitz system T x = b where T
/// has first row `first_row`, by Levinson recursion in O(n^2).
inline std::vector<double> SolveToeplitz(std::span<const double> first_row, std::span<const double> b) {
  const std::size_t n = first_row.size();
  const double t0 = first_row[0];
  if (!(t0 > 0.0)) Fail(ErrorCode::kSingularSystem, "Toeplitz diagonal is not positive");
  std::vector<double> r(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = first_row[i] / t0;
    rhs[i] = b[i] / t0;
  }
  std::vector<double> x{rhs[0]};
  if (n == 1) return x;
  std::vector<double> y{-r[1]};
  double alpha = -r[1];
  double beta = 1.0;
  std::vector<double> next;
  next.reserve(n);
  for (std::size_t k = 1; k < n; ++k) {
    beta *= (1.0 - alpha * alpha);
    if (!(beta > 0.0) || !std::isfinite(beta)) Fail(ErrorCode::kSingularSystem, "Toeplitz system not positive definite");
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += r[i + 1] * x[k - 1 - i];
    const double mu = (rhs[k] - acc) / beta;
    next.assign(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) next[i] = x[i] + mu * y[k - 1 - i];
    next[k] = mu;
    x.swap(next);
    if (k + 1 < n) {
      acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += r[i + 1] * y[k - 1 - i];
      alpha = (-r[k + 1] - acc) / beta;
      next.assign(k + 1, 0.0);
      for (std::size_t i = 0; i < k; ++i) next[i] = y[i] + alpha * y[k - 1 - i];
      next[k] = alpha;
      y.swap(next);
    }
  }
  return x;
}

// Adds sum_l h[l] * ref[n - l] into out (length N + L - 1).
inline void AccumulateFiltered(std::span<const double> ref, std::span<const double> h, std::vector<double> &out) {
  for (std::size_t l = 0; l < h.size(); ++l) {
    const double g = h[l];
    if (g == 0.0) continue;
    for (std::size_t n = 0; n < ref.size(); ++n) out[n + l] += g * ref[n];
  }
}

inline std::vector<double> ZeroExtend(std::span<const double> x, std::size_t extra) {
  std::vector<double> out(x.begin(), x.end());
  out.resize(x.size() + extra, 0.0);
  return out;
}

inline double Energy(std::span<const double> x) { return Dot(x, x); }

/// Least-squares projection of `est` onto the span of FIR-filtered copies of
/// one reference (full linear convolution, output length N + L - 1).
inline std::vector<double> ProjectSingle(std::span<const double> est, std::span<const double> ref,
                                         const ProjectionConfig &config) {
  const std::size_t L = config.filter_length;
  const std::vector<double> corr = CrossCorrelation(ref, ref, L);
  std::vector<double> first_row(corr.begin() + static_cast<std::ptrdiff_t>(L - 1), corr.end());
  // trace / L of a Toeplitz Gram matrix is its diagonal.
  first_row[0] *= 1.0 + config.regularization_eps;
  const std::vector<double> rhs = FilterCorrelation(est, ref, L);
  const std::vector<double> h = SolveToeplitz(first_row, rhs);
  std::vector<double> out(est.size() + L - 1, 0.0);
  AccumulateFiltered(ref, h, out);
  return out;
}

/// Joint projection onto the filtered span of several references; the Gram
/// matrix is block Toeplitz and solved densely by Cholesky.
inline std::vector<double> ProjectJoint(std::span<const double> est,
                                        const std::vector<std::span<const double>> &refs,
                                        const ProjectionConfig &config) {
  const std::size_t L = config.filter_length;
  const std::size_t K = refs.size();
  const auto dim = static_cast<Eigen::Index>(K * L);
  Eigen::MatrixXd gram(dim, dim);
  Eigen::VectorXd rhs(dim);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i; j < K; ++j) {
      const std::vector<double> c = CrossCorrelation(refs[i], refs[j], L);
      for (std::size_t l1 = 0; l1 < L; ++l1) {
        for (std::size_t l2 = 0; l2 < L; ++l2) {
          // G_ij[l1, l2] = sum_m r_i[m] r_j[m + l1 - l2]
          const double v = c[l1 - l2 + L - 1];
          gram(static_cast<Eigen::Index>(i * L + l1), static_cast<Eigen::Index>(j * L + l2)) = v;
          gram(static_cast<Eigen::Index>(j * L + l2), static_cast<Eigen::Index>(i * L + l1)) = v;
        }
      }
    }
    const std::vector<double> b = FilterCorrelation(est, refs[i], L);
    for (std::size_t l = 0; l < L; ++l) rhs(static_cast<Eigen::Index>(i * L + l)) = b[l];
  }
  const double load = config.regularization_eps * gram.trace() / static_cast<double>(dim);
  gram.diagonal().array() += load;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) Fail(ErrorCode::kSingularSystem, "joint Gram matrix is not positive definite");
  const Eigen::VectorXd h = llt.solve(rhs);
  if (!h.allFinite()) Fail(ErrorCode::kSingularSystem, "joint projection produced non-finite filters");
  std::vector<double> out(est.size() + L - 1, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    AccumulateFiltered(refs[i], std::span<const double>(h.data() + i * L, L), out);
  }
  return out;
}

inline void CheckPair(const AudioBuffer &estimate, const AudioBuffer &reference) {
  if (estimate.size() != reference.size()) Fail(ErrorCode::kLengthMismatch, "estimate and reference lengths differ");
  if (estimate.empty()) Fail(ErrorCode::kEmptyBuffer, "empty signals");
  detail::CheckFinite(estimate, "estimate");
  detail::CheckFinite(reference, "reference");
  if (AllZero(reference.samples)) Fail(ErrorCode::kZeroReference, "reference is all zero");
}

}  // namespace bss

/// Scale-invariant SDR: projection onto a single gain of the reference.
inline double SiSdr(const AudioBuffer &estimate, const AudioBuffer &reference, double db_cap = 300.0) {
  bss::CheckPair(estimate, reference);
  const std::span<const double> est(estimate.samples), ref(reference.samples);
  const double alpha = bss::Dot(est, ref) / bss::Dot(ref, ref);
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double s = alpha * ref[i];
    const double e = s - est[i];
    target += s * s;
    residual += e * e;
  }
  return CappedDb(target, residual, db_cap);
}

/// SDR with the target modelled as an FIR-filtered reference.
inline double SdrFir(const AudioBuffer &estimate, const AudioBuffer &reference, const ProjectionConfig &config = {}) {
  config.Validate();
  bss::CheckPair(estimate, reference);
  if (reference.size() <= config.filter_length) {
    Fail(ErrorCode::kBufferTooShort, "signal length must exceed filter_length");
  }
  const std::vector<double> target = bss::ProjectSingle(estimate.samples, reference.samples, config);
  const std::vector<double> est = bss::ZeroExtend(estimate.samples, config.filter_length - 1);
  double residual = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) residual += (est[i] - target[i]) * (est[i] - target[i]);
  return bss::ProjectionDb(bss::Energy(target), residual, config);
}

/// Components of the estimate, each of length N + filter_length - 1.
struct BssDecomposition {
  std::vector<double> target;
  std::vector<double> interference;
  std::vector<double> artifacts;
};

inline BssDecomposition DecomposeEstimate(const AudioBuffer &estimate, const AudioBuffer &target_ref,
                                          std::span<const AudioBuffer> interference_refs,
                                          const ProjectionConfig &config = {}) {
  config.Validate();
  bss::CheckPair(estimate, target_ref);
  for (const auto &r : interference_refs) {
    if (r.size() != estimate.size()) Fail(ErrorCode::kLengthMismatch, "interference length differs");
    detail::CheckFinite(r, "interference reference");
  }
  if (estimate.size() <= config.filter_length) {
    Fail(ErrorCode::kBufferTooShort, "signal length must exceed filter_length");
  }
  BssDecomposition d;
  d.target = bss::ProjectSingle(estimate.samples, target_ref.samples, config);
  const std::vector<double> est = bss::ZeroExtend(estimate.samples, config.filter_length - 1);
  std::vector<double> all;
  if (interference_refs.empty()) {
    all = d.target;
  } else {
    std::vector<std::span<const double>> refs{target_ref.samples};
    for (const auto &r : interference_refs) refs.emplace_back(r.samples);
    all = bss::ProjectJoint(estimate.samples, refs, config);
  }
  d.interference.resize(est.size());
  d.artifacts.resize(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    d.interference[i] = all[i] - d.target[i];
    d.artifacts[i] = est[i] - all[i];
  }
  return d;
}

inline BssEvalResult BssEvalSources(const AudioBuffer &estimate, const AudioBuffer &target_ref,
                                    std::span<const AudioBuffer> interference_refs,
                                    const ProjectionConfig &config = {}) {
  const BssDecomposition d = DecomposeEstimate(estimate, target_ref, interference_refs, config);
  const std::size_t n = d.target.size();
  double target = 0.0, interf = 0.0, artif = 0.0, distortion = 0.0, wanted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = d.target[i], e = d.interference[i], a = d.artifacts[i];
    target += t * t;
    interf += e * e;
    artif += a * a;
    distortion += (e + a) * (e + a);
    wanted += (t + e) * (t + e);
  }
  BssEvalResult result;
  result.sdr = bss::ProjectionDb(target, distortion, config);
  if (!interference_refs.empty()) {
    result.sir = bss::ProjectionDb(target, interf, config);
    result.sar = bss::ProjectionDb(wanted, artif, config);
  }
  return result;
}

}  // namespace svseval
