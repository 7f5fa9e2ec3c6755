// src/lfcc.cc

// Copyright 2026  cmbench authors

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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>

#include "cm/dsp.h"
#include "cm/error.h"

namespace cm {

namespace {

constexpr double kLogFloor = 1e-10;
constexpr int kDeltaWindow = 2;

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// FFTW planning is not thread-safe; executing a plan on fresh arrays is.
// FFTW_ESTIMATE keeps the plan, and so the output, identical across runs.
fftw_plan RealFftPlan(int n) {
  static std::mutex mu;
  static std::map<int, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  double *in = fftw_alloc_real(size_t(n));
  fftw_complex *out = fftw_alloc_complex(size_t(n / 2 + 1));
  fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  if (p == nullptr) Fail(ErrorKind::kParameter, "cannot plan a " + std::to_string(n) + "-point FFT");
  plans.emplace(n, p);
  return p;
}

}  // namespace

int LfccConfig::FrameLength(int sample_rate_hz) const {
  return int(std::lround(frame_len_ms * sample_rate_hz / 1000.0));
}

int LfccConfig::FrameShift(int sample_rate_hz) const {
  return int(std::lround(frame_shift_ms * sample_rate_hz / 1000.0));
}

void LfccConfig::Validate(int sample_rate_hz) const {
  if (sample_rate_hz <= 0) Fail(ErrorKind::kParameter, "sample rate must be positive");
  const int len = FrameLength(sample_rate_hz);
  const int shift = FrameShift(sample_rate_hz);
  if (len <= 0 || shift <= 0) Fail(ErrorKind::kParameter, "frame length and shift must be positive");
  if (!IsPowerOfTwo(fft_size)) Fail(ErrorKind::kParameter, "fft_size must be a power of two");
  if (len > fft_size)
    Fail(ErrorKind::kParameter, "frame length " + std::to_string(len) +
                                    " exceeds fft_size " + std::to_string(fft_size));
  if (n_filters < 1 || n_ceps < 1 || n_ceps > n_filters)
    Fail(ErrorKind::kParameter, "need 1 <= n_ceps <= n_filters");
}

int NumFrames(size_t num_samples, int frame_len, int frame_shift) {
  if (num_samples < size_t(frame_len)) return 0;
  return int((num_samples - size_t(frame_len)) / size_t(frame_shift)) + 1;
}

std::vector<double> HannWindow(int length) {
  // Periodic Hann.
  std::vector<double> w(static_cast<size_t>(length));
  for (int n = 0; n < length; ++n)
    w[size_t(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return w;
}

std::vector<std::vector<double>> LinearFilterbank(int n_filters, int fft_size,
                                                  int sample_rate_hz) {
  const int n_bins = fft_size / 2 + 1;
  const double nyquist = sample_rate_hz / 2.0;
  const double spacing = nyquist / (n_filters + 1);
  std::vector<std::vector<double>> bank(size_t(n_filters),
                                        std::vector<double>(size_t(n_bins), 0.0));
  for (int m = 0; m < n_filters; ++m) {
    const double left = spacing * m;
    const double center = spacing * (m + 1);
    const double right = spacing * (m + 2);
    for (int k = 0; k < n_bins; ++k) {
      const double f = double(k) * sample_rate_hz / fft_size;
      double w = 0.0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      bank[size_t(m)][size_t(k)] = w;
    }
  }
  return bank;
}

std::vector<std::vector<double>> DctMatrix(int n_out, int n_in) {
  std::vector<std::vector<double>> dct(static_cast<size_t>(n_out),
                                       std::vector<double>(static_cast<size_t>(n_in)));
  for (int k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
    for (int m = 0; m < n_in; ++m)
      dct[size_t(k)][size_t(m)] =
          scale * std::cos(std::numbers::pi * k * (m + 0.5) / n_in);
  }
  return dct;
}

FeatureSequence ComputeDeltas(const FeatureSequence &x) {
  FeatureSequence out(x.num_frames, x.dim, x.frame_shift_s);
  const int n = x.num_frames;
  if (n == 0) return out;
  double denom = 0.0;
  for (int k = 1; k <= kDeltaWindow; ++k) denom += 2.0 * k * k;
  for (int t = 0; t < n; ++t) {
    for (int d = 0; d < x.dim; ++d) {
      double acc = 0.0;
      for (int k = 1; k <= kDeltaWindow; ++k) {
        const int ahead = std::min(t + k, n - 1);
        const int behind = std::max(t - k, 0);
        acc += k * (double(x.at(ahead, d)) - double(x.at(behind, d)));
      }
      out.at(t, d) = float(acc / denom);
    }
  }
  return out;
}

FeatureSequence ExtractLfcc(const Waveform &wave, const LfccConfig &cfg) {
  const int rate = wave.sample_rate_hz;
  cfg.Validate(rate);
  const int frame_len = cfg.FrameLength(rate);
  const int shift = cfg.FrameShift(rate);
  const int n_frames = NumFrames(wave.samples.size(), frame_len, shift);
  if (n_frames < 1)
    Fail(ErrorKind::kInsufficientInput,
         "waveform of " + std::to_string(wave.samples.size()) +
             " samples is shorter than one frame (" + std::to_string(frame_len) + ")");

  const auto window = HannWindow(frame_len);
  const auto bank = LinearFilterbank(cfg.n_filters, cfg.fft_size, rate);
  const auto dct = DctMatrix(cfg.n_ceps, cfg.n_filters);
  const int n_bins = cfg.fft_size / 2 + 1;
  const double shift_s = double(shift) / rate;

  FeatureSequence ceps(n_frames, cfg.n_ceps, shift_s);
  const fftw_plan plan = RealFftPlan(cfg.fft_size);
  std::vector<double> buf(static_cast<size_t>(cfg.fft_size));
  std::vector<std::complex<double>> spec(static_cast<size_t>(n_bins));
  std::vector<double> power(static_cast<size_t>(n_bins));
  std::vector<double> log_energy(static_cast<size_t>(cfg.n_filters));
  for (int t = 0; t < n_frames; ++t) {
    const float *frame = wave.samples.data() + size_t(t) * size_t(shift);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int i = 0; i < frame_len; ++i) buf[size_t(i)] = double(frame[i]) * window[size_t(i)];
    fftw_execute_dft_r2c(plan, buf.data(), reinterpret_cast<fftw_complex *>(spec.data()));
    for (int k = 0; k < n_bins; ++k) power[size_t(k)] = std::norm(spec[size_t(k)]);
    for (int m = 0; m < cfg.n_filters; ++m) {
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += bank[size_t(m)][size_t(k)] * power[size_t(k)];
      log_energy[size_t(m)] = std::log(std::max(e, kLogFloor));
    }
    for (int c = 0; c < cfg.n_ceps; ++c) {
      double acc = 0.0;
      for (int m = 0; m < cfg.n_filters; ++m) acc += dct[size_t(c)][size_t(m)] * log_energy[size_t(m)];
      ceps.at(t, c) = float(acc);
    }
  }
  if (!cfg.include_deltas) return ceps;

  const FeatureSequence delta = ComputeDeltas(ceps);
  const FeatureSequence delta2 = ComputeDeltas(delta);
  FeatureSequence out(n_frames, 3 * cfg.n_ceps, shift_s);
  for (int t = 0; t < n_frames; ++t) {
    for (int c = 0; c < cfg.n_ceps; ++c) {
      out.at(t, c) = ceps.at(t, c);
      out.at(t, cfg.n_ceps + c) = delta.at(t, c);
      out.at(t, 2 * cfg.n_ceps + c) = delta2.at(t, c);
    }
  }
  return out;
}

}  // namespace cm
