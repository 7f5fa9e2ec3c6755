// include/cm/dsp.h

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

#ifndef CM_DSP_H_
#define CM_DSP_H_

#include <complex>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cm {

// Mono PCM audio, samples in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = 16000;

  double duration_s() const {
    return double(samples.size()) / double(sample_rate_hz);
  }
};

// N x D row-major frame matrix.
struct FeatureSequence {
  int num_frames = 0;
  int dim = 0;
  std::vector<float> data;
  double frame_shift_s = 0.0;

  FeatureSequence() = default;
  FeatureSequence(int n, int d, double shift = 0.0)
      : num_frames(n), dim(d), data(size_t(n) * size_t(d), 0.0f),
        frame_shift_s(shift) {}

  float &at(int n, int d) { return data[size_t(n) * dim + d]; }
  float at(int n, int d) const { return data[size_t(n) * dim + d]; }
  std::span<const float> row(int n) const {
    return {data.data() + size_t(n) * dim, size_t(dim)};
  }
};

// ---------------------------------------------------------------------------
// WAV I/O

// Reads RIFF/WAVE mono PCM16 or IEEE float32. PCM16 is scaled by 1/32768.
Waveform ReadWav(const std::filesystem::path &path);
Waveform DecodeWav(std::span<const uint8_t> bytes);

// Writes PCM16 (rounded, clipped to the int16 range).
void WriteWav(const std::filesystem::path &path, const Waveform &wave);
std::vector<uint8_t> EncodeWav(const Waveform &wave);

// ---------------------------------------------------------------------------
// LFCC

struct LfccConfig {
  double frame_len_ms = 20.0;
  double frame_shift_ms = 10.0;
  int fft_size = 512;
  int n_filters = 20;
  int n_ceps = 20;
  bool include_deltas = true;

  int FrameLength(int sample_rate_hz) const;
  int FrameShift(int sample_rate_hz) const;
  int OutputDim() const { return include_deltas ? 3 * n_ceps : n_ceps; }
  // Throws kParameter for inconsistent settings at the given rate.
  void Validate(int sample_rate_hz) const;
};

// Number of complete frames: floor((T - L) / S) + 1, or 0 when T < L.
int NumFrames(size_t num_samples, int frame_len, int frame_shift);

// Triangular filters spaced linearly from 0 Hz to Nyquist, one row per filter,
// fft_size/2 + 1 columns.
std::vector<std::vector<double>> LinearFilterbank(int n_filters, int fft_size,
                                                  int sample_rate_hz);

// Orthonormal DCT-II matrix, rows = output coefficients.
std::vector<std::vector<double>> DctMatrix(int n_out, int n_in);

std::vector<double> HannWindow(int length);

FeatureSequence ExtractLfcc(const Waveform &wave, const LfccConfig &cfg);

// Regression deltas with half-window 2 and edge replication.
FeatureSequence ComputeDeltas(const FeatureSequence &features);


// ---------------------------------------------------------------------------
// IIR filters

enum class FilterKind { kBandStop, kHighPass, kLowPass, kCustom };

const char *FilterKindName(FilterKind kind);

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

struct IirFilter {
  std::vector<Biquad> sections;
  FilterKind kind = FilterKind::kCustom;
  double low_hz = 0, high_hz = 0;
  int order = 0;
  int sample_rate_hz = 16000;

  static IirFilter Identity(int sample_rate_hz);
  // Largest pole magnitude over all sections.
  double MaxPoleRadius() const;
};

// Butterworth stop-band design. low_hz == 0 yields a high-pass at high_hz,
// high_hz == fs/2 a low-pass at low_hz; order is the analog prototype order.
IirFilter DesignBandstop(double low_hz, double high_hz, int order,
                         int sample_rate_hz);

// Causal cascade, zero initial state. Rates must match.
Waveform ApplyFilter(const IirFilter &filter, const Waveform &wave);

// Magnitude response in dB; zeros of the response map to kMinusInfDb.
inline constexpr double kMinusInfDb = -400.0;
double FreqResponseDb(const IirFilter &filter, double f_hz);

}  // namespace cm

#endif  // CM_DSP_H_
