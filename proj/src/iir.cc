// src/iir.cc

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

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "cm/dsp.h"
#include "cm/error.h"

namespace cm {

namespace {

using cplx = std::complex<double>;

// Left-half-plane poles of the normalized analog Butterworth prototype.
std::vector<cplx> ButterworthPrototype(int order) {
  std::vector<cplx> poles;
  for (int k = 1; k <= order; ++k)
    poles.push_back(std::polar(1.0, std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order)));
  return poles;
}

double Prewarp(double f_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs);
}

cplx Bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

cplx SectionResponse(const Biquad &q, cplx z) {
  const cplx zi = 1.0 / z;
  return (q.b0 + q.b1 * zi + q.b2 * zi * zi) / (1.0 + q.a1 * zi + q.a2 * zi * zi);
}

// One section per upper-half-plane pole, ascending pole radius, every
// section normalized to unit gain at ref_z.
std::vector<Biquad> PairSections(std::vector<cplx> poles, const Biquad &zeros,
                                 cplx ref_z) {
  std::vector<cplx> upper;
  for (const cplx &p : poles)
    if (p.imag() > 0.0) upper.push_back(p);
  std::sort(upper.begin(), upper.end(),
            [](const cplx &a, const cplx &b) { return std::abs(a) < std::abs(b); });
  std::vector<Biquad> sections;
  for (const cplx &p : upper) {
    Biquad q = zeros;
    q.a1 = -2.0 * p.real();
    q.a2 = std::norm(p);
    const double gain = std::abs(SectionResponse(q, ref_z));
    q.b0 /= gain;
    q.b1 /= gain;
    q.b2 /= gain;
    sections.push_back(q);
  }
  return sections;
}

}  // namespace

const char *FilterKindName(FilterKind kind) {
  switch (kind) {
    case FilterKind::kBandStop: return "bandstop";
    case FilterKind::kHighPass: return "highpass";
    case FilterKind::kLowPass: return "lowpass";
    case FilterKind::kCustom: return "custom";
  }
  return "custom";
}

IirFilter IirFilter::Identity(int sample_rate_hz) {
  IirFilter f;
  f.sections.push_back(Biquad{});
  f.sample_rate_hz = sample_rate_hz;
  return f;
}

double IirFilter::MaxPoleRadius() const {
  double r = 0.0;
  for (const Biquad &q : sections) {
    // Roots of z^2 + a1 z + a2.
    const cplx disc = std::sqrt(cplx(q.a1 * q.a1 - 4.0 * q.a2, 0.0));
    r = std::max({r, std::abs((-q.a1 + disc) / 2.0), std::abs((-q.a1 - disc) / 2.0)});
  }
  return r;
}

IirFilter DesignBandstop(double low_hz, double high_hz, int order, int sample_rate_hz) {
  const double fs = sample_rate_hz;
  const double nyquist = fs / 2.0;
  if (sample_rate_hz <= 0) Fail(ErrorKind::kParameter, "sample rate must be positive");
  if (order < 2 || order % 2 != 0)
    Fail(ErrorKind::kParameter, "filter order must be even and >= 2, got " + std::to_string(order));
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist))
    Fail(ErrorKind::kParameter, "invalid stop band [" + std::to_string(low_hz) + ", " +
                                    std::to_string(high_hz) + "] Hz at fs " +
                                    std::to_string(sample_rate_hz));
  if (low_hz == 0.0 && high_hz == nyquist)
    Fail(ErrorKind::kParameter, "stop band covers the whole spectrum");

  IirFilter filter;
  filter.low_hz = low_hz;
  filter.high_hz = high_hz;
  filter.order = order;
  filter.sample_rate_hz = sample_rate_hz;
  const auto proto = ButterworthPrototype(order);
  std::vector<cplx> poles;

  if (low_hz == 0.0) {
    filter.kind = FilterKind::kHighPass;
    const double wc = Prewarp(high_hz, fs);
    for (const cplx &p : proto) poles.push_back(Bilinear(wc / p, fs));
    filter.sections = PairSections(poles, Biquad{1.0, -2.0, 1.0, 0, 0}, cplx(-1.0, 0.0));
  } else if (high_hz == nyquist) {
    filter.kind = FilterKind::kLowPass;
    const double wc = Prewarp(low_hz, fs);
    for (const cplx &p : proto) poles.push_back(Bilinear(wc * p, fs));
    filter.sections = PairSections(poles, Biquad{1.0, 2.0, 1.0, 0, 0}, cplx(1.0, 0.0));
  } else {
    filter.kind = FilterKind::kBandStop;
    const double w1 = Prewarp(low_hz, fs);
    const double w2 = Prewarp(high_hz, fs);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;
    // s_proto = bw s / (s^2 + w0^2): each prototype pole yields two poles.
    for (const cplx &p : proto) {
      const cplx disc = std::sqrt(bw * bw - 4.0 * p * p * w0 * w0);
      poles.push_back(Bilinear((bw + disc) / (2.0 * p), fs));
      poles.push_back(Bilinear((bw - disc) / (2.0 * p), fs));
    }
    const double notch = 2.0 * std::atan(w0 / (2.0 * fs));
    filter.sections =
        PairSections(poles, Biquad{1.0, -2.0 * std::cos(notch), 1.0, 0, 0}, cplx(1.0, 0.0));
  }
  return filter;
}

Waveform ApplyFilter(const IirFilter &filter, const Waveform &wave) {
  if (filter.sample_rate_hz != wave.sample_rate_hz)
    Fail(ErrorKind::kParameter, "filter designed for " + std::to_string(filter.sample_rate_hz) +
                                    " Hz applied to " + std::to_string(wave.sample_rate_hz) +
                                    " Hz audio");
  std::vector<double> x(wave.samples.begin(), wave.samples.end());
  for (const Biquad &q : filter.sections) {
    // Transposed direct form II.
    double s1 = 0.0, s2 = 0.0;
    for (double &v : x) {
      const double in = v;
      const double out = q.b0 * in + s1;
      s1 = q.b1 * in - q.a1 * out + s2;
      s2 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
  Waveform out;
  out.sample_rate_hz = wave.sample_rate_hz;
  out.samples.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) out.samples[i] = float(x[i]);
  return out;
}

double FreqResponseDb(const IirFilter &filter, double f_hz) {
  const double omega = 2.0 * std::numbers::pi * f_hz / filter.sample_rate_hz;
  const cplx z = std::polar(1.0, omega);
  cplx h(1.0, 0.0);
  for (const Biquad &q : filter.sections) h *= SectionResponse(q, z);
  const double mag = std::abs(h);
  if (mag == 0.0) return kMinusInfDb;
  return std::max(20.0 * std::log10(mag), kMinusInfDb);
}

}  // namespace cm
