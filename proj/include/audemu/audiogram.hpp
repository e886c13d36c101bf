// audiogram.hpp: audiogram templates and hearing-profile derivation.
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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "audemu/errors.hpp"

namespace audemu {

// Per-frequency hearing loss in dB HL.
struct Audiogram {
  std::vector<double> freqs_hz;
  std::vector<double> losses_db;
};

inline void validate(const Audiogram& a) {
  if (a.freqs_hz.size() != a.losses_db.size()) {
    throw MismatchedLengths("audiogram freqs and losses differ in length");
  }
  if (a.freqs_hz.empty()) throw InvalidArgument("audiogram is empty");
  for (std::size_t i = 0; i < a.freqs_hz.size(); ++i) {
    if (i > 0 && a.freqs_hz[i] <= a.freqs_hz[i - 1]) {
      throw InvalidArgument("audiogram frequencies must be strictly increasing");
    }
    if (a.losses_db[i] < 0.0 || a.losses_db[i] > 120.0) {
      throw InvalidArgument("audiogram losses must lie in [0, 120] dB");
    }
  }
}

// Template audiograms over the standard audiometric bands
// 250..6000 Hz: N0 (normal), N3 (moderate), N5 (severe), S1 (steep slope).
// Flat20 and Slope20_5 are mild-loss presets expressed on the same grid,
// with Slope20_5 running 5 dB up to 1 kHz and rising on a log-frequency
// ramp to 20 dB at 8 kHz.
inline Audiogram standard_audiogram(const std::string& name) {
  const std::vector<double> freqs = {250,  375,  500,  750,  1000,
                                     1500, 2000, 3000, 4000, 6000};
  Audiogram a;
  a.freqs_hz = freqs;
  if (name == "N0") {
    a.losses_db.assign(freqs.size(), 0.0);
  } else if (name == "N3") {
    a.losses_db = {35, 35, 35, 35, 40, 45, 50, 55, 60, 65};
  } else if (name == "N5") {
    a.losses_db = {65, 67.5, 70, 72.5, 75, 80, 80, 80, 80, 80};
  } else if (name == "S1") {
    a.losses_db = {10, 10, 10, 10, 10, 10, 15, 30, 55, 70};
  } else if (name == "Flat20") {
    a.losses_db.assign(freqs.size(), 20.0);
  } else if (name == "Slope20_5") {
    a.freqs_hz.push_back(8000);
    for (double f : a.freqs_hz) {
      const double loss =
          f <= 1000.0 ? 5.0 : 5.0 + 15.0 * std::log2(f / 1000.0) / 3.0;
      a.losses_db.push_back(loss);
    }
  } else {
    throw UnknownTemplate("unknown audiogram template: " + name);
  }
  return a;
}

// Loss at an arbitrary frequency: linear interpolation on a log-frequency
// vs dB scale, clamped to the end values outside the audiogram range.
inline double interpolate_loss(const Audiogram& a, double freq_hz) {
  validate(a);
  if (freq_hz <= a.freqs_hz.front()) return a.losses_db.front();
  if (freq_hz >= a.freqs_hz.back()) return a.losses_db.back();
  const double lf = std::log(freq_hz);
  for (std::size_t i = 1; i < a.freqs_hz.size(); ++i) {
    if (freq_hz <= a.freqs_hz[i]) {
      const double lo = std::log(a.freqs_hz[i - 1]);
      const double hi = std::log(a.freqs_hz[i]);
      const double m = (lf - lo) / (hi - lo);
      return a.losses_db[i - 1] + m * (a.losses_db[i] - a.losses_db[i - 1]);
    }
  }
  return a.losses_db.back();
}

// Per-channel impairment parameters in [0, 1]; 1 = normal hearing,
// 0 = complete dysfunction.
struct HearingProfile {
  std::vector<double> c_ohc;
  std::vector<double> c_ihc;
  std::vector<double> cfs;
};

// dB-to-[0,1] mapping convention: c = 10^(-loss_component / L_max) with
// L_max = 60 dB for the OHC share and 40 dB for the IHC share, clamped.
struct ProfileMappingConfig {
  double l_max_ohc_db = 60.0;
  double l_max_ihc_db = 40.0;
};

inline HearingProfile audiogram_to_profile(const Audiogram& a,
                                           const std::vector<double>& cfs,
                                           double ohc_fraction = 2.0 / 3.0,
                                           ProfileMappingConfig map = {}) {
  validate(a);
  if (ohc_fraction < 0.0 || ohc_fraction > 1.0) {
    throw InvalidArgument("ohc_fraction must lie in [0, 1]");
  }
  HearingProfile p;
  p.cfs = cfs;
  p.c_ohc.reserve(cfs.size());
  p.c_ihc.reserve(cfs.size());
  for (double cf : cfs) {
    const double loss = interpolate_loss(a, cf);
    const double loss_ohc = ohc_fraction * loss;
    const double loss_ihc = (1.0 - ohc_fraction) * loss;
    p.c_ohc.push_back(std::clamp(std::pow(10.0, -loss_ohc / map.l_max_ohc_db), 0.0, 1.0));
    p.c_ihc.push_back(std::clamp(std::pow(10.0, -loss_ihc / map.l_max_ihc_db), 0.0, 1.0));
  }
  return p;
}

}  // namespace audemu
