// resample.hpp: sample-rate conversion by windowed-sinc interpolation.
//
// Kernel: sinc low-pass at 0.45 of the narrower Nyquist, shaped by a Hann
// window of 32 zero crossings per side.  Output sample m interpolates the
// input at position m * fs_in / fs_out.
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

#include <cmath>
#include <vector>

#include "audemu/common.hpp"
#include "audemu/errors.hpp"
#include "audemu/waveform.hpp"

namespace audemu {

inline Waveform resample(const Waveform& x, int target_rate) {
  validate(x);
  if (target_rate <= 0) throw InvalidArgument("target rate must be positive");
  if (target_rate == x.sample_rate) return x;

  const double ratio = static_cast<double>(x.sample_rate) / target_rate;
  // Cutoff relative to the input rate; 0.45 leaves transition headroom.
  const double cutoff = 0.45 * std::min(1.0, 1.0 / ratio);
  const int half_width = static_cast<int>(std::ceil(32.0 * std::max(1.0, ratio)));
  const int n_in = static_cast<int>(x.samples.size());
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_in) * target_rate / x.sample_rate));
  if (n_out == 0) throw InputTooShort("signal too short to resample");

  Waveform y;
  y.sample_rate = target_rate;
  y.samples.resize(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double center = static_cast<double>(m) * ratio;
    const int lo = static_cast<int>(std::floor(center)) - half_width + 1;
    const int hi = static_cast<int>(std::floor(center)) + half_width;
    double acc = 0.0;
    for (int n = lo; n <= hi; ++n) {
      if (n < 0 || n >= n_in) continue;
      const double t = static_cast<double>(n) - center;
      double h;
      if (t == 0.0) {
        h = 2.0 * cutoff;
      } else {
        h = std::sin(2.0 * kPi * cutoff * t) / (kPi * t);
      }
      const double win = 0.5 + 0.5 * std::cos(kPi * t / (half_width + 1));
      acc += x.samples[static_cast<std::size_t>(n)] * h * win;
    }
    y.samples[m] = acc;
  }
  return y;
}

}  // namespace audemu
