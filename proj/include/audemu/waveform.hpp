// waveform.hpp: sampled acoustic pressure signals.
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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "audemu/common.hpp"
#include "audemu/digest.hpp"
#include "audemu/errors.hpp"

namespace audemu {

// A mono pressure signal in pascal.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;  // Hz

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

inline void validate(const Waveform& w) {
  if (w.sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  if (w.samples.empty()) throw InvalidArgument("waveform must hold at least one sample");
  if (!all_finite(w.samples)) throw InvalidArgument("waveform contains non-finite samples");
}

// Content digest over samples and rate; used for corpus keying and
// train/test disjointness checks.
inline std::uint64_t waveform_digest(const Waveform& w) {
  Digest d;
  d.update(w.sample_rate);
  d.update(std::span<const double>(w.samples));
  return d.value();
}

}  // namespace audemu
