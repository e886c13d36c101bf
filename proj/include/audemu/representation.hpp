// representation.hpp: multi-channel inner representations (J x T matrices).
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

#include <span>
#include <vector>

#include "audemu/common.hpp"
#include "audemu/errors.hpp"

namespace audemu {

// J channels by T frames, row-major.  cfs holds the characteristic
// frequency of each channel in Hz, strictly increasing.
struct InnerRepresentation {
  std::vector<double> values;
  int channels = 0;
  int frames = 0;
  std::vector<double> cfs;

  double at(int j, int t) const {
    return values[static_cast<std::size_t>(j) * frames + t];
  }
  double& at(int j, int t) {
    return values[static_cast<std::size_t>(j) * frames + t];
  }
  std::span<const double> row(int j) const {
    return {values.data() + static_cast<std::size_t>(j) * frames,
            static_cast<std::size_t>(frames)};
  }
  std::span<double> row(int j) {
    return {values.data() + static_cast<std::size_t>(j) * frames,
            static_cast<std::size_t>(frames)};
  }
};

inline InnerRepresentation make_representation(int channels, int frames,
                                               std::vector<double> cfs) {
  if (channels < 1 || frames < 0) {
    throw InvalidArgument("representation needs at least one channel");
  }
  if (static_cast<int>(cfs.size()) != channels) {
    throw ChannelMismatch("cfs length does not match channel count");
  }
  InnerRepresentation r;
  r.channels = channels;
  r.frames = frames;
  r.cfs = std::move(cfs);
  r.values.assign(static_cast<std::size_t>(channels) * frames, 0.0);
  return r;
}

inline void require_same_shape(const InnerRepresentation& a,
                               const InnerRepresentation& b) {
  if (a.channels != b.channels || a.frames != b.frames) {
    throw ShapeMismatch("representation shapes differ");
  }
}

// Columns [begin, end) of a representation.
inline InnerRepresentation slice_frames(const InnerRepresentation& r, int begin,
                                        int end) {
  if (begin < 0 || end < begin || end > r.frames) {
    throw InvalidArgument("bad frame slice");
  }
  InnerRepresentation out = make_representation(r.channels, end - begin, r.cfs);
  for (int j = 0; j < r.channels; ++j) {
    const double* src = r.values.data() + static_cast<std::size_t>(j) * r.frames;
    double* dst = out.values.data() + static_cast<std::size_t>(j) * out.frames;
    for (int t = begin; t < end; ++t) *dst++ = src[t];
  }
  return out;
}

}  // namespace audemu
