// common.hpp: shared constants and small numeric helpers.
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
#include <cstddef>
#include <span>

namespace audemu {

// Reference sound pressure, 20 micropascal.  Sound pressure levels are
// expressed relative to this value throughout.
inline constexpr double kReferencePressurePa = 20e-6;

inline constexpr double kPi = 3.14159265358979323846;

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double s : v) acc += s * s;
  return std::sqrt(acc);
}

inline double l1_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double s : v) acc += std::abs(s);
  return acc;
}

inline bool all_finite(std::span<const double> v) {
  for (double s : v) {
    if (!std::isfinite(s)) return false;
  }
  return true;
}

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

inline double amplitude_to_db(double amp) { return 20.0 * std::log10(amp); }

}  // namespace audemu
