// signals.hpp: level normalization, noise synthesis, level-grid datasets
// and context windowing.
//
// Sound pressure level here is defined through the plain L2 norm of the
// whole signal:  ||x||_2 = p0 * 10^(l/20)  with p0 = 20 uPa.  Note that
// this is a property of the entire vector, not a per-sample RMS, so the
// same physical waveform carries a different level when truncated; the
// per-segment level l* used during training is measured on the core
// window alone.
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
#include <complex>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "audemu/common.hpp"
#include "audemu/errors.hpp"
#include "audemu/fft.hpp"
#include "audemu/rng.hpp"
#include "audemu/waveform.hpp"

namespace audemu {

// A strictly increasing, uniformly spaced list of SPLs in dB.
struct LevelGrid {
  std::vector<double> levels_db;
  double step_db = 0.0;

  static LevelGrid uniform(double lo, double hi, double step) {
    if (step <= 0.0 || hi <= lo) throw InvalidArgument("bad level grid bounds");
    LevelGrid g;
    g.step_db = step;
    for (double l = lo; l <= hi + 1e-9; l += step) g.levels_db.push_back(l);
    if (g.levels_db.size() < 2) throw InvalidArgument("level grid needs at least 2 levels");
    return g;
  }

  static LevelGrid single(double level) {
    LevelGrid g;
    g.step_db = 0.0;
    g.levels_db = {level};
    return g;
  }

  double min() const { return levels_db.front(); }
  double max() const { return levels_db.back(); }
  std::size_t size() const { return levels_db.size(); }
};

inline void validate(const LevelGrid& g) {
  if (g.levels_db.empty()) throw InvalidArgument("level grid is empty");
  for (std::size_t i = 1; i < g.levels_db.size(); ++i) {
    if (g.levels_db[i] <= g.levels_db[i - 1]) {
      throw InvalidArgument("level grid must be strictly increasing");
    }
    if (g.levels_db.size() > 1 &&
        std::abs((g.levels_db[i] - g.levels_db[i - 1]) - g.step_db) > 1e-9) {
      throw InvalidArgument("level grid step is not uniform");
    }
  }
}

struct WindowSpec {
  int window_len = 2048;
  int left_context = 256;
  int right_context = 256;
};

inline void validate(const WindowSpec& w) {
  if (w.window_len < 1) throw InvalidArgument("window_len must be >= 1");
  if (w.left_context < 0 || w.right_context < 0) {
    throw InvalidArgument("contexts must be >= 0");
  }
}

inline double measure_spl(const Waveform& x) {
  const double norm = l2_norm(x.samples);
  if (norm <= 0.0) throw SilentInput("cannot measure the level of a silent signal");
  return amplitude_to_db(norm / kReferencePressurePa);
}

// Scales x so that ||y||_2 = p0 * 10^(level/20).
inline Waveform normalize_to_spl(const Waveform& x, double level_db) {
  if (!std::isfinite(level_db)) {
    throw InvalidArgument("target level must be finite");
  }
  const double norm = l2_norm(x.samples);
  if (norm <= 0.0) throw SilentInput("cannot normalize a silent signal");
  const double target = kReferencePressurePa * db_to_amplitude(level_db);
  const double scale = target / norm;
  Waveform y;
  y.sample_rate = x.sample_rate;
  y.samples.resize(x.samples.size());
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    y.samples[i] = x.samples[i] * scale;
  }
  return y;
}

// Pseudorandom noise with a speech-like long-term spectrum: flat below
// 500 Hz, -6 dB per octave above.  The tilt is imposed exactly in the
// frequency domain on seeded white Gaussian noise.
inline Waveform synth_speech_shaped_noise(double duration_s, std::uint64_t seed,
                                          int sample_rate) {
  if (duration_s <= 0.0) throw InvalidArgument("duration must be positive");
  if (sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (n == 0) throw InvalidArgument("duration shorter than one sample");
  const std::size_t nfft = next_pow2(n);
  Rng rng(seed);
  std::vector<std::complex<double>> spec(nfft);
  for (auto& s : spec) s = std::complex<double>(rng.gaussian(), 0.0);
  fft_inplace(spec, false);
  const double corner_hz = 500.0;
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
    const double gain = (f <= corner_hz || k == 0) ? 1.0 : corner_hz / f;
    spec[k] *= gain;
    if (k != 0 && k != nfft / 2) spec[nfft - k] *= gain;
  }
  fft_inplace(spec, true);
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = spec[i].real();
  return out;
}

inline Waveform synth_tone(double freq_hz, double duration_s, int sample_rate) {
  if (sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  if (freq_hz >= sample_rate / 2.0) {
    throw NyquistViolation("tone frequency at or above Nyquist");
  }
  if (duration_s <= 0.0) throw InvalidArgument("duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) / sample_rate);
  }
  return out;
}

// Assigns each corpus signal a level drawn uniformly (seeded) from the grid
// and normalizes it there.
inline std::vector<std::pair<Waveform, double>> build_level_dataset(
    const std::vector<Waveform>& corpus, const LevelGrid& grid,
    std::uint64_t seed) {
  if (corpus.empty()) throw InvalidArgument("corpus is empty");
  validate(grid);
  Rng rng(seed);
  std::vector<std::pair<Waveform, double>> out;
  out.reserve(corpus.size());
  for (const Waveform& x : corpus) {
    const double level =
        grid.levels_db[rng.uniform_int(grid.levels_db.size())];
    out.emplace_back(normalize_to_spl(x, level), level);
  }
  return out;
}

// One emitted training segment: contexts + core, with the core location.
struct ContextWindow {
  Waveform segment;
  int core_begin = 0;  // index into segment
  int core_end = 0;
  int source_offset = 0;  // index of the core start in the source signal
};

// Cuts non-overlapping core windows of window_len samples and pads each
// with left/right context taken from the source signal where available,
// zeros elsewhere.  A trailing remainder shorter than one window is
// dropped.
inline std::vector<ContextWindow> window_with_context(const Waveform& x,
                                                      const WindowSpec& spec) {
  validate(spec);
  const int n = static_cast<int>(x.samples.size());
  if (n < spec.window_len) {
    throw InputTooShort("signal shorter than one window");
  }
  const int num_windows = n / spec.window_len;
  std::vector<ContextWindow> out;
  out.reserve(num_windows);
  const int seg_len = spec.left_context + spec.window_len + spec.right_context;
  for (int w = 0; w < num_windows; ++w) {
    ContextWindow cw;
    cw.segment.sample_rate = x.sample_rate;
    cw.segment.samples.assign(seg_len, 0.0);
    cw.core_begin = spec.left_context;
    cw.core_end = spec.left_context + spec.window_len;
    cw.source_offset = w * spec.window_len;
    for (int i = 0; i < seg_len; ++i) {
      const int src = cw.source_offset - spec.left_context + i;
      if (src >= 0 && src < n) cw.segment.samples[i] = x.samples[src];
    }
    out.push_back(std::move(cw));
  }
  return out;
}

// Level of the loss-bearing core region; -inf when the core is silent so
// that downstream interpolation clamps to the lowest grid level.
inline double core_level_or_neg_inf(const ContextWindow& cw) {
  double acc = 0.0;
  for (int i = cw.core_begin; i < cw.core_end; ++i) {
    acc += cw.segment.samples[i] * cw.segment.samples[i];
  }
  if (acc <= 0.0) return -std::numeric_limits<double>::infinity();
  return amplitude_to_db(std::sqrt(acc) / kReferencePressurePa);
}

}  // namespace audemu
