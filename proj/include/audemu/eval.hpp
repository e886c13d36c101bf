// eval.hpp: the evaluation battery — per-channel signal-to-error ratios
// across levels, log(MAE) curves with the global MAE, and excitation
// patterns from pure tones.
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
#include <cstdint>
#include <set>
#include <vector>

#include "audemu/auditory_model.hpp"
#include "audemu/emulator.hpp"
#include "audemu/errors.hpp"
#include "audemu/representation.hpp"
#include "audemu/signals.hpp"

namespace audemu {

// +/- cap replacing infinite ratios in serialized output.
inline constexpr double kSerCapDb = 300.0;

struct SerResult {
  std::vector<double> values_db;      // per channel
  std::vector<std::uint8_t> silent;   // 1 where the target channel is silent
};

// SER(j) = 20 log10(||f_j|| / ||f_j - f_hat_j||), capped at +300 dB for
// exact matches.  Channels with silent targets are flagged, not scored.
inline SerResult ser(const InnerRepresentation& target,
                     const InnerRepresentation& estimate) {
  require_same_shape(target, estimate);
  SerResult out;
  out.values_db.resize(target.channels);
  out.silent.assign(target.channels, 0);
  for (int j = 0; j < target.channels; ++j) {
    double sig = 0.0, err = 0.0;
    const auto t_row = target.row(j);
    const auto e_row = estimate.row(j);
    for (int t = 0; t < target.frames; ++t) {
      sig += t_row[t] * t_row[t];
      const double d = t_row[t] - e_row[t];
      err += d * d;
    }
    if (sig <= 0.0) {
      out.silent[j] = 1;
      out.values_db[j] = 0.0;
      continue;
    }
    if (err <= 0.0) {
      out.values_db[j] = kSerCapDb;
    } else {
      out.values_db[j] =
          std::min(kSerCapDb, 10.0 * std::log10(sig / err));
    }
  }
  return out;
}

struct SerMatrix {
  std::vector<double> values_db;  // J x |L|, row-major
  std::vector<double> cfs;
  std::vector<double> levels;

  double at(int j, int l) const {
    return values_db[static_cast<std::size_t>(j) * levels.size() + l];
  }
  double mean_at_level(int l) const {
    double acc = 0.0;
    const int channels = static_cast<int>(cfs.size());
    for (int j = 0; j < channels; ++j) acc += at(j, l);
    return acc / channels;
  }
  double min_cell() const {
    double m = values_db.front();
    for (double v : values_db) m = std::min(m, v);
    return m;
  }
};

// Per-level, per-channel SER over a test corpus.  pool_energy sums signal
// and error energies across signals before the ratio (default); otherwise
// per-signal dB values are averaged.
inline SerMatrix ser_matrix(const AuditoryModel& model,
                            const AuditoryModel& emulator,
                            const std::vector<Waveform>& test_corpus,
                            const LevelGrid& grid, bool pool_energy = true) {
  if (test_corpus.empty()) throw InvalidArgument("test corpus is empty");
  validate(grid);
  const auto& train_digests = emulator.training_corpus_digests();
  if (!train_digests.empty()) {
    const std::set<std::uint64_t> train_set(train_digests.begin(),
                                            train_digests.end());
    for (const auto& w : test_corpus) {
      if (train_set.count(waveform_digest(w)) > 0) {
        throw CorpusOverlap("test corpus shares a signal with the training corpus");
      }
    }
  }
  const int channels = static_cast<int>(model.cfs().size());
  const int levels = static_cast<int>(grid.levels_db.size());
  SerMatrix out;
  out.cfs = model.cfs();
  out.levels = grid.levels_db;
  out.values_db.assign(static_cast<std::size_t>(channels) * levels, 0.0);
  for (int l = 0; l < levels; ++l) {
    std::vector<double> sig_energy(channels, 0.0), err_energy(channels, 0.0);
    std::vector<double> db_sum(channels, 0.0);
    for (const Waveform& x : test_corpus) {
      const Waveform xl = normalize_to_spl(x, grid.levels_db[l]);
      InnerRepresentation est = emulator.forward(xl);
      InnerRepresentation ref = model.forward(xl);
      // Emulators may truncate to whole windows; compare common frames.
      const int frames = std::min(est.frames, ref.frames);
      if (est.frames != frames) est = slice_frames(est, 0, frames);
      if (ref.frames != frames) ref = slice_frames(ref, 0, frames);
      if (pool_energy) {
        for (int j = 0; j < channels; ++j) {
          const auto t_row = ref.row(j);
          const auto e_row = est.row(j);
          for (int t = 0; t < frames; ++t) {
            sig_energy[j] += t_row[t] * t_row[t];
            const double d = t_row[t] - e_row[t];
            err_energy[j] += d * d;
          }
        }
      } else {
        const SerResult r = ser(ref, est);
        for (int j = 0; j < channels; ++j) {
          if (r.silent[j]) throw SilentTargetChannel("silent channel in test signal");
          db_sum[j] += r.values_db[j];
        }
      }
    }
    for (int j = 0; j < channels; ++j) {
      double cell;
      if (pool_energy) {
        if (sig_energy[j] <= 0.0) {
          throw SilentTargetChannel("channel " + std::to_string(j) +
                                    " is silent across the test corpus");
        }
        cell = err_energy[j] <= 0.0
                   ? kSerCapDb
                   : std::min(kSerCapDb,
                              10.0 * std::log10(sig_energy[j] / err_energy[j]));
      } else {
        cell = db_sum[j] / static_cast<double>(test_corpus.size());
      }
      out.values_db[static_cast<std::size_t>(j) * levels + l] = cell;
    }
  }
  return out;
}

struct DeltaSer {
  std::vector<double> values_db;  // cellwise a - b
  std::vector<double> cfs;
  std::vector<double> levels;
  double mean_db = 0.0;

  double at(int j, int l) const {
    return values_db[static_cast<std::size_t>(j) * levels.size() + l];
  }
  double mean_at_level(int l) const {
    double acc = 0.0;
    const int channels = static_cast<int>(cfs.size());
    for (int j = 0; j < channels; ++j) acc += at(j, l);
    return acc / channels;
  }
};

inline DeltaSer delta_ser(const SerMatrix& a, const SerMatrix& b) {
  if (a.cfs != b.cfs || a.levels != b.levels) {
    throw AxisMismatch("SER matrices have different axes");
  }
  DeltaSer out;
  out.cfs = a.cfs;
  out.levels = a.levels;
  out.values_db.resize(a.values_db.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values_db.size(); ++i) {
    out.values_db[i] = a.values_db[i] - b.values_db[i];
    acc += out.values_db[i];
  }
  out.mean_db = acc / static_cast<double>(out.values_db.size());
  return out;
}

struct LogMaeCurve {
  std::vector<double> levels;
  std::vector<double> log10_mae;
  double ge = 0.0;  // arithmetic mean of per-level MAE (not of the logs)
};

inline LogMaeCurve log_mae_curve(const AuditoryModel& model,
                                 const AuditoryModel& emulator,
                                 const std::vector<Waveform>& test_corpus,
                                 const LevelGrid& grid) {
  if (test_corpus.empty()) throw InvalidArgument("test corpus is empty");
  validate(grid);
  LogMaeCurve out;
  out.levels = grid.levels_db;
  double ge_acc = 0.0;
  for (double level : grid.levels_db) {
    double abs_sum = 0.0;
    std::uint64_t count = 0;
    for (const Waveform& x : test_corpus) {
      const Waveform xl = normalize_to_spl(x, level);
      InnerRepresentation est = emulator.forward(xl);
      InnerRepresentation ref = model.forward(xl);
      const int frames = std::min(est.frames, ref.frames);
      if (est.frames != frames) est = slice_frames(est, 0, frames);
      if (ref.frames != frames) ref = slice_frames(ref, 0, frames);
      for (std::size_t i = 0; i < ref.values.size(); ++i) {
        abs_sum += std::abs(ref.values[i] - est.values[i]);
      }
      count += ref.values.size();
    }
    const double mae_level = abs_sum / static_cast<double>(count);
    out.log10_mae.push_back(mae_level > 0.0 ? std::log10(mae_level) : -kSerCapDb);
    ge_acc += mae_level;
  }
  out.ge = ge_acc / static_cast<double>(grid.levels_db.size());
  return out;
}

struct ExcitationPattern {
  double tone_freq_hz = 0.0;
  double tone_level_db = 0.0;
  std::vector<double> rms_per_cf;
};

// Per-CF RMS response to a pure tone, over the steady-state region (the
// first 50 ms are discarded).
inline ExcitationPattern excitation_pattern(const AuditoryModel& model,
                                            double tone_freq_hz,
                                            double tone_level_db,
                                            double duration_s = 0.2048) {
  if (!std::isfinite(tone_level_db)) {
    throw InvalidArgument("tone level must be finite");
  }
  const int rate = model.sample_rate();
  if (tone_freq_hz >= rate / 2.0) {
    throw NyquistViolation("tone frequency at or above Nyquist");
  }
  const Waveform tone = normalize_to_spl(
      synth_tone(tone_freq_hz, duration_s, rate), tone_level_db);
  const InnerRepresentation rep = model.forward(tone);
  const int skip = std::min(rep.frames, rate / 20);  // 50 ms
  ExcitationPattern out;
  out.tone_freq_hz = tone_freq_hz;
  out.tone_level_db = tone_level_db;
  out.rms_per_cf.resize(rep.channels);
  const int frames = rep.frames - skip;
  if (frames <= 0) throw InputTooShort("tone shorter than the settle window");
  for (int j = 0; j < rep.channels; ++j) {
    double acc = 0.0;
    const auto row = rep.row(j);
    for (int t = skip; t < rep.frames; ++t) acc += row[t] * row[t];
    out.rms_per_cf[j] = std::sqrt(acc / frames);
  }
  return out;
}

inline int argmax_channel(const ExcitationPattern& p) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(p.rms_per_cf.size()); ++j) {
    if (p.rms_per_cf[j] > p.rms_per_cf[best]) best = j;
  }
  return best;
}

// Index of the channel whose CF is nearest the frequency on a log axis.
inline int nearest_cf_channel(const std::vector<double>& cfs, double freq_hz) {
  int best = 0;
  double best_dist = std::abs(std::log(cfs[0]) - std::log(freq_hz));
  for (int j = 1; j < static_cast<int>(cfs.size()); ++j) {
    const double d = std::abs(std::log(cfs[j]) - std::log(freq_hz));
    if (d < best_dist) {
      best_dist = d;
      best = j;
    }
  }
  return best;
}

}  // namespace audemu
