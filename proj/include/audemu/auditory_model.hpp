// auditory_model.hpp: the ground-truth model interface and energy maps.
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
#include <cstdint>
#include <vector>

#include "audemu/digest.hpp"
#include "audemu/errors.hpp"
#include "audemu/representation.hpp"
#include "audemu/signals.hpp"
#include "audemu/waveform.hpp"

namespace audemu {

// A map from waveforms to inner representations.  Implementations must be
// deterministic and safe to call concurrently (const access only).
class AuditoryModel {
 public:
  virtual ~AuditoryModel() = default;

  virtual InnerRepresentation forward(const Waveform& x) const = 0;
  virtual const std::vector<double>& cfs() const = 0;
  virtual int sample_rate() const = 0;

  // Digest over the model's identity and parameters; pairs targets with
  // the exact model that produced them.
  virtual std::uint64_t digest() const = 0;

  // Overall multiplicative output scale; norm floors are relative to it.
  virtual double output_scale() const { return 1.0; }

  // Digests of waveforms this model was fitted/trained on (empty unless
  // the model is a trained emulator).
  virtual const std::vector<std::uint64_t>& training_corpus_digests() const {
    static const std::vector<std::uint64_t> kEmpty;
    return kEmpty;
  }
};

inline InnerRepresentation model_forward(const AuditoryModel& model,
                                         const Waveform& x) {
  return model.forward(x);
}

// Diagnostic model: every channel reproduces the input verbatim.  Useful
// for validating the weight-estimation pipeline, where the alpha columns
// must follow 10^((l_max - l) / 20) exactly.
class IdentityModel final : public AuditoryModel {
 public:
  IdentityModel(int channels, int sample_rate)
      : sample_rate_(sample_rate) {
    if (channels < 1) throw InvalidArgument("channels must be >= 1");
    cfs_.resize(channels);
    for (int j = 0; j < channels; ++j) cfs_[j] = 100.0 * (j + 1);
  }

  InnerRepresentation forward(const Waveform& x) const override {
    if (x.sample_rate != sample_rate_) {
      throw RateMismatch("waveform rate does not match model rate");
    }
    InnerRepresentation rep = make_representation(
        static_cast<int>(cfs_.size()), static_cast<int>(x.samples.size()), cfs_);
    for (int j = 0; j < rep.channels; ++j) {
      std::copy(x.samples.begin(), x.samples.end(), rep.row(j).begin());
    }
    return rep;
  }

  const std::vector<double>& cfs() const override { return cfs_; }
  int sample_rate() const override { return sample_rate_; }
  std::uint64_t digest() const override {
    Digest d;
    d.update(std::string_view("identity-v1"));
    d.update(static_cast<int>(cfs_.size()));
    d.update(sample_rate_);
    return d.value();
  }

 private:
  std::vector<double> cfs_;
  int sample_rate_ = 0;
};

// Mean channel energy per (channel, level) cell, normalized so the
// smallest cell equals one.
struct EnergyMap {
  std::vector<double> values;  // J x L, row-major
  std::vector<double> cfs;
  std::vector<double> levels;

  double at(int j, int l) const {
    return values[static_cast<std::size_t>(j) * levels.size() + l];
  }
};

inline EnergyMap energy_distribution(const AuditoryModel& model,
                                     const std::vector<Waveform>& corpus,
                                     const LevelGrid& grid) {
  if (corpus.empty()) throw InvalidArgument("corpus is empty");
  validate(grid);
  const int levels = static_cast<int>(grid.levels_db.size());
  const int channels = static_cast<int>(model.cfs().size());
  EnergyMap map;
  map.cfs = model.cfs();
  map.levels = grid.levels_db;
  map.values.assign(static_cast<std::size_t>(channels) * levels, 0.0);
  for (int l = 0; l < levels; ++l) {
    for (const Waveform& x : corpus) {
      const Waveform xl = normalize_to_spl(x, grid.levels_db[l]);
      const InnerRepresentation rep = model.forward(xl);
      for (int j = 0; j < channels; ++j) {
        double energy = 0.0;
        for (double v : rep.row(j)) energy += v * v;
        map.values[static_cast<std::size_t>(j) * levels + l] +=
            energy / static_cast<double>(corpus.size());
      }
    }
  }
  double min_cell = map.values[0];
  for (double v : map.values) min_cell = std::min(min_cell, v);
  if (min_cell <= 0.0) {
    throw SilentInput("energy map has an all-silent cell");
  }
  for (double& v : map.values) v /= min_cell;
  return map;
}

}  // namespace audemu
