// surrogate.hpp: a deterministic surrogate cochlear model.
//
// Stage chain per channel: 4th-order gammatone bandpass at the channel CF
// (ERB bandwidth), instantaneous broken-stick compression whose exponent
// and below-knee gain depend on the OHC parameter, half-wave rectification
// scaled by the IHC parameter, a first-order low-pass, and an overall
// output scale.  It is not a biophysical model; it exists to provide a
// cheap, deterministic ground truth whose energy distribution is strongly
// skewed across frequency and level.
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
#include <vector>

#include "audemu/audiogram.hpp"
#include "audemu/auditory_model.hpp"
#include "audemu/common.hpp"
#include "audemu/digest.hpp"
#include "audemu/errors.hpp"

namespace audemu {

struct SurrogateModelConfig {
  int channels = 32;
  double cf_min_hz = 125.0;
  double cf_max_hz = 8000.0;
  double compression_exponent_normal = 0.25;
  double knee_level_db = 30.0;   // SPL of the compression knee amplitude
  double ihc_cutoff_hz = 3000.0;
  double output_scale = 500.0;
  int sample_rate = 20000;
};

inline void validate(const SurrogateModelConfig& c) {
  if (c.channels < 2) throw InvalidArgument("surrogate needs at least 2 channels");
  if (c.cf_min_hz >= c.cf_max_hz) throw InvalidArgument("cf_min must be below cf_max");
  if (c.compression_exponent_normal <= 0.0 || c.compression_exponent_normal > 1.0) {
    throw InvalidArgument("compression exponent must lie in (0, 1]");
  }
  if (c.sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  if (c.cf_max_hz >= c.sample_rate / 2.0) {
    throw InvalidArgument("cf_max must be below Nyquist");
  }
}

inline std::vector<double> log_spaced_cfs(int channels, double cf_min_hz,
                                          double cf_max_hz) {
  std::vector<double> cfs(channels);
  for (int j = 0; j < channels; ++j) {
    const double m = channels == 1 ? 0.0
                                   : static_cast<double>(j) / (channels - 1);
    cfs[j] = cf_min_hz * std::pow(cf_max_hz / cf_min_hz, m);
  }
  return cfs;
}

// Glasberg & Moore equivalent rectangular bandwidth.
inline double erb_hz(double f_hz) { return 24.7 * (0.00437 * f_hz + 1.0); }

class SurrogateModel final : public AuditoryModel {
 public:
  SurrogateModel(const SurrogateModelConfig& cfg, HearingProfile profile)
      : cfg_(cfg), profile_(std::move(profile)) {
    validate(cfg_);
    cfs_ = log_spaced_cfs(cfg_.channels, cfg_.cf_min_hz, cfg_.cf_max_hz);
    if (profile_.cfs.size() != cfs_.size()) {
      throw ChannelMismatch("hearing profile CFs do not match model CFs");
    }
    for (std::size_t j = 0; j < cfs_.size(); ++j) {
      if (std::abs(profile_.cfs[j] - cfs_[j]) > 1e-6 * cfs_[j]) {
        throw ChannelMismatch("hearing profile CFs do not match model CFs");
      }
    }
    knee_amplitude_pa_ =
        kReferencePressurePa * db_to_amplitude(cfg_.knee_level_db);
    Digest d;
    d.update(std::string_view("surrogate-v1"));
    d.update(cfg_.channels);
    d.update(cfg_.cf_min_hz);
    d.update(cfg_.cf_max_hz);
    d.update(cfg_.compression_exponent_normal);
    d.update(cfg_.knee_level_db);
    d.update(cfg_.ihc_cutoff_hz);
    d.update(cfg_.output_scale);
    d.update(cfg_.sample_rate);
    d.update(std::span<const double>(profile_.c_ohc));
    d.update(std::span<const double>(profile_.c_ihc));
    digest_ = d.value();
  }

  InnerRepresentation forward(const Waveform& x) const override {
    if (x.sample_rate != cfg_.sample_rate) {
      throw RateMismatch("waveform rate does not match surrogate rate");
    }
    const int frames = static_cast<int>(x.samples.size());
    InnerRepresentation rep =
        make_representation(cfg_.channels, frames, cfs_);
    const double lp_coeff =
        1.0 - std::exp(-2.0 * kPi * cfg_.ihc_cutoff_hz / cfg_.sample_rate);
    for (int j = 0; j < cfg_.channels; ++j) {
      process_channel(j, x.samples, rep.row(j), lp_coeff);
    }
    return rep;
  }

  const std::vector<double>& cfs() const override { return cfs_; }
  int sample_rate() const override { return cfg_.sample_rate; }
  std::uint64_t digest() const override { return digest_; }
  double output_scale() const override { return cfg_.output_scale; }
  const SurrogateModelConfig& config() const { return cfg_; }
  const HearingProfile& profile() const { return profile_; }

 private:
  void process_channel(int j, const std::vector<double>& in,
                       std::span<double> out, double lp_coeff) const {
    const double cf = cfs_[j];
    const double bw = 1.019 * erb_hz(cf);  // 1.019: gammatone ERB correction
    const double lambda = std::exp(-2.0 * kPi * bw / cfg_.sample_rate);
    const double theta = 2.0 * kPi * cf / cfg_.sample_rate;
    const std::complex<double> pole(lambda * std::cos(theta),
                                    lambda * std::sin(theta));
    const double stage_gain = 1.0 - lambda;

    const double c_ohc = profile_.c_ohc[j];
    const double c_ihc = profile_.c_ihc[j];
    const double exponent =
        c_ohc * cfg_.compression_exponent_normal + (1.0 - c_ohc) * 1.0;
    // Below the knee the channel is linear with a gain reduced by
    // (1 - c_ohc) * 20 dB; above the knee the broken stick continues the
    // curve with the impairment-dependent exponent.
    const double linear_gain = std::pow(10.0, -(1.0 - c_ohc) * 20.0 / 20.0);
    const double knee = knee_amplitude_pa_;

    std::complex<double> s1(0.0, 0.0), s2(0.0, 0.0), s3(0.0, 0.0), s4(0.0, 0.0);
    double lp_state = 0.0;
    for (std::size_t t = 0; t < in.size(); ++t) {
      // Gammatone: four cascaded complex one-pole resonators, unity gain
      // at CF; factor 2 recovers the amplitude of a real on-CF tone.
      s1 = pole * s1 + stage_gain * in[t];
      s2 = pole * s2 + stage_gain * s1;
      s3 = pole * s3 + stage_gain * s2;
      s4 = pole * s4 + stage_gain * s3;
      const double v = 2.0 * s4.real();

      const double mag = std::abs(v);
      double compressed;
      if (mag <= knee) {
        compressed = linear_gain * mag;
      } else {
        compressed = linear_gain * knee * std::pow(mag / knee, exponent);
      }
      const double y = v < 0.0 ? -compressed : compressed;

      const double rectified = y > 0.0 ? c_ihc * y : 0.0;
      lp_state += lp_coeff * (rectified - lp_state);
      out[t] = lp_state * cfg_.output_scale;
    }
  }

  SurrogateModelConfig cfg_;
  HearingProfile profile_;
  std::vector<double> cfs_;
  double knee_amplitude_pa_ = 0.0;
  std::uint64_t digest_ = 0;
};

}  // namespace audemu
