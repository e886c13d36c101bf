// emulator.hpp: a trained network exposed through the AuditoryModel
// interface.
//
// Inference windows the input exactly as during training (non-overlapping
// cores with zero-padded contexts), stitches the core outputs, and, when
// the network was trained on normalized targets, divides each channel by
// its beta to recover the estimate.  Inputs are truncated to a whole
// number of windows.
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

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "audemu/auditory_model.hpp"
#include "audemu/loss.hpp"
#include "audemu/net.hpp"
#include "audemu/signals.hpp"
#include "audemu/weights.hpp"

namespace audemu {

class EmulatorModel final : public AuditoryModel {
 public:
  EmulatorModel(NetworkSpec spec, ParameterSet params, WindowSpec window,
                std::vector<double> cfs, int sample_rate,
                std::optional<WeightTable> table = std::nullopt,
                std::vector<std::uint64_t> training_digests = {})
      : net_(std::move(spec)),
        params_(std::move(params)),
        window_(window),
        cfs_(std::move(cfs)),
        sample_rate_(sample_rate),
        table_(std::move(table)),
        training_digests_(std::move(training_digests)) {
    if (static_cast<int>(cfs_.size()) != net_.spec().out_channels) {
      throw ChannelMismatch("emulator cfs do not match network output channels");
    }
    if (table_.has_value() && table_->channels() != net_.spec().out_channels) {
      throw ChannelMismatch("weight table does not match network output channels");
    }
    Digest d;
    d.update(std::string_view("emulator-v1"));
    d.update(net_.spec().digest());
    for (const auto& t : params_.tensors) {
      d.update(std::span<const double>(t));
    }
    digest_ = d.value();
  }

  InnerRepresentation forward(const Waveform& x) const override {
    if (x.sample_rate != sample_rate_) {
      throw RateMismatch("waveform rate does not match emulator rate");
    }
    const auto windows = window_with_context(x, window_);
    const int core_len = window_.window_len;
    const int frames = static_cast<int>(windows.size()) * core_len;
    InnerRepresentation rep =
        make_representation(net_.spec().out_channels, frames, cfs_);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const std::vector<double> core =
          forward_core(net_, params_, windows[w].segment.samples,
                       windows[w].core_begin, core_len);
      for (int j = 0; j < rep.channels; ++j) {
        double* dst = rep.row(j).data() + w * core_len;
        const double* src = core.data() + static_cast<std::size_t>(j) * core_len;
        for (int t = 0; t < core_len; ++t) dst[t] = src[t];
      }
    }
    if (table_.has_value()) rep = recover_estimate(rep, *table_);
    return rep;
  }

  const std::vector<double>& cfs() const override { return cfs_; }
  int sample_rate() const override { return sample_rate_; }
  std::uint64_t digest() const override { return digest_; }
  const std::vector<std::uint64_t>& training_corpus_digests() const override {
    return training_digests_;
  }
  const WindowSpec& window() const { return window_; }
  bool normalized_output() const { return table_.has_value(); }

 private:
  Network net_;
  ParameterSet params_;
  WindowSpec window_;
  std::vector<double> cfs_;
  int sample_rate_ = 0;
  std::optional<WeightTable> table_;
  std::vector<std::uint64_t> training_digests_;
  std::uint64_t digest_ = 0;
};

}  // namespace audemu
