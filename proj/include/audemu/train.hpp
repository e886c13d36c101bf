// train.hpp: end-to-end emulator training.
//
// Targets are computed once on whole utterances and sliced into windows,
// so ground truth keeps the model's long-range state; contexts come from
// the real signal where available.  The loss is evaluated on core windows
// only.  Batch gradients are computed in parallel per item and reduced in
// item order, so a run is a deterministic function of (corpus, model,
// spec, config) for any worker count.
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
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "audemu/auditory_model.hpp"
#include "audemu/loss.hpp"
#include "audemu/net.hpp"
#include "audemu/parallel.hpp"
#include "audemu/rng.hpp"
#include "audemu/signals.hpp"
#include "audemu/weights.hpp"

namespace audemu {

enum class Objective { kMae, kFmae };

inline const char* objective_name(Objective o) {
  return o == Objective::kMae ? "mae" : "fmae";
}

struct TrainingConfig {
  Objective objective = Objective::kMae;
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  WindowSpec window;
  LevelGrid grid;
  double output_scale = 1.0;  // recorded; scaling lives inside the model
  int checkpoint_every = 0;   // steps; 0 disables intermediate checkpoints
  int max_segments = 0;       // 0 keeps every segment
  int workers = 0;
};

inline void validate(const TrainingConfig& c) {
  if (c.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (c.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (c.lr < 0.0) throw InvalidArgument("learning rate must be >= 0");
  validate(c.window);
  validate(c.grid);
}

// One training example: a context-padded segment, the matching target
// slice over the core window, and the measured core level.
struct TrainingPair {
  Waveform segment;
  int core_begin = 0;
  int core_len = 0;
  InnerRepresentation target_core;
  double l_star = 0.0;
};

// Level-normalizes the corpus (seeded level draws), runs the model over
// each full utterance once, and windows both sides consistently.
inline std::vector<TrainingPair> prepare_pairs(const AuditoryModel& model,
                                               const std::vector<Waveform>& corpus,
                                               const LevelGrid& grid,
                                               const WindowSpec& window,
                                               std::uint64_t seed,
                                               int max_segments = 0,
                                               int workers = 0) {
  const auto leveled = build_level_dataset(corpus, grid, seed);
  std::vector<std::vector<TrainingPair>> per_signal(leveled.size());
  parallel_for(leveled.size(), workers, [&](std::size_t i) {
    const Waveform& x = leveled[i].first;
    if (static_cast<int>(x.samples.size()) < window.window_len) return;
    const InnerRepresentation target = model.forward(x);
    for (auto& cw : window_with_context(x, window)) {
      TrainingPair pair;
      pair.core_begin = cw.core_begin;
      pair.core_len = window.window_len;
      pair.l_star = core_level_or_neg_inf(cw);
      pair.target_core = slice_frames(target, cw.source_offset,
                                      cw.source_offset + window.window_len);
      pair.segment = std::move(cw.segment);
      per_signal[i].push_back(std::move(pair));
    }
  });
  std::vector<TrainingPair> pairs;
  for (auto& bucket : per_signal) {
    for (auto& p : bucket) {
      pairs.push_back(std::move(p));
      if (max_segments > 0 && static_cast<int>(pairs.size()) >= max_segments) {
        return pairs;
      }
    }
  }
  if (pairs.empty()) throw InputTooShort("corpus yields no training segments");
  return pairs;
}

struct TrainingRun {
  TrainingConfig config;
  NetworkSpec spec;
  std::optional<WeightTable> weight_table;
  std::vector<std::pair<long long, double>> loss_curve;  // (step, value)
  ParameterSet final_params;
  std::vector<std::uint64_t> corpus_digests;
};

namespace detail {

// Loss value and upstream gradient for one pair under one objective; the
// gradient arrives on the core window and is zero-padded over contexts.
struct ItemResult {
  double loss = 0.0;
  std::vector<double> upstream_full;
};

inline ItemResult item_loss_and_upstream(const TrainingPair& pair,
                                         const std::vector<double>& core_pred,
                                         Objective objective,
                                         const WeightTable* table) {
  const int channels = pair.target_core.channels;
  const int core_len = pair.core_len;
  InnerRepresentation pred = make_representation(channels, core_len,
                                                 pair.target_core.cfs);
  pred.values = core_pred;
  LossValue lv;
  if (objective == Objective::kMae) {
    lv = mae(pair.target_core, pred);
  } else {
    lv = fmae(pair.target_core, pred, *table, pair.l_star);
  }
  ItemResult out;
  out.loss = lv.value;
  const int seg_len = static_cast<int>(pair.segment.samples.size());
  out.upstream_full.assign(static_cast<std::size_t>(channels) * seg_len, 0.0);
  for (int j = 0; j < channels; ++j) {
    double* dst = out.upstream_full.data() + static_cast<std::size_t>(j) * seg_len +
                  pair.core_begin;
    const double* src = lv.gradient.data() + static_cast<std::size_t>(j) * core_len;
    for (int t = 0; t < core_len; ++t) dst[t] = src[t];
  }
  return out;
}

}  // namespace detail

// Trains one emulator.  For the FMAE objective the network regresses the
// normalized representation beta (.) f and a weight table estimated on the
// same model/corpus/grid must be supplied.
inline TrainingRun train_emulator(const AuditoryModel& model,
                                  const std::vector<Waveform>& corpus,
                                  const NetworkSpec& net_spec,
                                  const TrainingConfig& cfg,
                                  const WeightTable* table = nullptr,
                                  const std::string& run_dir = "") {
  validate(cfg);
  validate(net_spec);
  if (cfg.objective == Objective::kFmae) {
    if (table == nullptr) {
      throw BadConfig("fmae training requires a weight table");
    }
    if (table->model_digest != model.digest()) {
      throw ConfigMismatch("weight table was estimated on a different model");
    }
  }
  const int seg_len =
      cfg.window.left_context + cfg.window.window_len + cfg.window.right_context;
  if (seg_len % net_spec.total_downsample() != 0) {
    throw BadLength("segment length must divide by the network downsampling");
  }

  std::vector<TrainingPair> pairs = prepare_pairs(
      model, corpus, cfg.grid, cfg.window, cfg.seed, cfg.max_segments,
      cfg.workers);
  // FMAE trains against the normalized representation.
  if (cfg.objective == Objective::kFmae) {
    for (auto& pair : pairs) {
      for (int j = 0; j < pair.target_core.channels; ++j) {
        const double beta = table->beta[j];
        for (double& v : pair.target_core.row(j)) v *= beta;
      }
    }
  }

  TrainingRun run;
  run.config = cfg;
  run.spec = net_spec;
  if (cfg.objective == Objective::kFmae) run.weight_table = *table;
  run.corpus_digests.reserve(corpus.size());
  for (const auto& w : corpus) run.corpus_digests.push_back(waveform_digest(w));

  Network net(net_spec);
  ParameterSet params = init_params(net_spec, cfg.seed);
  AdamState adam = make_adam_state(params, cfg.lr);
  Rng shuffle_rng(cfg.seed ^ 0x5157AE5157AE5157ull);

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Seeded Fisher-Yates shuffle across utterances and levels.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t k = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[k]);
    }
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += cfg.batch_size) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + cfg.batch_size);
      const std::size_t batch = batch_end - batch_start;
      std::vector<ParameterSet> item_grads(batch);
      std::vector<double> item_losses(batch, 0.0);
      parallel_for(batch, cfg.workers, [&](std::size_t b) {
        const TrainingPair& pair = pairs[order[batch_start + b]];
        NetTape tape;
        const std::vector<double> full =
            net.forward(params, pair.segment.samples, &tape);
        const int t = static_cast<int>(pair.segment.samples.size());
        std::vector<double> core(static_cast<std::size_t>(net_spec.out_channels) *
                                 pair.core_len);
        for (int j = 0; j < net_spec.out_channels; ++j) {
          const double* src = full.data() + static_cast<std::size_t>(j) * t +
                              pair.core_begin;
          double* dst = core.data() + static_cast<std::size_t>(j) * pair.core_len;
          for (int i2 = 0; i2 < pair.core_len; ++i2) dst[i2] = src[i2];
        }
        const detail::ItemResult res = detail::item_loss_and_upstream(
            pair, core, cfg.objective, table);
        item_losses[b] = res.loss;
        item_grads[b] = zero_like(params);
        net.backward(params, tape, res.upstream_full, &item_grads[b]);
      });
      // Fixed-order reduction keeps runs bit-identical across worker counts.
      ParameterSet grads = zero_like(params);
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        batch_loss += item_losses[b];
        for (std::size_t tnsr = 0; tnsr < grads.tensors.size(); ++tnsr) {
          auto& acc = grads.tensors[tnsr];
          const auto& g = item_grads[b].tensors[tnsr];
          for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += g[n];
        }
      }
      const double inv_batch = 1.0 / static_cast<double>(batch);
      batch_loss *= inv_batch;
      for (auto& tnsr : grads.tensors) {
        for (double& g : tnsr) g *= inv_batch;
      }
      if (!std::isfinite(batch_loss)) {
        if (!run_dir.empty()) {
          save_checkpoint((std::filesystem::path(run_dir) /
                           ("diverged_step_" + std::to_string(step) + ".ckpt"))
                              .string(),
                          net_spec, params, static_cast<std::uint64_t>(step));
        }
        throw DivergenceDetected("loss became non-finite at step " +
                                 std::to_string(step));
      }
      adam_step(adam, params, grads);
      ++step;
      run.loss_curve.emplace_back(step, batch_loss);
      if (cfg.checkpoint_every > 0 && !run_dir.empty() &&
          step % cfg.checkpoint_every == 0) {
        save_checkpoint((std::filesystem::path(run_dir) /
                         ("step_" + std::to_string(step) + ".ckpt"))
                            .string(),
                        net_spec, params, static_cast<std::uint64_t>(step));
      }
    }
  }
  run.final_params = std::move(params);
  return run;
}

// Trains the same initialization under both objectives.  The two configs
// must be identical except for the objective.
inline std::pair<TrainingRun, TrainingRun> compare_objectives(
    const AuditoryModel& model, const std::vector<Waveform>& corpus,
    const NetworkSpec& net_spec, const TrainingConfig& cfg_a,
    const TrainingConfig& cfg_b, const WeightTable& table,
    const std::string& run_dir_a = "", const std::string& run_dir_b = "") {
  if (cfg_a.objective == cfg_b.objective) {
    throw ConfigMismatch("objectives must differ for a comparison");
  }
  auto same = [](const TrainingConfig& x, const TrainingConfig& y) {
    return x.epochs == y.epochs && x.batch_size == y.batch_size &&
           x.lr == y.lr && x.seed == y.seed &&
           x.window.window_len == y.window.window_len &&
           x.window.left_context == y.window.left_context &&
           x.window.right_context == y.window.right_context &&
           x.grid.levels_db == y.grid.levels_db &&
           x.output_scale == y.output_scale &&
           x.max_segments == y.max_segments;
  };
  if (!same(cfg_a, cfg_b)) {
    throw ConfigMismatch("configs differ beyond the objective");
  }
  const TrainingConfig& cfg_mae =
      cfg_a.objective == Objective::kMae ? cfg_a : cfg_b;
  const TrainingConfig& cfg_fmae =
      cfg_a.objective == Objective::kFmae ? cfg_a : cfg_b;
  TrainingRun run_mae =
      train_emulator(model, corpus, net_spec, cfg_mae, nullptr, run_dir_a);
  TrainingRun run_fmae =
      train_emulator(model, corpus, net_spec, cfg_fmae, &table, run_dir_b);
  return {std::move(run_mae), std::move(run_fmae)};
}

}  // namespace audemu
