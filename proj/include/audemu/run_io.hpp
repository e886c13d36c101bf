// run_io.hpp: training-run persistence.
//
// A run directory holds config.json, loss_curve.csv (step,value), the
// final checkpoint, and weight_table.json for FMAE runs.
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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "audemu/emulator.hpp"
#include "audemu/errors.hpp"
#include "audemu/net.hpp"
#include "audemu/report.hpp"
#include "audemu/train.hpp"
#include "audemu/weights.hpp"

namespace audemu {

inline nlohmann::json network_spec_to_json(const NetworkSpec& s) {
  auto layer = [](const LayerSpec& l) {
    return nlohmann::json{{"kind", static_cast<int>(l.kind)},
                          {"kernel", l.kernel},
                          {"in_ch", l.in_ch},
                          {"out_ch", l.out_ch},
                          {"factor", l.factor},
                          {"activation", static_cast<int>(l.activation)},
                          {"bias", l.bias}};
  };
  nlohmann::json j;
  j["encoder"] = nlohmann::json::array();
  for (const auto& l : s.encoder) j["encoder"].push_back(layer(l));
  j["has_embedding"] = s.has_embedding;
  if (s.has_embedding) j["embedding"] = layer(s.embedding);
  j["decoder"] = nlohmann::json::array();
  for (const auto& l : s.decoder) j["decoder"].push_back(layer(l));
  j["projection"] = layer(s.projection);
  j["skips"] = s.skips;
  j["out_channels"] = s.out_channels;
  return j;
}

inline NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  auto layer = [](const nlohmann::json& lj) {
    LayerSpec l;
    l.kind = static_cast<LayerKind>(lj.at("kind").get<int>());
    l.kernel = lj.at("kernel").get<int>();
    l.in_ch = lj.at("in_ch").get<int>();
    l.out_ch = lj.at("out_ch").get<int>();
    l.factor = lj.at("factor").get<int>();
    l.activation = static_cast<Activation>(lj.at("activation").get<int>());
    l.bias = lj.at("bias").get<bool>();
    return l;
  };
  NetworkSpec s;
  for (const auto& lj : j.at("encoder")) s.encoder.push_back(layer(lj));
  s.has_embedding = j.at("has_embedding").get<bool>();
  if (s.has_embedding) s.embedding = layer(j.at("embedding"));
  for (const auto& lj : j.at("decoder")) s.decoder.push_back(layer(lj));
  s.projection = layer(j.at("projection"));
  s.skips = j.at("skips").get<bool>();
  s.out_channels = j.at("out_channels").get<int>();
  validate(s);
  return s;
}

inline void save_run(const std::string& dir, const TrainingRun& run,
                     const std::vector<double>& cfs, int sample_rate) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json cfg = {
      {"objective", objective_name(run.config.objective)},
      {"epochs", run.config.epochs},
      {"batch_size", run.config.batch_size},
      {"lr", run.config.lr},
      {"seed", run.config.seed},
      {"window",
       {{"window_len", run.config.window.window_len},
        {"left_context", run.config.window.left_context},
        {"right_context", run.config.window.right_context}}},
      {"grid",
       {{"levels", run.config.grid.levels_db}, {"step_db", run.config.grid.step_db}}},
      {"output_scale", run.config.output_scale},
      {"checkpoint_every", run.config.checkpoint_every},
      {"max_segments", run.config.max_segments},
      {"network_spec", network_spec_to_json(run.spec)},
      {"sample_rate", sample_rate},
      {"cfs", cfs},
      {"corpus_digests", run.corpus_digests}};
  {
    std::ofstream out(fs::path(dir) / "config.json");
    if (!out) throw IoError("cannot write run config in " + dir);
    out << cfg.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "loss_curve.csv");
    if (!out) throw IoError("cannot write loss curve in " + dir);
    out << "step,value\n";
    for (const auto& [step, value] : run.loss_curve) {
      out << step << "," << format_full(value) << "\n";
    }
  }
  save_checkpoint((fs::path(dir) / "final.ckpt").string(), run.spec,
                  run.final_params,
                  static_cast<std::uint64_t>(run.loss_curve.size()));
  if (run.weight_table.has_value()) {
    save_weight_table((fs::path(dir) / "weight_table.json").string(),
                      *run.weight_table);
  }
}

// Reconstructs an inference-ready emulator from a run directory.
inline EmulatorModel load_run_emulator(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "config.json");
  if (!in) throw IoError("cannot open run config in " + dir);
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const std::exception& e) {
    throw IoError(std::string("cannot parse run config: ") + e.what());
  }
  const NetworkSpec spec = network_spec_from_json(cfg.at("network_spec"));
  const Checkpoint ck =
      load_checkpoint((fs::path(dir) / "final.ckpt").string(), spec);
  WindowSpec window;
  window.window_len = cfg.at("window").at("window_len").get<int>();
  window.left_context = cfg.at("window").at("left_context").get<int>();
  window.right_context = cfg.at("window").at("right_context").get<int>();
  std::optional<WeightTable> table;
  if (fs::exists(fs::path(dir) / "weight_table.json")) {
    table = load_weight_table((fs::path(dir) / "weight_table.json").string());
  }
  return EmulatorModel(spec, ck.params, window,
                       cfg.at("cfs").get<std::vector<double>>(),
                       cfg.at("sample_rate").get<int>(), std::move(table),
                       cfg.at("corpus_digests").get<std::vector<std::uint64_t>>());
}

}  // namespace audemu
