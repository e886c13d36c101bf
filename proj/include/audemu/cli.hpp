// cli.hpp: operator commands behind the audemu tool.
//
// Every command takes one JSON config plus flag overrides, writes its
// artifacts under an output directory, and records a run manifest listing
// config digest, input digests and produced files.  Commands are
// idempotent for fixed inputs and seeds; manifests differ only in their
// timestamp.
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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "audemu/auditory_model.hpp"
#include "audemu/corpus.hpp"
#include "audemu/digest.hpp"
#include "audemu/emulator.hpp"
#include "audemu/errors.hpp"
#include "audemu/eval.hpp"
#include "audemu/net.hpp"
#include "audemu/report.hpp"
#include "audemu/resample.hpp"
#include "audemu/run_io.hpp"
#include "audemu/signals.hpp"
#include "audemu/surrogate.hpp"
#include "audemu/train.hpp"
#include "audemu/version.hpp"
#include "audemu/wav.hpp"
#include "audemu/weights.hpp"

namespace audemu {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

namespace detail {

inline nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadConfig("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw BadConfig(std::string("cannot parse config: ") + e.what());
  }
  const int schema = j.value("schema_version", kConfigSchemaVersion);
  if (schema != kConfigSchemaVersion) {
    throw BadConfig("unsupported schema_version " + std::to_string(schema));
  }
  return j;
}

template <typename T>
inline T require_field(const nlohmann::json& j, const std::string& name) {
  if (!j.contains(name)) throw BadConfig("missing config field: " + name);
  try {
    return j.at(name).get<T>();
  } catch (const std::exception&) {
    throw BadConfig("config field has the wrong type: " + name);
  }
}

inline nlohmann::json require_object(const nlohmann::json& j,
                                     const std::string& name) {
  if (!j.contains(name)) throw BadConfig("missing config field: " + name);
  return j.at(name);
}

inline std::uint64_t json_digest(const nlohmann::json& j) {
  Digest d;
  d.update(std::string_view(j.dump()));
  return d.value();
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline void write_manifest(const std::string& out_dir, const std::string& command,
                           const nlohmann::json& config,
                           const nlohmann::json& input_digests,
                           const std::vector<std::string>& outputs,
                           std::uint64_t seed) {
  nlohmann::json m = {{"command", command},
                      {"tool_version", kVersion},
                      {"schema_version", kConfigSchemaVersion},
                      {"config_digest", json_digest(config)},
                      {"input_digests", input_digests},
                      {"outputs", outputs},
                      {"seed", seed},
                      {"timestamp_utc", utc_timestamp()}};
  std::ofstream out(std::filesystem::path(out_dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir);
  out << m.dump(2) << "\n";
}

inline std::string resolve_out_dir(const nlohmann::json& cfg,
                                   const CliOverrides& ov) {
  if (ov.out_dir.has_value()) return *ov.out_dir;
  if (cfg.contains("out_dir")) return cfg.at("out_dir").get<std::string>();
  throw BadConfig("missing config field: out_dir (or pass --out)");
}

inline std::uint64_t resolve_seed(const nlohmann::json& cfg,
                                  const CliOverrides& ov) {
  if (ov.seed.has_value()) return *ov.seed;
  return cfg.value("seed", std::uint64_t{0});
}

inline int resolve_cfg_workers(const nlohmann::json& cfg, const CliOverrides& ov) {
  if (ov.workers.has_value()) return *ov.workers;
  return cfg.value("workers", 0);
}

// Builds the ground-truth model named by a config block.
inline std::unique_ptr<AuditoryModel> build_model(const nlohmann::json& mj) {
  const std::string type = require_field<std::string>(mj, "type");
  if (type == "surrogate") {
    const nlohmann::json sj = require_object(mj, "surrogate");
    SurrogateModelConfig cfg;
    cfg.channels = sj.value("channels", cfg.channels);
    cfg.cf_min_hz = sj.value("cf_min_hz", cfg.cf_min_hz);
    cfg.cf_max_hz = sj.value("cf_max_hz", cfg.cf_max_hz);
    cfg.compression_exponent_normal =
        sj.value("compression_exponent_normal", cfg.compression_exponent_normal);
    cfg.knee_level_db = sj.value("knee_level_db", cfg.knee_level_db);
    cfg.ihc_cutoff_hz = sj.value("ihc_cutoff_hz", cfg.ihc_cutoff_hz);
    cfg.output_scale = sj.value("output_scale", cfg.output_scale);
    cfg.sample_rate = sj.value("sample_rate", cfg.sample_rate);
    Audiogram audiogram;
    if (sj.contains("audiogram") && sj.at("audiogram").is_object()) {
      audiogram.freqs_hz =
          require_field<std::vector<double>>(sj.at("audiogram"), "freqs_hz");
      audiogram.losses_db =
          require_field<std::vector<double>>(sj.at("audiogram"), "losses_db");
    } else {
      audiogram = standard_audiogram(sj.value("audiogram", std::string("N0")));
    }
    const double ohc_fraction = sj.value("ohc_fraction", 2.0 / 3.0);
    const HearingProfile profile = audiogram_to_profile(
        audiogram, log_spaced_cfs(cfg.channels, cfg.cf_min_hz, cfg.cf_max_hz),
        ohc_fraction);
    return std::make_unique<SurrogateModel>(cfg, profile);
  }
  if (type == "adapter") {
    return std::make_unique<CorpusAdapterModel>(
        require_field<std::string>(mj, "manifest"));
  }
  if (type == "identity") {
    return std::make_unique<IdentityModel>(require_field<int>(mj, "channels"),
                                           require_field<int>(mj, "sample_rate"));
  }
  throw BadConfig("unknown model type: " + type);
}

inline LevelGrid grid_from_json(const nlohmann::json& gj) {
  if (gj.contains("levels")) {
    LevelGrid g;
    g.levels_db = gj.at("levels").get<std::vector<double>>();
    g.step_db = g.levels_db.size() > 1 ? g.levels_db[1] - g.levels_db[0] : 0.0;
    if (g.levels_db.size() > 1) validate(g);
    return g;
  }
  return LevelGrid::uniform(require_field<double>(gj, "min_db"),
                            require_field<double>(gj, "max_db"),
                            require_field<double>(gj, "step_db"));
}

inline WindowSpec window_from_json(const nlohmann::json& wj) {
  WindowSpec w;
  w.window_len = wj.value("window_len", w.window_len);
  w.left_context = wj.value("left_context", w.left_context);
  w.right_context = wj.value("right_context", w.right_context);
  validate(w);
  return w;
}

struct CorpusIndexEntry {
  std::string path;
  std::uint64_t digest;
};

// Reads a corpus directory written by cmd_gen, verifying content digests.
inline std::vector<Waveform> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path index_path = fs::path(dir) / "corpus_index.json";
  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open corpus index: " + index_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("cannot parse corpus index: ") + e.what());
  }
  std::vector<Waveform> corpus;
  for (const auto& fj : j.at("files")) {
    const std::string rel = fj.at("path").get<std::string>();
    Waveform w = read_wav((fs::path(dir) / rel).string());
    const std::uint64_t expect = fj.at("digest").get<std::uint64_t>();
    if (waveform_digest(w) != expect) {
      throw IoError("corpus digest mismatch for " + rel +
                    " (file changed since the index was written)");
    }
    corpus.push_back(std::move(w));
  }
  if (corpus.empty()) throw IoError("corpus index lists no files: " + dir);
  return corpus;
}

}  // namespace detail

// gen: synthesize or ingest waveforms into a corpus directory.
inline int cmd_gen(const std::string& config_path, const CliOverrides& ov = {}) {
  namespace fs = std::filesystem;
  const nlohmann::json cfg = detail::load_config(config_path);
  const std::string out_dir = detail::resolve_out_dir(cfg, ov);
  const std::uint64_t seed = detail::resolve_seed(cfg, ov);
  const std::string mode = detail::require_field<std::string>(cfg, "mode");
  fs::create_directories(out_dir);
  nlohmann::json files = nlohmann::json::array();
  std::vector<std::string> outputs;
  int sample_rate = cfg.value("sample_rate", 20000);
  if (mode == "synth") {
    const int count = detail::require_field<int>(cfg, "count");
    const double duration_s = detail::require_field<double>(cfg, "duration_s");
    Rng master(seed);
    for (int i = 0; i < count; ++i) {
      const Waveform w =
          synth_speech_shaped_noise(duration_s, master.next_u64(), sample_rate);
      const std::string name = "utt_" + std::to_string(i) + ".wav";
      write_wav_float32((fs::path(out_dir) / name).string(), w);
      const Waveform reloaded = read_wav((fs::path(out_dir) / name).string());
      files.push_back({{"path", name},
                       {"digest", waveform_digest(reloaded)},
                       {"duration_s", reloaded.duration_s()}});
      outputs.push_back(name);
    }
  } else if (mode == "ingest") {
    const auto inputs = detail::require_field<std::vector<std::string>>(cfg, "inputs");
    const double calibration = cfg.value("full_scale_pa", 1.0);
    int index = 0;
    for (const auto& path : inputs) {
      Waveform w = read_wav(path, calibration);
      if (w.sample_rate != sample_rate) w = resample(w, sample_rate);
      const std::string name = "utt_" + std::to_string(index++) + ".wav";
      write_wav_float32((fs::path(out_dir) / name).string(), w);
      const Waveform reloaded = read_wav((fs::path(out_dir) / name).string());
      files.push_back({{"path", name},
                       {"digest", waveform_digest(reloaded)},
                       {"duration_s", reloaded.duration_s()}});
      outputs.push_back(name);
    }
  } else {
    throw BadConfig("unknown gen mode: " + mode);
  }
  {
    nlohmann::json index = {{"schema_version", kConfigSchemaVersion},
                            {"sample_rate", sample_rate},
                            {"seed", seed},
                            {"files", files}};
    std::ofstream out(fs::path(out_dir) / "corpus_index.json");
    if (!out) throw IoError("cannot write corpus index in " + out_dir);
    out << index.dump(2) << "\n";
    outputs.push_back("corpus_index.json");
  }
  detail::write_manifest(out_dir, "gen", cfg, nlohmann::json::object(), outputs,
                         seed);
  return 0;
}

// weights: estimate a weight table from a corpus and a model.
inline int cmd_weights(const std::string& config_path,
                       const CliOverrides& ov = {}) {
  namespace fs = std::filesystem;
  const nlohmann::json cfg = detail::load_config(config_path);
  const std::string out_dir = detail::resolve_out_dir(cfg, ov);
  const std::uint64_t seed = detail::resolve_seed(cfg, ov);
  const std::string corpus_dir = detail::require_field<std::string>(cfg, "corpus_dir");
  const auto model = detail::build_model(detail::require_object(cfg, "model"));
  const LevelGrid grid = detail::grid_from_json(detail::require_object(cfg, "grid"));
  const std::vector<Waveform> corpus = detail::load_corpus(corpus_dir);
  WeightEstimationOptions opts;
  opts.subset_per_level = cfg.value("subset_per_level", 0);
  opts.workers = detail::resolve_cfg_workers(cfg, ov);
  const WeightTable table = estimate_weights(*model, corpus, grid, seed, opts);
  fs::create_directories(out_dir);
  save_weight_table((fs::path(out_dir) / "weight_table.json").string(), table);
  nlohmann::json inputs;
  inputs["model_digest"] = model->digest();
  Digest cd;
  for (const auto& w : corpus) cd.update(waveform_digest(w));
  inputs["corpus_digest"] = cd.value();
  detail::write_manifest(out_dir, "weights", cfg, inputs,
                         {"weight_table.json"}, seed);
  return 0;
}

// train: fit one emulator under the configured objective.
inline int cmd_train(const std::string& config_path,
                     const CliOverrides& ov = {}) {
  namespace fs = std::filesystem;
  const nlohmann::json cfg = detail::load_config(config_path);
  const std::string out_dir = detail::resolve_out_dir(cfg, ov);
  const std::uint64_t seed = detail::resolve_seed(cfg, ov);
  const auto model = detail::build_model(detail::require_object(cfg, "model"));
  const std::vector<Waveform> corpus =
      detail::load_corpus(detail::require_field<std::string>(cfg, "corpus_dir"));

  TrainingConfig tc;
  const std::string objective = detail::require_field<std::string>(cfg, "objective");
  if (objective == "mae") {
    tc.objective = Objective::kMae;
  } else if (objective == "fmae") {
    tc.objective = Objective::kFmae;
  } else {
    throw BadConfig("objective must be \"mae\" or \"fmae\"");
  }
  tc.epochs = cfg.value("epochs", tc.epochs);
  tc.batch_size = cfg.value("batch_size", tc.batch_size);
  tc.lr = cfg.value("lr", tc.lr);
  tc.seed = seed;
  tc.window = cfg.contains("window")
                  ? detail::window_from_json(cfg.at("window"))
                  : WindowSpec{};
  tc.grid = detail::grid_from_json(detail::require_object(cfg, "grid"));
  tc.output_scale = model->output_scale();
  tc.checkpoint_every = cfg.value("checkpoint_every", 0);
  tc.max_segments = cfg.value("max_segments", 0);
  tc.workers = detail::resolve_cfg_workers(cfg, ov);

  const nlohmann::json nj = detail::require_object(cfg, "net");
  const std::string family = detail::require_field<std::string>(nj, "family");
  const int channels = static_cast<int>(model->cfs().size());
  const int depth = nj.value("depth", 16);
  NetworkSpec spec;
  if (family == "connear") {
    spec = build_connear_spec(channels, depth);
  } else if (family == "waveunet") {
    spec = build_waveunet_spec(channels, depth);
  } else {
    throw BadConfig("net.family must be \"connear\" or \"waveunet\"");
  }

  const WeightTable* table_ptr = nullptr;
  WeightTable table;
  if (tc.objective == Objective::kFmae) {
    if (!cfg.contains("weight_table")) {
      throw BadConfig(
          "objective \"fmae\" needs a weight_table path; run the weights "
          "command first and point weight_table at its output");
    }
    table = load_weight_table(cfg.at("weight_table").get<std::string>());
    table_ptr = &table;
  }

  fs::create_directories(out_dir);
  const TrainingRun run =
      train_emulator(*model, corpus, spec, tc, table_ptr, out_dir);
  save_run(out_dir, run, model->cfs(), model->sample_rate());

  nlohmann::json inputs;
  inputs["model_digest"] = model->digest();
  Digest cd;
  for (const auto& d : run.corpus_digests) cd.update(d);
  inputs["corpus_digest"] = cd.value();
  detail::write_manifest(out_dir, "train", cfg, inputs,
                         {"config.json", "loss_curve.csv", "final.ckpt"}, seed);
  return 0;
}

// eval: SER/log-MAE reports for one or two trained runs.
inline int cmd_eval(const std::string& config_path, const CliOverrides& ov = {}) {
  const nlohmann::json cfg = detail::load_config(config_path);
  const std::string out_dir = detail::resolve_out_dir(cfg, ov);
  const std::uint64_t seed = detail::resolve_seed(cfg, ov);
  const auto model = detail::build_model(detail::require_object(cfg, "model"));
  const std::vector<Waveform> test_corpus = detail::load_corpus(
      detail::require_field<std::string>(cfg, "test_corpus_dir"));
  const LevelGrid grid = detail::grid_from_json(detail::require_object(cfg, "grid"));
  const nlohmann::json runs = detail::require_object(cfg, "runs");
  const bool pool_energy = cfg.value("pool_energy", true);

  ReportArtifacts artifacts;
  std::optional<EmulatorModel> em_mae, em_fmae;
  if (runs.contains("mae")) {
    em_mae = load_run_emulator(runs.at("mae").get<std::string>());
    artifacts.ser_mae = ser_matrix(*model, *em_mae, test_corpus, grid, pool_energy);
    artifacts.log_mae_mae = log_mae_curve(*model, *em_mae, test_corpus, grid);
  }
  if (runs.contains("fmae")) {
    em_fmae = load_run_emulator(runs.at("fmae").get<std::string>());
    artifacts.ser_fmae = ser_matrix(*model, *em_fmae, test_corpus, grid, pool_energy);
    artifacts.log_mae_fmae = log_mae_curve(*model, *em_fmae, test_corpus, grid);
  }
  if (artifacts.ser_mae && artifacts.ser_fmae) {
    artifacts.delta = delta_ser(*artifacts.ser_fmae, *artifacts.ser_mae);
  }
  export_report(out_dir, artifacts);
  nlohmann::json inputs;
  inputs["model_digest"] = model->digest();
  detail::write_manifest(out_dir, "eval", cfg, inputs,
                         {"summary.json"}, seed);
  return 0;
}

// excite: excitation patterns of the reference and any trained runs.
inline int cmd_excite(const std::string& config_path,
                      const CliOverrides& ov = {}) {
  namespace fs = std::filesystem;
  const nlohmann::json cfg = detail::load_config(config_path);
  const std::string out_dir = detail::resolve_out_dir(cfg, ov);
  const std::uint64_t seed = detail::resolve_seed(cfg, ov);
  const auto model = detail::build_model(detail::require_object(cfg, "model"));
  const auto freqs = detail::require_field<std::vector<double>>(cfg, "tone_freqs_hz");
  const auto levels = detail::require_field<std::vector<double>>(cfg, "tone_levels_db");
  const double duration = cfg.value("duration_s", 0.2048);
  fs::create_directories(out_dir);
  std::vector<std::string> outputs;

  auto emit = [&](const AuditoryModel& m, const std::string& name) {
    ReportArtifacts art;
    art.excitation_cfs = m.cfs();
    for (double f : freqs) {
      for (double l : levels) {
        art.excitations.push_back(excitation_pattern(m, f, l, duration));
      }
    }
    const std::string sub = (fs::path(out_dir) / name).string();
    export_report(sub, art);
    outputs.push_back(name + "/excitation_patterns.csv");
  };
  emit(*model, "reference");
  if (cfg.contains("runs")) {
    for (const auto& [label, dir] : cfg.at("runs").items()) {
      const EmulatorModel em = load_run_emulator(dir.get<std::string>());
      emit(em, label);
    }
  }
  nlohmann::json inputs;
  inputs["model_digest"] = model->digest();
  detail::write_manifest(out_dir, "excite", cfg, inputs, outputs, seed);
  return 0;
}

// energymap: mean channel-energy distribution over (CF, level) cells.
inline int cmd_energymap(const std::string& config_path,
                         const CliOverrides& ov = {}) {
  namespace fs = std::filesystem;
  const nlohmann::json cfg = detail::load_config(config_path);
  const std::string out_dir = detail::resolve_out_dir(cfg, ov);
  const std::uint64_t seed = detail::resolve_seed(cfg, ov);
  const auto model = detail::build_model(detail::require_object(cfg, "model"));
  const std::vector<Waveform> corpus =
      detail::load_corpus(detail::require_field<std::string>(cfg, "corpus_dir"));
  const LevelGrid grid = detail::grid_from_json(detail::require_object(cfg, "grid"));
  const EnergyMap map = energy_distribution(*model, corpus, grid);
  fs::create_directories(out_dir);
  write_matrix_csv((fs::path(out_dir) / "energy_map.csv").string(), map.cfs,
                   map.levels, map.values);
  nlohmann::json inputs;
  inputs["model_digest"] = model->digest();
  detail::write_manifest(out_dir, "energymap", cfg, inputs, {"energy_map.csv"},
                         seed);
  return 0;
}

}  // namespace audemu
