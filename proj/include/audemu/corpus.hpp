// corpus.hpp: adapter for externally precomputed model outputs.
//
// On-disk layout: a JSON manifest listing {input_wav_path, target_path,
// model_digest, spl} entries plus the channel CFs and sample rate.
// Targets are raw little-endian 32-bit-float J x T matrices behind a
// 16-byte header (8-byte magic, uint32 J, uint32 T).
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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "audemu/auditory_model.hpp"
#include "audemu/digest.hpp"
#include "audemu/errors.hpp"
#include "audemu/representation.hpp"
#include "audemu/wav.hpp"

namespace audemu {

inline constexpr char kTargetMagic[8] = {'A', 'M', 'E', 'T', 'G', 'T', '0', '1'};

// Writes a representation as float32; returns the float32-rounded values
// that a reader will observe.
inline void write_target_file(const std::string& path,
                              const InnerRepresentation& rep) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write target file: " + path);
  out.write(kTargetMagic, 8);
  const std::uint32_t j = static_cast<std::uint32_t>(rep.channels);
  const std::uint32_t t = static_cast<std::uint32_t>(rep.frames);
  out.write(reinterpret_cast<const char*>(&j), 4);
  out.write(reinterpret_cast<const char*>(&t), 4);
  std::vector<float> buf(rep.values.size());
  for (std::size_t i = 0; i < rep.values.size(); ++i) {
    buf[i] = static_cast<float>(rep.values[i]);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("short write to target file: " + path);
}

inline InnerRepresentation read_target_file(const std::string& path,
                                            std::vector<double> cfs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open target file: " + path);
  char magic[8];
  std::uint32_t j = 0, t = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&j), 4);
  in.read(reinterpret_cast<char*>(&t), 4);
  if (!in || std::memcmp(magic, kTargetMagic, 8) != 0) {
    throw IoError("bad target file header: " + path);
  }
  if (j != cfs.size()) throw ChannelMismatch("target channel count mismatch: " + path);
  InnerRepresentation rep = make_representation(static_cast<int>(j),
                                                static_cast<int>(t), std::move(cfs));
  std::vector<float> buf(rep.values.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw IoError("truncated target file: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    rep.values[i] = static_cast<double>(buf[i]);
  }
  return rep;
}

// Looks up precomputed inner representations by the content hash of the
// input waveform; entries carry the digest of the producing model so that
// inputs are never silently paired with wrong-model targets.
class CorpusAdapterModel final : public AuditoryModel {
 public:
  explicit CorpusAdapterModel(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open corpus manifest: " + manifest_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw IoError(std::string("cannot parse corpus manifest: ") + e.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    model_digest_ = j.at("model_digest").get<std::uint64_t>();
    sample_rate_ = j.at("sample_rate").get<int>();
    output_scale_ = j.value("output_scale", 1.0);
    cfs_ = j.at("cfs").get<std::vector<double>>();
    for (const auto& entry : j.at("entries")) {
      const auto entry_digest = entry.at("model_digest").get<std::uint64_t>();
      if (entry_digest != model_digest_) {
        throw IoError("corpus entry produced by a different model: " +
                      entry.at("target_path").get<std::string>());
      }
      const std::string wav_path =
          (base / entry.at("input_wav_path").get<std::string>()).string();
      const std::string target_path =
          (base / entry.at("target_path").get<std::string>()).string();
      const Waveform w = read_wav(wav_path);
      targets_by_input_[waveform_digest(w)] = target_path;
    }
  }

  InnerRepresentation forward(const Waveform& x) const override {
    const auto it = targets_by_input_.find(waveform_digest(x));
    if (it == targets_by_input_.end()) {
      throw NotInCorpus("no precomputed target for this waveform");
    }
    return read_target_file(it->second, cfs_);
  }

  const std::vector<double>& cfs() const override { return cfs_; }
  int sample_rate() const override { return sample_rate_; }
  std::uint64_t digest() const override { return model_digest_; }
  double output_scale() const override { return output_scale_; }

 private:
  std::map<std::uint64_t, std::string> targets_by_input_;
  std::vector<double> cfs_;
  int sample_rate_ = 0;
  double output_scale_ = 1.0;
  std::uint64_t model_digest_ = 0;
};

// Materializes model outputs for (waveform, level) pairs into a directory
// readable by CorpusAdapterModel.  Waveforms must already be normalized.
inline void write_adapter_corpus(const std::string& dir,
                                 const AuditoryModel& model,
                                 const std::vector<std::pair<Waveform, double>>& pairs) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  int index = 0;
  for (const auto& [w, spl] : pairs) {
    const std::string wav_name = "input_" + std::to_string(index) + ".wav";
    const std::string target_name = "target_" + std::to_string(index) + ".bin";
    write_wav_float32((fs::path(dir) / wav_name).string(), w);
    // Hash what a reader will reload: float32 WAV quantizes the samples.
    const Waveform reloaded = read_wav((fs::path(dir) / wav_name).string());
    write_target_file((fs::path(dir) / target_name).string(),
                      model.forward(reloaded));
    entries.push_back({{"input_wav_path", wav_name},
                       {"target_path", target_name},
                       {"model_digest", model.digest()},
                       {"spl", spl}});
    ++index;
  }
  nlohmann::json manifest = {{"model_digest", model.digest()},
                             {"sample_rate", model.sample_rate()},
                             {"output_scale", model.output_scale()},
                             {"cfs", model.cfs()},
                             {"entries", entries}};
  std::ofstream out(fs::path(dir) / "corpus_manifest.json");
  if (!out) throw IoError("cannot write corpus manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

}  // namespace audemu
