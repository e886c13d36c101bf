// audemu_main.cpp: command-line entry point.
//
// Subcommands: gen, weights, train, eval, excite, energymap.  Exit code 0
// on success; otherwise a machine-parsable JSON error line goes to stderr.
// Set FMAE_LAB_LOG=1 for progress logging.
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
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "audemu/cli.hpp"
#include "audemu/version.hpp"

namespace {

struct SubcommandArgs {
  std::string config_path;
  audemu::CliOverrides overrides;
};

void attach_common_flags(CLI::App* cmd, SubcommandArgs* args,
                         std::uint64_t* seed_slot, int* workers_slot,
                         std::string* out_slot) {
  cmd->add_option("--config", args->config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", *seed_slot, "Override the config seed");
  cmd->add_option("--workers", *workers_slot, "Worker thread count");
  cmd->add_option("--out", *out_slot, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audemu: auditory-model emulator laboratory"};
  app.set_version_flag("--version", audemu::kVersion);
  app.require_subcommand(1);

  using Handler = std::function<int(const std::string&, const audemu::CliOverrides&)>;
  const std::map<std::string, std::pair<std::string, Handler>> commands = {
      {"gen", {"Synthesize or ingest a waveform corpus", audemu::cmd_gen}},
      {"weights", {"Estimate FMAE weight factors", audemu::cmd_weights}},
      {"train", {"Train an emulator network", audemu::cmd_train}},
      {"eval", {"Evaluate trained emulators (SER, log-MAE)", audemu::cmd_eval}},
      {"excite", {"Compute pure-tone excitation patterns", audemu::cmd_excite}},
      {"energymap", {"Export the channel-energy distribution", audemu::cmd_energymap}},
  };

  std::map<std::string, SubcommandArgs> args;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, int> workers;
  std::map<std::string, std::string> outs;
  for (const auto& [name, entry] : commands) {
    CLI::App* cmd = app.add_subcommand(name, entry.first);
    auto& a = args[name];
    seeds[name] = 0;
    workers[name] = 0;
    attach_common_flags(cmd, &a, &seeds[name], &workers[name], &outs[name]);
    cmd->callback([&, name]() {
      CLI::App* sub = app.get_subcommand(name);
      auto& sa = args[name];
      if (sub->count("--seed") > 0) sa.overrides.seed = seeds[name];
      if (sub->count("--workers") > 0) sa.overrides.workers = workers[name];
      if (sub->count("--out") > 0) sa.overrides.out_dir = outs[name];
    });
  }

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return commands.at(name).second(args[name].config_path,
                                    args[name].overrides);
  } catch (const audemu::Error& e) {
    const nlohmann::json err = {{"error", true},
                                {"command", name},
                                {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    const nlohmann::json err = {{"error", true},
                                {"command", name},
                                {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }
}
