// weights.hpp: estimation of the FMAE weighting factors.
//
// beta_bar(j,l) is the per-level average of inverse channel L1 norms;
// beta(j) averages the per-level min-normalized columns; alpha(j,l)
// carries the residual level-and-frequency dependence, normalized so the
// average weight is unity at the highest level.  Off-grid levels are
// served by log-domain interpolation with clamping outside the grid.
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
#include <cassert>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "audemu/auditory_model.hpp"
#include "audemu/errors.hpp"
#include "audemu/parallel.hpp"
#include "audemu/rng.hpp"
#include "audemu/signals.hpp"

namespace audemu {

struct WeightTable {
  LevelGrid grid;
  std::vector<double> cfs;
  std::vector<double> beta;   // J
  std::vector<double> alpha;  // J x |L|, row-major
  std::uint64_t model_digest = 0;

  int channels() const { return static_cast<int>(beta.size()); }
  double alpha_at(int j, int l) const {
    return alpha[static_cast<std::size_t>(j) * grid.levels_db.size() + l];
  }
};

struct WeightEstimationOptions {
  // Signals per level; 0 uses the whole corpus at every level.
  int subset_per_level = 0;
  // Relative floor applied to channel L1 norms before inversion; the
  // absolute floor is rel * T * model output scale.
  double norm_floor_rel = 1e-12;
  int workers = 0;
};

namespace detail {

inline void require_positive(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw NonPositiveEntry(std::string(what) + " must be positive and finite");
    }
  }
}

}  // namespace detail

// beta_bar(j,l) = (1/|X_l|) sum over X_l of 1 / ||f_j(x_l)||_1.
// corpus_by_level follows the grid's level order.  Returns J x |L|.
// floored_count, when given, receives the number of floored norms.
inline std::vector<double> estimate_beta_bar(
    const AuditoryModel& model,
    const std::vector<std::vector<Waveform>>& corpus_by_level,
    const LevelGrid& grid, double norm_floor_rel = 1e-12, int workers = 0,
    std::size_t* floored_count = nullptr) {
  validate(grid);
  const int levels = static_cast<int>(grid.levels_db.size());
  if (static_cast<int>(corpus_by_level.size()) != levels) {
    throw MismatchedLengths("corpus_by_level size does not match grid");
  }
  for (const auto& bucket : corpus_by_level) {
    if (bucket.empty()) throw EmptyLevelSet("a level has no signals");
  }
  const int channels = static_cast<int>(model.cfs().size());

  struct Item {
    int level;
    const Waveform* signal;
  };
  std::vector<Item> items;
  for (int l = 0; l < levels; ++l) {
    for (const Waveform& w : corpus_by_level[l]) items.push_back({l, &w});
  }
  // Inverse norms per (signal, level) pair, reduced afterwards in fixed
  // order so the result is independent of the worker count.
  std::vector<std::vector<double>> inv_norms(items.size());
  std::vector<std::vector<std::uint8_t>> floored(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const InnerRepresentation rep = model.forward(*items[i].signal);
    const double floor = norm_floor_rel * static_cast<double>(rep.frames) *
                         model.output_scale();
    inv_norms[i].resize(channels);
    floored[i].assign(channels, 0);
    for (int j = 0; j < channels; ++j) {
      double norm = l1_norm(rep.row(j));
      if (norm < floor) {
        norm = floor;
        floored[i][j] = 1;
      }
      inv_norms[i][j] = 1.0 / norm;
    }
  });

  std::vector<double> beta_bar(static_cast<std::size_t>(channels) * levels, 0.0);
  std::vector<std::size_t> floored_per_cell(beta_bar.size(), 0);
  std::size_t total_floored = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int l = items[i].level;
    const double inv_count =
        1.0 / static_cast<double>(corpus_by_level[l].size());
    for (int j = 0; j < channels; ++j) {
      beta_bar[static_cast<std::size_t>(j) * levels + l] +=
          inv_norms[i][j] * inv_count;
      if (floored[i][j]) {
        ++floored_per_cell[static_cast<std::size_t>(j) * levels + l];
        ++total_floored;
      }
    }
  }
  for (int j = 0; j < channels; ++j) {
    for (int l = 0; l < levels; ++l) {
      if (floored_per_cell[static_cast<std::size_t>(j) * levels + l] ==
          corpus_by_level[l].size()) {
        throw DegenerateChannel("channel " + std::to_string(j) +
                                " is silent across level " +
                                std::to_string(grid.levels_db[l]));
      }
    }
  }
  if (floored_count != nullptr) *floored_count = total_floored;
  return beta_bar;
}

// beta(j) = (1/|L|) sum over l of beta_bar(j,l) / min_j beta_bar(j,l).
inline std::vector<double> estimate_beta(std::span<const double> beta_bar,
                                         int channels, int levels) {
  detail::require_positive(beta_bar, "beta_bar entries");
  std::vector<double> beta(channels, 0.0);
  for (int l = 0; l < levels; ++l) {
    double col_min = beta_bar[static_cast<std::size_t>(0) * levels + l];
    for (int j = 1; j < channels; ++j) {
      col_min = std::min(col_min, beta_bar[static_cast<std::size_t>(j) * levels + l]);
    }
    double norm_min = std::numeric_limits<double>::infinity();
    for (int j = 0; j < channels; ++j) {
      const double normalized =
          beta_bar[static_cast<std::size_t>(j) * levels + l] / col_min;
      beta[j] += normalized / static_cast<double>(levels);
      norm_min = std::min(norm_min, normalized);
    }
    // The argmin channel divides by itself, so each normalized column
    // must bottom out at exactly one.
    if (norm_min != 1.0) {
      throw NonPositiveEntry("normalized beta_bar column does not attain 1");
    }
  }
  return beta;
}

// alpha(j,l) = J * alpha_bar(j,l) / sum_j alpha_bar(j, l_max) with
// alpha_bar = beta_bar / beta.
inline std::vector<double> estimate_alpha(std::span<const double> beta,
                                          std::span<const double> beta_bar,
                                          int channels, int levels) {
  if (static_cast<int>(beta.size()) != channels ||
      static_cast<int>(beta_bar.size()) != channels * levels) {
    throw ShapeMismatch("beta/beta_bar shapes disagree");
  }
  detail::require_positive(beta, "beta entries");
  detail::require_positive(beta_bar, "beta_bar entries");
  std::vector<double> alpha_bar(beta_bar.size());
  for (int j = 0; j < channels; ++j) {
    for (int l = 0; l < levels; ++l) {
      alpha_bar[static_cast<std::size_t>(j) * levels + l] =
          beta_bar[static_cast<std::size_t>(j) * levels + l] / beta[j];
    }
  }
  double denom = 0.0;
  for (int j = 0; j < channels; ++j) {
    denom += alpha_bar[static_cast<std::size_t>(j) * levels + (levels - 1)];
  }
  std::vector<double> alpha(alpha_bar.size());
  const double scale = static_cast<double>(channels) / denom;
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = alpha_bar[i] * scale;
  return alpha;
}

// Log-domain interpolation of the alpha column for channel j at an
// arbitrary segment level; clamps to the edge columns outside the grid.
// Exact at grid levels.
inline double interp_alpha(const WeightTable& table, int j, double l_star) {
  const auto& levels = table.grid.levels_db;
  const int n = static_cast<int>(levels.size());
  if (!(l_star > levels.front())) return table.alpha_at(j, 0);
  if (!(l_star < levels.back())) return table.alpha_at(j, n - 1);
  int hi = 1;
  while (hi < n && levels[hi] < l_star) ++hi;
  if (levels[hi - 1] == l_star) return table.alpha_at(j, hi - 1);
  if (levels[hi] == l_star) return table.alpha_at(j, hi);
  const double lo_level = levels[hi - 1];
  const double hi_level = levels[hi];
  const double m = (hi_level - l_star) / (hi_level - lo_level);
  const double log_lo = std::log10(table.alpha_at(j, hi - 1));
  const double log_hi = std::log10(table.alpha_at(j, hi));
  return std::pow(10.0, m * log_lo + (1.0 - m) * log_hi);
}

inline void validate(const WeightTable& t) {
  validate(t.grid);
  const int channels = t.channels();
  const int levels = static_cast<int>(t.grid.levels_db.size());
  if (static_cast<int>(t.cfs.size()) != channels ||
      static_cast<int>(t.alpha.size()) != channels * levels) {
    throw ShapeMismatch("weight table shapes disagree");
  }
  detail::require_positive(t.beta, "beta");
  detail::require_positive(t.alpha, "alpha");
  double mean_at_max = 0.0;
  for (int j = 0; j < channels; ++j) {
    mean_at_max += t.alpha_at(j, levels - 1) / channels;
  }
  if (std::abs(mean_at_max - 1.0) > 1e-12) {
    throw NonPositiveEntry("alpha normalization identity violated");
  }
}

// Full estimation pipeline: per-level normalization, forward passes, and
// the beta/alpha constructions.  Deterministic given seed and corpus
// order; the seed only matters when a per-level subset is drawn.
inline WeightTable estimate_weights(const AuditoryModel& model,
                                    const std::vector<Waveform>& corpus,
                                    const LevelGrid& grid, std::uint64_t seed,
                                    WeightEstimationOptions opts = {}) {
  if (corpus.empty()) throw InvalidArgument("corpus is empty");
  validate(grid);
  const int levels = static_cast<int>(grid.levels_db.size());
  std::vector<std::vector<Waveform>> corpus_by_level(levels);
  Rng rng(seed);
  for (int l = 0; l < levels; ++l) {
    std::vector<std::size_t> indices(corpus.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (opts.subset_per_level > 0 &&
        static_cast<std::size_t>(opts.subset_per_level) < corpus.size()) {
      // Seeded partial Fisher-Yates; keep index order for determinism.
      for (int k = 0; k < opts.subset_per_level; ++k) {
        const std::size_t pick =
            k + rng.uniform_int(indices.size() - static_cast<std::size_t>(k));
        std::swap(indices[k], indices[pick]);
      }
      indices.resize(opts.subset_per_level);
      std::sort(indices.begin(), indices.end());
    }
    corpus_by_level[l].reserve(indices.size());
    for (std::size_t idx : indices) {
      corpus_by_level[l].push_back(
          normalize_to_spl(corpus[idx], grid.levels_db[l]));
    }
  }
  const int channels = static_cast<int>(model.cfs().size());
  std::size_t floored = 0;
  const std::vector<double> beta_bar = estimate_beta_bar(
      model, corpus_by_level, grid, opts.norm_floor_rel, opts.workers, &floored);
  if (floored > 0 && std::getenv("FMAE_LAB_LOG") != nullptr) {
    std::fprintf(stderr, "[audemu] weight estimation floored %zu channel norms\n",
                 floored);
  }
  WeightTable table;
  table.grid = grid;
  table.cfs = model.cfs();
  table.beta = estimate_beta(beta_bar, channels, levels);
  table.alpha = estimate_alpha(table.beta, beta_bar, channels, levels);
  table.model_digest = model.digest();
  validate(table);
  return table;
}

// JSON round trip.  nlohmann serializes doubles with shortest-exact
// formatting, so save/load reproduces every entry bit-for-bit.
inline void save_weight_table(const std::string& path, const WeightTable& t) {
  nlohmann::json j = {{"levels", t.grid.levels_db},
                      {"step_db", t.grid.step_db},
                      {"cfs", t.cfs},
                      {"beta", t.beta},
                      {"alpha", t.alpha},
                      {"model_digest", t.model_digest}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weight table: " + path);
  out << j.dump(2) << "\n";
}

inline WeightTable load_weight_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weight table: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError(std::string("cannot parse weight table: ") + e.what());
  }
  WeightTable t;
  t.grid.levels_db = j.at("levels").get<std::vector<double>>();
  t.grid.step_db = j.at("step_db").get<double>();
  t.cfs = j.at("cfs").get<std::vector<double>>();
  t.beta = j.at("beta").get<std::vector<double>>();
  t.alpha = j.at("alpha").get<std::vector<double>>();
  t.model_digest = j.at("model_digest").get<std::uint64_t>();
  validate(t);
  return t;
}

}  // namespace audemu
