// loss.hpp: differentiable training objectives and estimate recovery.
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
#include <vector>

#include "audemu/errors.hpp"
#include "audemu/representation.hpp"
#include "audemu/weights.hpp"

namespace audemu {

// Objective value and its gradient with respect to the prediction.
struct LossValue {
  double value = 0.0;
  std::vector<double> gradient;  // J x T, row-major
  int channels = 0;
  int frames = 0;
};

namespace detail {

inline double sign_or_zero(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

inline void require_table_match(const InnerRepresentation& rep,
                                const WeightTable& table) {
  if (rep.channels != table.channels()) {
    throw ChannelMismatch("weight table channel count does not match");
  }
}

}  // namespace detail

// Mean absolute error over all channels and frames.
inline LossValue mae(const InnerRepresentation& target,
                     const InnerRepresentation& pred) {
  require_same_shape(target, pred);
  LossValue out;
  out.channels = target.channels;
  out.frames = target.frames;
  out.gradient.assign(target.values.size(), 0.0);
  const double inv = 1.0 / (static_cast<double>(target.channels) * target.frames);
  double total = 0.0;
  for (int j = 0; j < target.channels; ++j) {
    const std::size_t off = static_cast<std::size_t>(j) * target.frames;
    double channel_sum = 0.0;
    for (int t = 0; t < target.frames; ++t) {
      const double d = pred.values[off + t] - target.values[off + t];
      channel_sum += std::abs(d);
      out.gradient[off + t] = detail::sign_or_zero(d) * inv;
    }
    total += channel_sum;
  }
  out.value = total * inv;
  return out;
}

// Mean squared error over all channels and frames.
inline LossValue mse(const InnerRepresentation& target,
                     const InnerRepresentation& pred) {
  require_same_shape(target, pred);
  LossValue out;
  out.channels = target.channels;
  out.frames = target.frames;
  out.gradient.assign(target.values.size(), 0.0);
  const double inv = 1.0 / (static_cast<double>(target.channels) * target.frames);
  double total = 0.0;
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    const double d = pred.values[i] - target.values[i];
    total += d * d;
    out.gradient[i] = 2.0 * d * inv;
  }
  out.value = total * inv;
  return out;
}

// Frequency-and-level-weighted mean absolute error.  pred_normalized
// estimates beta_j * f_j(x); each channel's absolute error is weighted by
// the interpolated level factor a_j(l_star).
inline LossValue fmae(const InnerRepresentation& target,
                      const InnerRepresentation& pred_normalized,
                      const WeightTable& table, double l_star) {
  require_same_shape(target, pred_normalized);
  detail::require_table_match(target, table);
  LossValue out;
  out.channels = target.channels;
  out.frames = target.frames;
  out.gradient.assign(target.values.size(), 0.0);
  const double inv = 1.0 / (static_cast<double>(target.channels) * target.frames);
  double total = 0.0;
  for (int j = 0; j < target.channels; ++j) {
    const double beta = table.beta[j];
    const double a_j = interp_alpha(table, j, l_star);
    const std::size_t off = static_cast<std::size_t>(j) * target.frames;
    double channel_sum = 0.0;
    for (int t = 0; t < target.frames; ++t) {
      const double r = pred_normalized.values[off + t] - beta * target.values[off + t];
      channel_sum += std::abs(r);
      out.gradient[off + t] = detail::sign_or_zero(r) * a_j * inv;
    }
    total += channel_sum * a_j;
  }
  out.value = total * inv;
  return out;
}

// Inverts the channel normalization: f_hat = f_bar / beta, per row.
inline InnerRepresentation recover_estimate(
    const InnerRepresentation& pred_normalized, const WeightTable& table) {
  detail::require_table_match(pred_normalized, table);
  InnerRepresentation out = pred_normalized;
  for (int j = 0; j < out.channels; ++j) {
    const double inv_beta = 1.0 / table.beta[j];
    for (double& v : out.row(j)) v *= inv_beta;
  }
  return out;
}

}  // namespace audemu
