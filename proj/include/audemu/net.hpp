// net.hpp: 1D convolutional encoder-decoder emulator networks with
// reverse-mode differentiation and Adam optimization.
//
// Conventions shared by every layer: zero-padded "same"-style alignment,
// no bias terms, double precision throughout.  Strided convolutions pad
// (k - s) / 2 on both sides so the output length is exactly T / s;
// transposed convolutions crop the same amount so lengths double back.
// With these alignments a perturbation of one input sample reaches at
// most RF - 1 output samples, where RF is the encoder receptive field.
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
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "audemu/digest.hpp"
#include "audemu/errors.hpp"
#include "audemu/representation.hpp"
#include "audemu/rng.hpp"

namespace audemu {

enum class LayerKind {
  kStridedConv,     // conv with stride = factor
  kTransposedConv,  // fractionally strided conv, upsamples by factor
  kDecimConv,       // conv (stride 1) then decimate by factor
  kInterpConv,      // conv (stride 1) then linear upsample by factor
  kPlainConv,       // conv, stride 1, no resampling
};

enum class Activation { kTanh, kPRelu, kLinear };

struct LayerSpec {
  LayerKind kind = LayerKind::kPlainConv;
  int kernel = 1;
  int in_ch = 1;
  int out_ch = 1;
  int factor = 1;  // down- or upsampling factor
  Activation activation = Activation::kLinear;
  bool bias = false;  // reserved; all built networks run bias-free
};

struct NetworkSpec {
  std::vector<LayerSpec> encoder;
  bool has_embedding = false;
  LayerSpec embedding;
  std::vector<LayerSpec> decoder;
  LayerSpec projection;
  bool skips = false;
  int out_channels = 0;

  int total_downsample() const {
    int d = 1;
    for (const auto& l : encoder) d *= l.factor;
    return d;
  }

  std::uint64_t digest() const {
    Digest d;
    d.update(std::string_view("netspec-v1"));
    auto add_layer = [&d](const LayerSpec& l) {
      d.update(static_cast<int>(l.kind));
      d.update(l.kernel);
      d.update(l.in_ch);
      d.update(l.out_ch);
      d.update(l.factor);
      d.update(static_cast<int>(l.activation));
      d.update(static_cast<int>(l.bias));
    };
    d.update(static_cast<int>(encoder.size()));
    for (const auto& l : encoder) add_layer(l);
    d.update(static_cast<int>(has_embedding));
    if (has_embedding) add_layer(embedding);
    d.update(static_cast<int>(decoder.size()));
    for (const auto& l : decoder) add_layer(l);
    add_layer(projection);
    d.update(static_cast<int>(skips));
    d.update(out_channels);
    return d.value();
  }
};

inline void validate(const NetworkSpec& s) {
  if (s.encoder.empty() || s.encoder.size() != s.decoder.size()) {
    throw InvalidArgument("encoder and decoder must have equal, nonzero depth");
  }
  int down = 1, up = 1;
  for (const auto& l : s.encoder) down *= l.factor;
  for (const auto& l : s.decoder) up *= l.factor;
  if (down != up) {
    throw InvalidArgument("encoder and decoder resampling factors must match");
  }
  if (s.out_channels < 1) throw InvalidArgument("out_channels must be >= 1");
  auto check_layer = [](const LayerSpec& l) {
    if (l.kernel < 1 || l.factor < 1 || l.in_ch < 1 || l.out_ch < 1) {
      throw InvalidArgument("layer dimensions must be positive");
    }
    if ((l.kind == LayerKind::kStridedConv ||
         l.kind == LayerKind::kTransposedConv) &&
        (l.kernel - l.factor) % 2 != 0) {
      throw InvalidArgument("kernel minus factor must be even for symmetric alignment");
    }
  };
  for (const auto& l : s.encoder) check_layer(l);
  if (s.has_embedding) check_layer(s.embedding);
  for (const auto& l : s.decoder) check_layer(l);
  check_layer(s.projection);
}

// Encoder-side receptive field:
//   RF = sum over encoder blocks of (k_n - 1) * prod of earlier factors, + 1.
inline int receptive_field(const NetworkSpec& spec) {
  long long rf = 1;
  long long stride_product = 1;
  for (const auto& l : spec.encoder) {
    rf += static_cast<long long>(l.kernel - 1) * stride_product;
    stride_product *= l.factor;
  }
  return static_cast<int>(rf);
}

// Strided-convolution encoder-decoder, tanh throughout, and a linear 1x1
// projection onto the output channels.
inline NetworkSpec build_connear_spec(int out_channels, int depth = 16) {
  if (out_channels < 1) throw InvalidArgument("out_channels must be >= 1");
  NetworkSpec s;
  s.out_channels = out_channels;
  s.skips = false;
  for (int i = 0; i < 4; ++i) {
    LayerSpec l;
    l.kind = LayerKind::kStridedConv;
    l.kernel = 64;
    l.factor = 2;
    l.in_ch = i == 0 ? 1 : depth;
    l.out_ch = depth;
    l.activation = Activation::kTanh;
    s.encoder.push_back(l);
  }
  for (int i = 0; i < 4; ++i) {
    LayerSpec l;
    l.kind = LayerKind::kTransposedConv;
    l.kernel = 64;
    l.factor = 2;
    l.in_ch = depth;
    l.out_ch = depth;
    l.activation = Activation::kTanh;
    s.decoder.push_back(l);
  }
  s.projection = {LayerKind::kPlainConv, 1, depth, out_channels, 1,
                  Activation::kLinear, false};
  validate(s);
  return s;
}

// Decimating encoder (tanh), embedding conv, interpolating decoder (PReLU)
// with skip concatenation, and a linear 1x1 projection.
inline NetworkSpec build_waveunet_spec(int out_channels, int depth = 16) {
  if (out_channels < 1) throw InvalidArgument("out_channels must be >= 1");
  NetworkSpec s;
  s.out_channels = out_channels;
  s.skips = true;
  for (int i = 0; i < 6; ++i) {
    LayerSpec l;
    l.kind = LayerKind::kDecimConv;
    l.kernel = 21;
    l.factor = 2;
    l.in_ch = i == 0 ? 1 : depth;
    l.out_ch = depth;
    l.activation = Activation::kTanh;
    s.encoder.push_back(l);
  }
  s.has_embedding = true;
  s.embedding = {LayerKind::kPlainConv, 21, depth, depth, 1,
                 Activation::kTanh, false};
  for (int i = 0; i < 6; ++i) {
    LayerSpec l;
    l.kind = LayerKind::kInterpConv;
    l.kernel = 21;
    l.factor = 2;
    l.in_ch = 2 * depth;  // current features concatenated with the skip
    l.out_ch = depth;
    l.activation = Activation::kPRelu;
    s.decoder.push_back(l);
  }
  s.projection = {LayerKind::kPlainConv, 1, depth, out_channels, 1,
                  Activation::kLinear, false};
  validate(s);
  return s;
}

// Flat list of parameter tensors in spec order: encoder kernels, embedding
// kernel, decoder kernels (each followed by its PReLU slope when the layer
// uses one), projection kernel.
struct ParameterSet {
  std::vector<std::vector<double>> tensors;
  std::uint64_t rng_seed = 0;

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
};

namespace detail {

struct TensorInfo {
  enum class Kind { kKernel, kSlope } kind;
  int out_ch = 0, in_ch = 0, kernel = 0;
  Activation activation = Activation::kLinear;

  std::size_t size() const {
    return kind == Kind::kKernel
               ? static_cast<std::size_t>(out_ch) * in_ch * kernel
               : 1;
  }
};

inline void append_layer_tensors(const LayerSpec& l,
                                 std::vector<TensorInfo>& out) {
  TensorInfo k;
  k.kind = TensorInfo::Kind::kKernel;
  k.out_ch = l.out_ch;
  k.in_ch = l.in_ch;
  k.kernel = l.kernel;
  k.activation = l.activation;
  out.push_back(k);
  if (l.activation == Activation::kPRelu) {
    TensorInfo s;
    s.kind = TensorInfo::Kind::kSlope;
    out.push_back(s);
  }
}

inline std::vector<TensorInfo> tensor_layout(const NetworkSpec& spec) {
  std::vector<TensorInfo> out;
  for (const auto& l : spec.encoder) append_layer_tensors(l, out);
  if (spec.has_embedding) append_layer_tensors(spec.embedding, out);
  for (const auto& l : spec.decoder) append_layer_tensors(l, out);
  append_layer_tensors(spec.projection, out);
  return out;
}

// ---- convolution kernels -------------------------------------------------
// x_pad is the zero-padded input, [in_ch][t_pad]; weights are
// [out_ch][in_ch][kernel]; stride-s outputs read contiguous kernel-length
// slices, so the inner dot products vectorize.

inline void conv_forward(const double* x_pad, int in_ch, int t_pad,
                         const double* w, int out_ch, int kernel, int stride,
                         double* y, int t_out) {
  for (int co = 0; co < out_ch; ++co) {
    double* yrow = y + static_cast<std::size_t>(co) * t_out;
    std::fill(yrow, yrow + t_out, 0.0);
    for (int ci = 0; ci < in_ch; ++ci) {
      const double* wrow = w + (static_cast<std::size_t>(co) * in_ch + ci) * kernel;
      const double* xrow = x_pad + static_cast<std::size_t>(ci) * t_pad;
      for (int t = 0; t < t_out; ++t) {
        const double* xp = xrow + static_cast<std::size_t>(t) * stride;
        double acc = 0.0;
        for (int u = 0; u < kernel; ++u) acc += wrow[u] * xp[u];
        yrow[t] += acc;
      }
    }
  }
}

// Splits a padded row into `stride` phase arrays so strided accesses turn
// into unit-stride ones.  phase p holds x[p], x[p+stride], ...
inline void split_phases(const double* x, int t_pad, int stride,
                         std::vector<std::vector<double>>& phases) {
  phases.assign(stride, {});
  for (int p = 0; p < stride; ++p) {
    auto& ph = phases[p];
    ph.resize((t_pad - p + stride - 1) / stride);
    for (std::size_t i = 0; i < ph.size(); ++i) {
      ph[i] = x[p + static_cast<int>(i) * stride];
    }
  }
}

// dL/dx_pad for conv_forward; accumulates into dx_pad.
inline void conv_backward_input(const double* dy, int out_ch, int t_out,
                                const double* w, int in_ch, int kernel,
                                int stride, double* dx_pad, int t_pad) {
  std::vector<std::vector<double>> phase;
  for (int ci = 0; ci < in_ch; ++ci) {
    phase.assign(stride, {});
    for (int p = 0; p < stride; ++p) {
      phase[p].assign((t_pad - p + stride - 1) / stride, 0.0);
    }
    for (int co = 0; co < out_ch; ++co) {
      const double* wrow = w + (static_cast<std::size_t>(co) * in_ch + ci) * kernel;
      const double* dyrow = dy + static_cast<std::size_t>(co) * t_out;
      for (int u = 0; u < kernel; ++u) {
        const double wv = wrow[u];
        double* dst = phase[u % stride].data() + u / stride;
        for (int t = 0; t < t_out; ++t) dst[t] += wv * dyrow[t];
      }
    }
    double* dxrow = dx_pad + static_cast<std::size_t>(ci) * t_pad;
    for (int p = 0; p < stride; ++p) {
      const auto& ph = phase[p];
      for (std::size_t i = 0; i < ph.size(); ++i) {
        dxrow[p + static_cast<int>(i) * stride] += ph[i];
      }
    }
  }
}

// dL/dw for conv_forward; accumulates into dw.
inline void conv_backward_weights(const double* dy, int out_ch, int t_out,
                                  const double* x_pad, int in_ch, int t_pad,
                                  int kernel, int stride, double* dw) {
  std::vector<std::vector<double>> xph;
  for (int ci = 0; ci < in_ch; ++ci) {
    split_phases(x_pad + static_cast<std::size_t>(ci) * t_pad, t_pad, stride, xph);
    for (int co = 0; co < out_ch; ++co) {
      const double* dyrow = dy + static_cast<std::size_t>(co) * t_out;
      double* dwrow = dw + (static_cast<std::size_t>(co) * in_ch + ci) * kernel;
      for (int u = 0; u < kernel; ++u) {
        const double* xr = xph[u % stride].data() + u / stride;
        double acc = 0.0;
        for (int t = 0; t < t_out; ++t) acc += dyrow[t] * xr[t];
        dwrow[u] += acc;
      }
    }
  }
}

// Transposed convolution into the uncropped buffer of length
// (t_in - 1) * stride + kernel:  y_full[stride*q + u] += w[co][ci][u] * x[ci][q].
inline void tconv_forward_full(const double* x, int in_ch, int t_in,
                               const double* w, int out_ch, int kernel,
                               int stride, double* y_full, int t_full) {
  std::vector<std::vector<double>> phase;
  for (int co = 0; co < out_ch; ++co) {
    phase.assign(stride, {});
    for (int p = 0; p < stride; ++p) {
      phase[p].assign((t_full - p + stride - 1) / stride, 0.0);
    }
    for (int ci = 0; ci < in_ch; ++ci) {
      const double* wrow = w + (static_cast<std::size_t>(co) * in_ch + ci) * kernel;
      const double* xrow = x + static_cast<std::size_t>(ci) * t_in;
      for (int u = 0; u < kernel; ++u) {
        const double wv = wrow[u];
        double* dst = phase[u % stride].data() + u / stride;
        for (int q = 0; q < t_in; ++q) dst[q] += wv * xrow[q];
      }
    }
    double* yrow = y_full + static_cast<std::size_t>(co) * t_full;
    std::fill(yrow, yrow + t_full, 0.0);
    for (int p = 0; p < stride; ++p) {
      const auto& ph = phase[p];
      for (std::size_t i = 0; i < ph.size(); ++i) {
        yrow[p + static_cast<int>(i) * stride] = ph[i];
      }
    }
  }
}

// dL/dx for tconv_forward_full given the gradient on the full buffer.
inline void tconv_backward_input(const double* dy_full, int out_ch, int t_full,
                                 const double* w, int in_ch, int kernel,
                                 int stride, double* dx, int t_in) {
  for (int ci = 0; ci < in_ch; ++ci) {
    double* dxrow = dx + static_cast<std::size_t>(ci) * t_in;
    std::fill(dxrow, dxrow + t_in, 0.0);
    for (int co = 0; co < out_ch; ++co) {
      const double* wrow = w + (static_cast<std::size_t>(co) * in_ch + ci) * kernel;
      const double* dyrow = dy_full + static_cast<std::size_t>(co) * t_full;
      for (int q = 0; q < t_in; ++q) {
        const double* dp = dyrow + static_cast<std::size_t>(q) * stride;
        double acc = 0.0;
        for (int u = 0; u < kernel; ++u) acc += wrow[u] * dp[u];
        dxrow[q] += acc;
      }
    }
  }
}

// dL/dw for tconv_forward_full; accumulates into dw.
inline void tconv_backward_weights(const double* dy_full, int out_ch, int t_full,
                                   const double* x, int in_ch, int t_in,
                                   int kernel, int stride, double* dw) {
  std::vector<std::vector<double>> dyph;
  for (int co = 0; co < out_ch; ++co) {
    split_phases(dy_full + static_cast<std::size_t>(co) * t_full, t_full, stride, dyph);
    for (int ci = 0; ci < in_ch; ++ci) {
      const double* xrow = x + static_cast<std::size_t>(ci) * t_in;
      double* dwrow = dw + (static_cast<std::size_t>(co) * in_ch + ci) * kernel;
      for (int u = 0; u < kernel; ++u) {
        const double* dyr = dyph[u % stride].data() + u / stride;
        double acc = 0.0;
        for (int q = 0; q < t_in; ++q) acc += xrow[q] * dyr[q];
        dwrow[u] += acc;
      }
    }
  }
}

}  // namespace detail

struct AdamState {
  long long step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

inline AdamState make_adam_state(const ParameterSet& params, double lr = 1e-4) {
  if (lr <= 0.0) throw InvalidArgument("learning rate must be positive");
  AdamState s;
  s.lr = lr;
  s.m.reserve(params.tensors.size());
  s.v.reserve(params.tensors.size());
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

// Standard Adam update with bias correction, in place.
inline void adam_step(AdamState& state, ParameterSet& params,
                      const ParameterSet& grads) {
  if (grads.tensors.size() != params.tensors.size() ||
      state.m.size() != params.tensors.size()) {
    throw ShapeMismatch("Adam state/parameter/gradient tensor counts differ");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i];
    const auto& g = grads.tensors[i];
    if (g.size() != p.size()) throw ShapeMismatch("gradient tensor shape differs");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t n = 0; n < p.size(); ++n) {
      m[n] = state.beta1 * m[n] + (1.0 - state.beta1) * g[n];
      v[n] = state.beta2 * v[n] + (1.0 - state.beta2) * g[n] * g[n];
      const double m_hat = m[n] / bc1;
      const double v_hat = v[n] / bc2;
      p[n] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// Fan-in scaled uniform init: kernels ~ U(-a, a) with
// a = gain * sqrt(3 / (in_ch * kernel)); tanh layers use gain 5/3, PReLU
// layers sqrt(2 / (1 + 0.25^2)), linear layers 1.  Slopes start at 0.25.
inline ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  validate(spec);
  ParameterSet params;
  params.rng_seed = seed;
  Rng rng(seed);
  for (const auto& info : detail::tensor_layout(spec)) {
    if (info.kind == detail::TensorInfo::Kind::kSlope) {
      params.tensors.push_back({0.25});
      continue;
    }
    double gain = 1.0;
    if (info.activation == Activation::kTanh) gain = 5.0 / 3.0;
    if (info.activation == Activation::kPRelu) gain = std::sqrt(2.0 / (1.0 + 0.25 * 0.25));
    const double fan_in = static_cast<double>(info.in_ch) * info.kernel;
    const double bound = gain * std::sqrt(3.0 / fan_in);
    std::vector<double> t(info.size());
    for (double& x : t) x = rng.uniform(-bound, bound);
    params.tensors.push_back(std::move(t));
  }
  return params;
}

inline ParameterSet zero_like(const ParameterSet& params) {
  ParameterSet out;
  out.rng_seed = params.rng_seed;
  out.tensors.reserve(params.tensors.size());
  for (const auto& t : params.tensors) out.tensors.emplace_back(t.size(), 0.0);
  return out;
}

// Cached activations of one forward pass, consumed by backward().
struct NetTape {
  struct LayerTrace {
    std::vector<double> input;    // in_ch x t_in (after any concat)
    std::vector<double> pre_act;  // out_ch x t_conv
    std::vector<double> post_act; // out_ch x t_conv
    int t_in = 0, t_conv = 0, t_out = 0;
  };
  std::vector<LayerTrace> traces;
  int input_len = 0;
  std::uint64_t spec_digest = 0;
  bool valid = false;
};

// Executes a NetworkSpec.  One instance is cheap; forward/backward are
// const and reentrant, so distinct threads may share it.
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    layers_ = flatten_layers(spec_);
    layout_ = detail::tensor_layout(spec_);
  }

  const NetworkSpec& spec() const { return spec_; }

  // Input: T samples (single channel).  Output: out_channels x T, row-major.
  std::vector<double> forward(const ParameterSet& params,
                              std::span<const double> input,
                              NetTape* tape = nullptr) const {
    check_params(params);
    const int t_in = static_cast<int>(input.size());
    if (t_in <= 0 || t_in % spec_.total_downsample() != 0) {
      throw BadLength("input length must be a positive multiple of " +
                      std::to_string(spec_.total_downsample()));
    }
    if (tape != nullptr) {
      tape->traces.clear();
      tape->input_len = t_in;
      tape->spec_digest = spec_.digest();
      tape->valid = true;
    }
    std::vector<double> cur(input.begin(), input.end());
    int cur_ch = 1;
    int cur_t = t_in;
    std::vector<std::vector<double>> skip_values;
    std::vector<int> skip_lens;
    int param_index = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const FlatLayer& fl = layers_[i];
      const LayerSpec& l = fl.spec;
      // Decoder layers consume the matching encoder output (LIFO).
      if (spec_.skips && fl.role == Role::kDecoder) {
        cur = concat_channels(cur, cur_ch, skip_values.back(),
                              l.in_ch - cur_ch, cur_t, skip_lens.back());
        cur_ch = l.in_ch;
        skip_values.pop_back();
        skip_lens.pop_back();
      }
      if (cur_ch != l.in_ch) throw ShapeMismatch("layer input channels mismatch");
      NetTape::LayerTrace trace;
      trace.t_in = cur_t;
      if (tape != nullptr) trace.input = cur;

      const auto& w = params.tensors[param_index];
      std::vector<double> conv_out;
      int t_conv = 0;
      if (l.kind == LayerKind::kTransposedConv) {
        const int t_full = (cur_t - 1) * l.factor + l.kernel;
        std::vector<double> full(static_cast<std::size_t>(l.out_ch) * t_full);
        detail::tconv_forward_full(cur.data(), l.in_ch, cur_t, w.data(),
                                   l.out_ch, l.kernel, l.factor, full.data(),
                                   t_full);
        const int crop = (l.kernel - l.factor) / 2;
        t_conv = cur_t * l.factor;
        conv_out.resize(static_cast<std::size_t>(l.out_ch) * t_conv);
        for (int co = 0; co < l.out_ch; ++co) {
          std::memcpy(conv_out.data() + static_cast<std::size_t>(co) * t_conv,
                      full.data() + static_cast<std::size_t>(co) * t_full + crop,
                      sizeof(double) * static_cast<std::size_t>(t_conv));
        }
      } else {
        const int stride = l.kind == LayerKind::kStridedConv ? l.factor : 1;
        const int pad_total = stride == 1 ? l.kernel - 1 : l.kernel - stride;
        const int pad_left = pad_total / 2;
        const int t_pad = cur_t + pad_total;
        t_conv = (cur_t + pad_total - l.kernel) / stride + 1;
        std::vector<double> x_pad(static_cast<std::size_t>(l.in_ch) * t_pad, 0.0);
        for (int ci = 0; ci < l.in_ch; ++ci) {
          std::memcpy(x_pad.data() + static_cast<std::size_t>(ci) * t_pad + pad_left,
                      cur.data() + static_cast<std::size_t>(ci) * cur_t,
                      sizeof(double) * static_cast<std::size_t>(cur_t));
        }
        conv_out.resize(static_cast<std::size_t>(l.out_ch) * t_conv);
        detail::conv_forward(x_pad.data(), l.in_ch, t_pad, w.data(), l.out_ch,
                             l.kernel, stride, conv_out.data(), t_conv);
      }
      ++param_index;
      if (tape != nullptr) trace.pre_act = conv_out;

      double slope = 0.0;
      if (l.activation == Activation::kPRelu) {
        slope = params.tensors[param_index][0];
        ++param_index;
      }
      apply_activation(l.activation, slope, conv_out);
      if (tape != nullptr) trace.post_act = conv_out;
      trace.t_conv = t_conv;

      std::vector<double> out;
      int t_out = t_conv;
      if (l.kind == LayerKind::kDecimConv) {
        t_out = t_conv / l.factor;
        out.resize(static_cast<std::size_t>(l.out_ch) * t_out);
        for (int co = 0; co < l.out_ch; ++co) {
          const double* src = conv_out.data() + static_cast<std::size_t>(co) * t_conv;
          double* dst = out.data() + static_cast<std::size_t>(co) * t_out;
          for (int t = 0; t < t_out; ++t) dst[t] = src[t * l.factor];
        }
      } else if (l.kind == LayerKind::kInterpConv) {
        t_out = t_conv * l.factor;
        out.resize(static_cast<std::size_t>(l.out_ch) * t_out);
        for (int co = 0; co < l.out_ch; ++co) {
          const double* src = conv_out.data() + static_cast<std::size_t>(co) * t_conv;
          double* dst = out.data() + static_cast<std::size_t>(co) * t_out;
          interp_linear(src, t_conv, l.factor, dst);
        }
      } else {
        out = std::move(conv_out);
      }
      trace.t_out = t_out;
      if (tape != nullptr) tape->traces.push_back(std::move(trace));

      if (spec_.skips && fl.role == Role::kEncoder) {
        skip_values.push_back(out);
        skip_lens.push_back(t_out);
      }
      cur = std::move(out);
      cur_ch = l.out_ch;
      cur_t = t_out;
    }
    if (cur_t != t_in || cur_ch != spec_.out_channels) {
      throw ShapeMismatch("network output shape violates the length contract");
    }
    return cur;
  }

  // Gradients w.r.t. every parameter tensor given the upstream gradient on
  // the full-length output (out_channels x input_len).  Accumulates into
  // grads, which must be shaped like the parameters.  input_grad, when
  // non-null, receives dL/dinput.
  void backward(const ParameterSet& params, const NetTape& tape,
                std::span<const double> upstream, ParameterSet* grads,
                std::vector<double>* input_grad = nullptr) const {
    check_params(params);
    if (!tape.valid || tape.spec_digest != spec_.digest()) {
      throw NoForwardCache("backward requires the tape of a matching forward");
    }
    if (grads == nullptr || grads->tensors.size() != params.tensors.size()) {
      throw ShapeMismatch("gradient buffer does not match parameters");
    }
    if (static_cast<int>(upstream.size()) !=
        spec_.out_channels * tape.input_len) {
      throw ShapeMismatch("upstream gradient has the wrong shape");
    }

    // Per-layer output gradients; skip connections add a second consumer.
    std::vector<std::vector<double>> out_grads(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out_grads[i].assign(
          static_cast<std::size_t>(layers_[i].spec.out_ch) * tape.traces[i].t_out,
          0.0);
    }
    out_grads.back().assign(upstream.begin(), upstream.end());

    // Map decoder layers to the encoder layer whose output they consumed.
    std::vector<int> skip_source(layers_.size(), -1);
    if (spec_.skips) {
      std::vector<int> stack;
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].role == Role::kEncoder) stack.push_back(static_cast<int>(i));
        if (layers_[i].role == Role::kDecoder) {
          skip_source[i] = stack.back();
          stack.pop_back();
        }
      }
    }

    int param_index = static_cast<int>(params.tensors.size());
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
      const FlatLayer& fl = layers_[i];
      const LayerSpec& l = fl.spec;
      const NetTape::LayerTrace& trace = tape.traces[i];
      std::vector<double>& grad_out = out_grads[i];

      // Undo the resampling stage.
      std::vector<double> grad_conv;
      if (l.kind == LayerKind::kDecimConv) {
        grad_conv.assign(static_cast<std::size_t>(l.out_ch) * trace.t_conv, 0.0);
        for (int co = 0; co < l.out_ch; ++co) {
          const double* g = grad_out.data() + static_cast<std::size_t>(co) * trace.t_out;
          double* dst = grad_conv.data() + static_cast<std::size_t>(co) * trace.t_conv;
          for (int t = 0; t < trace.t_out; ++t) dst[t * l.factor] = g[t];
        }
      } else if (l.kind == LayerKind::kInterpConv) {
        grad_conv.assign(static_cast<std::size_t>(l.out_ch) * trace.t_conv, 0.0);
        for (int co = 0; co < l.out_ch; ++co) {
          const double* g = grad_out.data() + static_cast<std::size_t>(co) * trace.t_out;
          double* dst = grad_conv.data() + static_cast<std::size_t>(co) * trace.t_conv;
          interp_linear_backward(g, trace.t_conv, l.factor, dst);
        }
      } else {
        grad_conv = std::move(grad_out);
      }

      // Activation backward; PReLU also accumulates its slope gradient.
      double slope = 0.0;
      int slope_index = -1;
      if (l.activation == Activation::kPRelu) {
        slope_index = param_index - 1;
        slope = params.tensors[slope_index][0];
      }
      double slope_grad = 0.0;
      activation_backward(l.activation, slope, trace, grad_conv, &slope_grad);
      if (slope_index >= 0) {
        grads->tensors[slope_index][0] += slope_grad;
        --param_index;
      }
      const int kernel_index = param_index - 1;
      const auto& w = params.tensors[kernel_index];
      --param_index;

      // Convolution backward.
      std::vector<double> grad_in(static_cast<std::size_t>(l.in_ch) * trace.t_in,
                                  0.0);
      if (l.kind == LayerKind::kTransposedConv) {
        const int t_full = (trace.t_in - 1) * l.factor + l.kernel;
        const int crop = (l.kernel - l.factor) / 2;
        std::vector<double> dy_full(static_cast<std::size_t>(l.out_ch) * t_full, 0.0);
        for (int co = 0; co < l.out_ch; ++co) {
          std::memcpy(dy_full.data() + static_cast<std::size_t>(co) * t_full + crop,
                      grad_conv.data() + static_cast<std::size_t>(co) * trace.t_conv,
                      sizeof(double) * static_cast<std::size_t>(trace.t_conv));
        }
        detail::tconv_backward_input(dy_full.data(), l.out_ch, t_full, w.data(),
                                     l.in_ch, l.kernel, l.factor, grad_in.data(),
                                     trace.t_in);
        detail::tconv_backward_weights(dy_full.data(), l.out_ch, t_full,
                                       trace.input.data(), l.in_ch, trace.t_in,
                                       l.kernel, l.factor,
                                       grads->tensors[kernel_index].data());
      } else {
        const int stride = l.kind == LayerKind::kStridedConv ? l.factor : 1;
        const int pad_total = stride == 1 ? l.kernel - 1 : l.kernel - stride;
        const int pad_left = pad_total / 2;
        const int t_pad = trace.t_in + pad_total;
        std::vector<double> x_pad(static_cast<std::size_t>(l.in_ch) * t_pad, 0.0);
        for (int ci = 0; ci < l.in_ch; ++ci) {
          std::memcpy(x_pad.data() + static_cast<std::size_t>(ci) * t_pad + pad_left,
                      trace.input.data() + static_cast<std::size_t>(ci) * trace.t_in,
                      sizeof(double) * static_cast<std::size_t>(trace.t_in));
        }
        std::vector<double> dx_pad(x_pad.size(), 0.0);
        detail::conv_backward_input(grad_conv.data(), l.out_ch, trace.t_conv,
                                    w.data(), l.in_ch, l.kernel, stride,
                                    dx_pad.data(), t_pad);
        detail::conv_backward_weights(grad_conv.data(), l.out_ch, trace.t_conv,
                                      x_pad.data(), l.in_ch, t_pad, l.kernel,
                                      stride,
                                      grads->tensors[kernel_index].data());
        for (int ci = 0; ci < l.in_ch; ++ci) {
          const double* src = dx_pad.data() + static_cast<std::size_t>(ci) * t_pad + pad_left;
          double* dst = grad_in.data() + static_cast<std::size_t>(ci) * trace.t_in;
          for (int t = 0; t < trace.t_in; ++t) dst[t] += src[t];
        }
      }

      // Route the input gradient to the producing layers.
      int main_ch = l.in_ch;
      if (spec_.skips && fl.role == Role::kDecoder) {
        const int src = skip_source[i];
        const int skip_ch = layers_[src].spec.out_ch;
        main_ch = l.in_ch - skip_ch;
        double* dst = out_grads[src].data();
        const double* g = grad_in.data() + static_cast<std::size_t>(main_ch) * trace.t_in;
        for (std::size_t n = 0; n < out_grads[src].size(); ++n) dst[n] += g[n];
      }
      if (i == 0) {
        if (input_grad != nullptr) {
          input_grad->assign(grad_in.begin(),
                             grad_in.begin() + static_cast<std::size_t>(main_ch) * trace.t_in);
        }
      } else {
        double* dst = out_grads[i - 1].data();
        for (std::size_t n = 0;
             n < static_cast<std::size_t>(main_ch) * trace.t_in; ++n) {
          dst[n] += grad_in[n];
        }
      }
    }
  }

 private:
  enum class Role { kEncoder, kEmbedding, kDecoder, kProjection };
  struct FlatLayer {
    LayerSpec spec;
    Role role;
  };

  static std::vector<FlatLayer> flatten_layers(const NetworkSpec& s) {
    std::vector<FlatLayer> out;
    for (const auto& l : s.encoder) out.push_back({l, Role::kEncoder});
    if (s.has_embedding) out.push_back({s.embedding, Role::kEmbedding});
    for (const auto& l : s.decoder) out.push_back({l, Role::kDecoder});
    out.push_back({s.projection, Role::kProjection});
    return out;
  }

  void check_params(const ParameterSet& params) const {
    if (params.tensors.size() != layout_.size()) {
      throw ShapeMismatch("parameter tensor count does not match the spec");
    }
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      if (params.tensors[i].size() != layout_[i].size()) {
        throw ShapeMismatch("parameter tensor " + std::to_string(i) +
                            " has the wrong size");
      }
    }
  }

  static void apply_activation(Activation act, double slope,
                               std::vector<double>& v) {
    switch (act) {
      case Activation::kTanh:
        for (double& x : v) x = std::tanh(x);
        break;
      case Activation::kPRelu:
        for (double& x : v) {
          if (x < 0.0) x *= slope;
        }
        break;
      case Activation::kLinear:
        break;
    }
  }

  static void activation_backward(Activation act, double slope,
                                  const NetTape::LayerTrace& trace,
                                  std::vector<double>& grad, double* slope_grad) {
    switch (act) {
      case Activation::kTanh:
        for (std::size_t n = 0; n < grad.size(); ++n) {
          const double y = trace.post_act[n];
          grad[n] *= 1.0 - y * y;
        }
        break;
      case Activation::kPRelu: {
        double acc = 0.0;
        for (std::size_t n = 0; n < grad.size(); ++n) {
          const double x = trace.pre_act[n];
          if (x < 0.0) {
            acc += grad[n] * x;
            grad[n] *= slope;
          }
        }
        *slope_grad += acc;
        break;
      }
      case Activation::kLinear:
        break;
    }
  }

  // Length-doubling linear interpolation with edge clamping:
  // z[2t] = x[t], z[2t+1] = (x[t] + x[t+1]) / 2, final odd sample repeats
  // the last value.  Generalizes to any factor.
  static void interp_linear(const double* x, int t_in, int factor, double* z) {
    for (int t = 0; t < t_in; ++t) {
      for (int p = 0; p < factor; ++p) {
        const double frac = static_cast<double>(p) / factor;
        const double next = t + 1 < t_in ? x[t + 1] : x[t_in - 1];
        z[t * factor + p] = (1.0 - frac) * x[t] + frac * next;
      }
    }
  }

  static void interp_linear_backward(const double* dz, int t_in, int factor,
                                     double* dx) {
    for (int t = 0; t < t_in; ++t) {
      for (int p = 0; p < factor; ++p) {
        const double frac = static_cast<double>(p) / factor;
        const int next = t + 1 < t_in ? t + 1 : t_in - 1;
        dx[t] += (1.0 - frac) * dz[t * factor + p];
        dx[next] += frac * dz[t * factor + p];
      }
    }
  }

  static std::vector<double> concat_channels(const std::vector<double>& a,
                                             int a_ch,
                                             const std::vector<double>& b,
                                             int b_ch, int t_a, int t_b) {
    if (t_a != t_b) throw ShapeMismatch("skip connection length mismatch");
    std::vector<double> out(static_cast<std::size_t>(a_ch + b_ch) * t_a);
    std::memcpy(out.data(), a.data(), sizeof(double) * a.size());
    std::memcpy(out.data() + a.size(), b.data(), sizeof(double) * b.size());
    return out;
  }

  NetworkSpec spec_;
  std::vector<FlatLayer> layers_;
  std::vector<detail::TensorInfo> layout_;
};

// Spec-level forward that crops the context region: returns
// out_channels x core_len.
inline std::vector<double> forward_core(const Network& net,
                                        const ParameterSet& params,
                                        std::span<const double> segment,
                                        int core_begin, int core_len) {
  const std::vector<double> full = net.forward(params, segment);
  const int t = static_cast<int>(segment.size());
  if (core_begin < 0 || core_begin + core_len > t) {
    throw InvalidArgument("core range exceeds the segment");
  }
  const int channels = net.spec().out_channels;
  std::vector<double> out(static_cast<std::size_t>(channels) * core_len);
  for (int j = 0; j < channels; ++j) {
    std::memcpy(out.data() + static_cast<std::size_t>(j) * core_len,
                full.data() + static_cast<std::size_t>(j) * t + core_begin,
                sizeof(double) * static_cast<std::size_t>(core_len));
  }
  return out;
}

// ---- checkpoints -----------------------------------------------------------
// Binary layout: 8-byte magic, spec digest, seed, step, tensor count, then
// each tensor as (u64 size, raw little-endian doubles) in spec order.

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'E', 'C', 'K', 'P', '0', '1'};

inline void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                            const ParameterSet& params, std::uint64_t step) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  const std::uint64_t digest = spec.digest();
  const std::uint64_t seed = params.rng_seed;
  const std::uint64_t count = params.tensors.size();
  out.write(reinterpret_cast<const char*>(&digest), 8);
  out.write(reinterpret_cast<const char*>(&seed), 8);
  out.write(reinterpret_cast<const char*>(&step), 8);
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& t : params.tensors) {
    const std::uint64_t n = t.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) throw IoError("short write to checkpoint: " + path);
}

struct Checkpoint {
  ParameterSet params;
  std::uint64_t step = 0;
};

inline Checkpoint load_checkpoint(const std::string& path,
                                  const NetworkSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  std::uint64_t digest = 0, seed = 0, step = 0, count = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&digest), 8);
  in.read(reinterpret_cast<char*>(&seed), 8);
  in.read(reinterpret_cast<char*>(&step), 8);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IoError("bad checkpoint header: " + path);
  }
  if (digest != spec.digest()) {
    throw ConfigMismatch("checkpoint was written for a different network spec");
  }
  Checkpoint ck;
  ck.step = step;
  ck.params.rng_seed = seed;
  ck.params.tensors.resize(count);
  for (auto& t : ck.params.tensors) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    t.resize(n);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  return ck;
}

}  // namespace audemu
