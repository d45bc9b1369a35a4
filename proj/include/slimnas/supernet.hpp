#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slimnas/archspace.hpp"
#include "slimnas/container.hpp"
#include "slimnas/dataset.hpp"
#include "slimnas/errors.hpp"
#include "slimnas/rng.hpp"
#include "slimnas/tensor.hpp"

namespace slimnas {

// ---------------------------------------------------------------------------
// Resolved execution plan
// ---------------------------------------------------------------------------

struct ConvPlan {
  int k = 0, stride = 1;
  int cin = 0, cout = 0;
  int h_in = 0, w_in = 0, h_out = 0, w_out = 0;
};

struct NetworkPlan {
  std::vector<ConvPlan> convs;
  int input_c = 0, input_h = 0, input_w = 0;
  int gap_h = 0, gap_w = 0;  // spatial size entering the pool
  int features = 0;          // channels entering the head
  int num_classes = 0;
};

inline NetworkPlan plan_network(const BackboneSkeleton& skeleton, const ArchConfig& config) {
  const std::vector<int> channels = resolve_channels(skeleton, config);
  NetworkPlan plan;
  plan.input_c = skeleton.input_channels;
  plan.input_h = skeleton.input_height;
  plan.input_w = skeleton.input_width;
  plan.num_classes = skeleton.num_classes;
  int cin = skeleton.input_channels;
  int h = skeleton.input_height, w = skeleton.input_width;
  size_t conv_i = 0;
  for (const auto& l : skeleton.layers) {
    if (!is_conv(l.kind)) continue;
    ConvPlan cp;
    cp.k = kernel_size(l.kind);
    cp.stride = l.stride;
    cp.cin = cin;
    cp.cout = channels[conv_i++];
    cp.h_in = h;
    cp.w_in = w;
    cp.h_out = (h + l.stride - 1) / l.stride;
    cp.w_out = (w + l.stride - 1) / l.stride;
    plan.convs.push_back(cp);
    cin = cp.cout;
    h = cp.h_out;
    w = cp.w_out;
  }
  plan.gap_h = h;
  plan.gap_w = w;
  plan.features = cin;
  return plan;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

template <typename T>
struct ConvParamT {
  Tensor4T<T> kernel;  // [max_cout, max_cin, k, k]
  Tensor1T<T> bias;    // [max_cout]
};

// Shared maximal-width parameters; every sub-network is an axis-aligned slice
// of these tensors (slimmable convention: the FIRST c channels).
template <typename T>
struct WeightsT {
  std::vector<ConvParamT<T>> convs;
  Tensor2T<T> head_weight;  // [max_features, num_classes]
  Tensor1T<T> head_bias;    // [num_classes]
  uint64_t skeleton_hash = 0;
};

using SupernetWeights = WeightsT<float>;

namespace detail {

inline constexpr uint64_t kInitStream = 0x696e6974ull;    // weight init draws
inline constexpr uint64_t kTrainStream = 0x747261696eull;  // shuffle + sandwich draws

// TensorFlow-style SAME padding: out = ceil(in / stride), pad split with the
// extra cell at the end.
inline int same_pad_begin(int in, int out, int k, int stride) {
  const int total = std::max((out - 1) * stride + k - in, 0);
  return total / 2;
}

template <typename T, typename U>
WeightsT<U> convert_weights(const WeightsT<T>& src) {
  WeightsT<U> dst;
  dst.skeleton_hash = src.skeleton_hash;
  dst.convs.reserve(src.convs.size());
  for (const auto& cp : src.convs) {
    ConvParamT<U> out;
    out.kernel = Tensor4T<U>(cp.kernel.n, cp.kernel.c, cp.kernel.h, cp.kernel.w);
    for (size_t i = 0; i < cp.kernel.data.size(); ++i) out.kernel.data[i] = static_cast<U>(cp.kernel.data[i]);
    out.bias = Tensor1T<U>(cp.bias.len);
    for (size_t i = 0; i < cp.bias.data.size(); ++i) out.bias.data[i] = static_cast<U>(cp.bias.data[i]);
    dst.convs.push_back(std::move(out));
  }
  dst.head_weight = Tensor2T<U>(src.head_weight.rows, src.head_weight.cols);
  for (size_t i = 0; i < src.head_weight.data.size(); ++i)
    dst.head_weight.data[i] = static_cast<U>(src.head_weight.data[i]);
  dst.head_bias = Tensor1T<U>(src.head_bias.len);
  for (size_t i = 0; i < src.head_bias.data.size(); ++i)
    dst.head_bias.data[i] = static_cast<U>(src.head_bias.data[i]);
  return dst;
}

// ---------------------------------------------------------------------------
// Kernels. Active channel counts come from the plan; the weight tensors may
// be larger (shared supernet) or exactly the active size (materialized net).
// Loop order is fixed, so sliced and materialized runs accumulate in the same
// order and agree bitwise.
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_forward(const Tensor4T<T>& in, const Tensor4T<T>& kernel, const Tensor1T<T>& bias,
                    const ConvPlan& cp, Tensor4T<T>& out) {
  const int pad_h = same_pad_begin(cp.h_in, cp.h_out, cp.k, cp.stride);
  const int pad_w = same_pad_begin(cp.w_in, cp.w_out, cp.k, cp.stride);
  for (int n = 0; n < in.n; ++n)
    for (int co = 0; co < cp.cout; ++co) {
      T* out_plane = &out.at(n, co, 0, 0);
      const T b = bias.at(co);
      for (int i = 0; i < cp.h_out * cp.w_out; ++i) out_plane[i] = b;
      for (int ci = 0; ci < cp.cin; ++ci) {
        const T* in_plane = &in.at(n, ci, 0, 0);
        for (int ky = 0; ky < cp.k; ++ky)
          for (int kx = 0; kx < cp.k; ++kx) {
            const T wgt = kernel.at(co, ci, ky, kx);
            int ho_lo = 0;
            while (ho_lo * cp.stride + ky - pad_h < 0) ++ho_lo;
            int ho_hi = cp.h_out;
            while (ho_hi > ho_lo && (ho_hi - 1) * cp.stride + ky - pad_h >= cp.h_in) --ho_hi;
            int wo_lo = 0;
            while (wo_lo * cp.stride + kx - pad_w < 0) ++wo_lo;
            int wo_hi = cp.w_out;
            while (wo_hi > wo_lo && (wo_hi - 1) * cp.stride + kx - pad_w >= cp.w_in) --wo_hi;
            for (int ho = ho_lo; ho < ho_hi; ++ho) {
              const int hi = ho * cp.stride + ky - pad_h;
              const T* in_row = in_plane + static_cast<size_t>(hi) * cp.w_in + (kx - pad_w);
              T* out_row = out_plane + static_cast<size_t>(ho) * cp.w_out;
              for (int wo = wo_lo; wo < wo_hi; ++wo)
                out_row[wo] += wgt * in_row[static_cast<size_t>(wo) * cp.stride];
            }
          }
      }
    }
}

// Accumulates parameter gradients (+=) so sandwich branches share one buffer;
// writes the input gradient from scratch.
template <typename T>
void conv2d_backward(const Tensor4T<T>& in, const Tensor4T<T>& kernel, const ConvPlan& cp,
                     const Tensor4T<T>& grad_out, Tensor4T<T>& grad_in, Tensor4T<T>& grad_kernel,
                     Tensor1T<T>& grad_bias) {
  const int pad_h = same_pad_begin(cp.h_in, cp.h_out, cp.k, cp.stride);
  const int pad_w = same_pad_begin(cp.w_in, cp.w_out, cp.k, cp.stride);
  std::fill(grad_in.data.begin(), grad_in.data.end(), T(0));
  for (int n = 0; n < in.n; ++n)
    for (int co = 0; co < cp.cout; ++co) {
      const T* g_plane = &grad_out.at(n, co, 0, 0);
      T gb = T(0);
      for (int i = 0; i < cp.h_out * cp.w_out; ++i) gb += g_plane[i];
      grad_bias.at(co) += gb;
      for (int ci = 0; ci < cp.cin; ++ci) {
        const T* in_plane = &in.at(n, ci, 0, 0);
        T* gin_plane = &grad_in.at(n, ci, 0, 0);
        for (int ky = 0; ky < cp.k; ++ky)
          for (int kx = 0; kx < cp.k; ++kx) {
            const T wgt = kernel.at(co, ci, ky, kx);
            T gk = T(0);
            int ho_lo = 0;
            while (ho_lo * cp.stride + ky - pad_h < 0) ++ho_lo;
            int ho_hi = cp.h_out;
            while (ho_hi > ho_lo && (ho_hi - 1) * cp.stride + ky - pad_h >= cp.h_in) --ho_hi;
            int wo_lo = 0;
            while (wo_lo * cp.stride + kx - pad_w < 0) ++wo_lo;
            int wo_hi = cp.w_out;
            while (wo_hi > wo_lo && (wo_hi - 1) * cp.stride + kx - pad_w >= cp.w_in) --wo_hi;
            for (int ho = ho_lo; ho < ho_hi; ++ho) {
              const int hi = ho * cp.stride + ky - pad_h;
              const T* in_row = in_plane + static_cast<size_t>(hi) * cp.w_in + (kx - pad_w);
              T* gin_row = gin_plane + static_cast<size_t>(hi) * cp.w_in + (kx - pad_w);
              const T* g_row = g_plane + static_cast<size_t>(ho) * cp.w_out;
              for (int wo = wo_lo; wo < wo_hi; ++wo) {
                const T g = g_row[wo];
                gk += g * in_row[static_cast<size_t>(wo) * cp.stride];
                gin_row[static_cast<size_t>(wo) * cp.stride] += g * wgt;
              }
            }
            grad_kernel.at(co, ci, ky, kx) += gk;
          }
      }
    }
}

template <typename T>
void relu_inplace(Tensor4T<T>& t) {
  for (auto& x : t.data)
    if (x < T(0)) x = T(0);
}

// Post-activation mask: y = max(0, x) implies y > 0 iff x > 0; at the kink
// the derivative is taken as 0.
template <typename T>
void relu_backward_inplace(Tensor4T<T>& grad, const Tensor4T<T>& post_act) {
  for (size_t i = 0; i < grad.data.size(); ++i)
    if (!(post_act.data[i] > T(0))) grad.data[i] = T(0);
}

template <typename T>
Tensor2T<T> gap_forward(const Tensor4T<T>& in) {
  Tensor2T<T> out(in.n, in.c);
  const T denom = static_cast<T>(in.h) * static_cast<T>(in.w);
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      const T* plane = &in.at(n, c, 0, 0);
      T acc = T(0);
      for (int i = 0; i < in.h * in.w; ++i) acc += plane[i];
      out.at(n, c) = acc / denom;
    }
  return out;
}

template <typename T>
Tensor4T<T> gap_backward(const Tensor2T<T>& grad_out, int h, int w) {
  Tensor4T<T> grad(grad_out.rows, grad_out.cols, h, w);
  const T denom = static_cast<T>(h) * static_cast<T>(w);
  for (int n = 0; n < grad.n; ++n)
    for (int c = 0; c < grad.c; ++c) {
      const T g = grad_out.at(n, c) / denom;
      T* plane = &grad.at(n, c, 0, 0);
      for (int i = 0; i < h * w; ++i) plane[i] = g;
    }
  return grad;
}

// Head over the first `features` rows of the (possibly larger) weight matrix.
template <typename T>
Tensor2T<T> linear_forward(const Tensor2T<T>& feat, const Tensor2T<T>& weight, const Tensor1T<T>& bias,
                           int features, int classes) {
  Tensor2T<T> logits(feat.rows, classes);
  for (int n = 0; n < feat.rows; ++n)
    for (int c = 0; c < classes; ++c) {
      T acc = bias.at(c);
      for (int f = 0; f < features; ++f) acc += feat.at(n, f) * weight.at(f, c);
      logits.at(n, c) = acc;
    }
  return logits;
}

template <typename T>
void linear_backward(const Tensor2T<T>& feat, const Tensor2T<T>& weight, const Tensor2T<T>& grad_logits,
                     int features, int classes, Tensor2T<T>& grad_weight, Tensor1T<T>& grad_bias,
                     Tensor2T<T>& grad_feat) {
  for (int n = 0; n < feat.rows; ++n)
    for (int c = 0; c < classes; ++c) {
      const T g = grad_logits.at(n, c);
      grad_bias.at(c) += g;
      for (int f = 0; f < features; ++f) grad_weight.at(f, c) += g * feat.at(n, f);
    }
  for (int n = 0; n < feat.rows; ++n)
    for (int f = 0; f < features; ++f) {
      T acc = T(0);
      for (int c = 0; c < classes; ++c) acc += grad_logits.at(n, c) * weight.at(f, c);
      grad_feat.at(n, f) = acc;
    }
}

// Mean softmax cross-entropy; loss accumulated in double regardless of T.
template <typename T>
double softmax_xent(const Tensor2T<T>& logits, const std::vector<int>& labels, Tensor2T<T>& grad) {
  const int n = logits.rows, k = logits.cols;
  grad = Tensor2T<T>(n, k);
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    double m = static_cast<double>(logits.at(r, 0));
    for (int c = 1; c < k; ++c) m = std::max(m, static_cast<double>(logits.at(r, c)));
    double denom = 0.0;
    for (int c = 0; c < k; ++c) denom += std::exp(static_cast<double>(logits.at(r, c)) - m);
    const int label = labels[static_cast<size_t>(r)];
    total += std::log(denom) - (static_cast<double>(logits.at(r, label)) - m);
    for (int c = 0; c < k; ++c) {
      const double p = std::exp(static_cast<double>(logits.at(r, c)) - m) / denom;
      grad.at(r, c) = static_cast<T>((p - (c == label ? 1.0 : 0.0)) / n);
    }
  }
  return total / n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward / backward over a whole plan
// ---------------------------------------------------------------------------

template <typename T>
struct ForwardTrace {
  std::vector<Tensor4T<T>> acts;  // acts[0] = input, acts[i+1] = post-ReLU conv i
  Tensor2T<T> features;
  Tensor2T<T> logits;
};

template <typename T>
Tensor2T<T> forward_net(const WeightsT<T>& w, const NetworkPlan& plan, const Tensor4T<T>& batch,
                        ForwardTrace<T>* trace = nullptr) {
  if (batch.c != plan.input_c || batch.h != plan.input_h || batch.w != plan.input_w)
    throw ConfigError("batch shape [" + std::to_string(batch.c) + "," + std::to_string(batch.h) + "," +
                      std::to_string(batch.w) + "] does not match skeleton input");
  if (w.convs.size() != plan.convs.size()) throw ConfigError("weights do not match skeleton conv count");
  Tensor4T<T> cur = batch;
  if (trace) {
    trace->acts.clear();
    trace->acts.push_back(cur);
  }
  for (size_t i = 0; i < plan.convs.size(); ++i) {
    const ConvPlan& cp = plan.convs[i];
    Tensor4T<T> out(batch.n, cp.cout, cp.h_out, cp.w_out);
    detail::conv2d_forward(cur, w.convs[i].kernel, w.convs[i].bias, cp, out);
    detail::relu_inplace(out);
    cur = std::move(out);
    if (trace) trace->acts.push_back(cur);
  }
  Tensor2T<T> feat = detail::gap_forward(cur);
  Tensor2T<T> logits =
      detail::linear_forward(feat, w.head_weight, w.head_bias, plan.features, plan.num_classes);
  if (trace) {
    trace->features = std::move(feat);
    trace->logits = logits;
  }
  return logits;
}

// Runs the sub-network selected by `config` using sliced views of the shared
// weights; weight inheritance is exactly this sliced forward pass.
inline Tensor2 forward(const SupernetWeights& w, const BackboneSkeleton& skeleton,
                       const ArchConfig& config, const Tensor4& batch) {
  return forward_net(w, plan_network(skeleton, config), batch);
}

template <typename T>
void backward_net(const WeightsT<T>& w, const NetworkPlan& plan, const ForwardTrace<T>& trace,
                  const Tensor2T<T>& grad_logits, WeightsT<T>& grads) {
  const int n = trace.logits.rows;
  Tensor2T<T> dfeat(n, plan.features);
  detail::linear_backward(trace.features, w.head_weight, grad_logits, plan.features, plan.num_classes,
                          grads.head_weight, grads.head_bias, dfeat);
  Tensor4T<T> dcur = detail::gap_backward(dfeat, plan.gap_h, plan.gap_w);
  for (size_t i = plan.convs.size(); i > 0; --i) {
    const ConvPlan& cp = plan.convs[i - 1];
    detail::relu_backward_inplace(dcur, trace.acts[i]);
    Tensor4T<T> dprev(n, cp.cin, cp.h_in, cp.w_in);
    detail::conv2d_backward(trace.acts[i - 1], w.convs[i - 1].kernel, cp, dcur, dprev,
                            grads.convs[i - 1].kernel, grads.convs[i - 1].bias);
    dcur = std::move(dprev);
  }
}

// ---------------------------------------------------------------------------
// Initialization, slicing, serialization
// ---------------------------------------------------------------------------

inline SupernetWeights init_weights(const BackboneSkeleton& skeleton, uint64_t seed) {
  skeleton.validate();
  const NetworkPlan plan = plan_network(skeleton, uniform_config(skeleton, 4));
  SupernetWeights w;
  w.skeleton_hash = skeleton.hash();
  Rng rng = Rng::derive(seed, detail::kInitStream);
  for (const auto& cp : plan.convs) {
    ConvParamT<float> p;
    p.kernel = Tensor4(cp.cout, cp.cin, cp.k, cp.k);
    const float bound = static_cast<float>(std::sqrt(6.0 / (static_cast<double>(cp.k) * cp.k * cp.cin)));
    for (auto& x : p.kernel.data) x = rng.uniform_float(-bound, bound);
    p.bias = Tensor1(cp.cout);
    w.convs.push_back(std::move(p));
  }
  w.head_weight = Tensor2(plan.features, plan.num_classes);
  const float bound = static_cast<float>(std::sqrt(6.0 / plan.features));
  for (auto& x : w.head_weight.data) x = rng.uniform_float(-bound, bound);
  w.head_bias = Tensor1(plan.num_classes);
  return w;
}

template <typename T>
WeightsT<T> make_zero_like(const WeightsT<T>& w) {
  WeightsT<T> z;
  z.skeleton_hash = w.skeleton_hash;
  for (const auto& cp : w.convs) {
    ConvParamT<T> p;
    p.kernel = Tensor4T<T>(cp.kernel.n, cp.kernel.c, cp.kernel.h, cp.kernel.w);
    p.bias = Tensor1T<T>(cp.bias.len);
    z.convs.push_back(std::move(p));
  }
  z.head_weight = Tensor2T<T>(w.head_weight.rows, w.head_weight.cols);
  z.head_bias = Tensor1T<T>(w.head_bias.len);
  return z;
}

// The skeleton a candidate becomes when trained standalone: resolved widths,
// nothing searchable.
inline BackboneSkeleton materialize_skeleton(const BackboneSkeleton& skeleton, const ArchConfig& config) {
  const std::vector<int> channels = resolve_channels(skeleton, config);
  BackboneSkeleton out = skeleton;
  size_t conv_i = 0;
  for (auto& l : out.layers) {
    if (!is_conv(l.kind)) continue;
    l.base_out_channels = channels[conv_i++];
    l.searchable = false;
  }
  return out;
}

// Copies the first-channels slice of every shared tensor into a standalone
// parameter set matching materialize_skeleton(skeleton, config).
inline SupernetWeights slice_weights(const SupernetWeights& w, const BackboneSkeleton& skeleton,
                                     const ArchConfig& config) {
  const NetworkPlan plan = plan_network(skeleton, config);
  SupernetWeights out;
  out.skeleton_hash = materialize_skeleton(skeleton, config).hash();
  for (size_t i = 0; i < plan.convs.size(); ++i) {
    const ConvPlan& cp = plan.convs[i];
    ConvParamT<float> p;
    p.kernel = Tensor4(cp.cout, cp.cin, cp.k, cp.k);
    for (int co = 0; co < cp.cout; ++co)
      for (int ci = 0; ci < cp.cin; ++ci)
        for (int ky = 0; ky < cp.k; ++ky)
          for (int kx = 0; kx < cp.k; ++kx)
            p.kernel.at(co, ci, ky, kx) = w.convs[i].kernel.at(co, ci, ky, kx);
    p.bias = Tensor1(cp.cout);
    for (int co = 0; co < cp.cout; ++co) p.bias.at(co) = w.convs[i].bias.at(co);
    out.convs.push_back(std::move(p));
  }
  out.head_weight = Tensor2(plan.features, plan.num_classes);
  for (int f = 0; f < plan.features; ++f)
    for (int c = 0; c < plan.num_classes; ++c) out.head_weight.at(f, c) = w.head_weight.at(f, c);
  out.head_bias = w.head_bias;
  return out;
}

inline void validate_weights(const SupernetWeights& w, const BackboneSkeleton& skeleton) {
  const NetworkPlan plan = plan_network(skeleton, uniform_config(skeleton, 4));
  if (w.skeleton_hash != skeleton.hash())
    throw ConfigError("weights were trained for a different skeleton (hash mismatch: weights " +
                      hash_hex(w.skeleton_hash) + ", skeleton " + hash_hex(skeleton.hash()) + ")");
  if (w.convs.size() != plan.convs.size()) throw IoError("weight file conv count mismatch");
  for (size_t i = 0; i < plan.convs.size(); ++i) {
    const ConvPlan& cp = plan.convs[i];
    const auto& kr = w.convs[i].kernel;
    if (kr.n != cp.cout || kr.c != cp.cin || kr.h != cp.k || kr.w != cp.k ||
        w.convs[i].bias.len != cp.cout)
      throw IoError("weight tensor " + std::to_string(i) + " has unexpected shape");
  }
  if (w.head_weight.rows != plan.features || w.head_weight.cols != plan.num_classes ||
      w.head_bias.len != plan.num_classes)
    throw IoError("head weight shape mismatch");
}

inline void save_weights(const std::string& path, const SupernetWeights& w) {
  Container c;
  c.content_hash = w.skeleton_hash;
  for (const auto& conv : w.convs) {
    c.tensors.push_back({{static_cast<uint32_t>(conv.kernel.n), static_cast<uint32_t>(conv.kernel.c),
                          static_cast<uint32_t>(conv.kernel.h), static_cast<uint32_t>(conv.kernel.w)},
                         conv.kernel.data});
    c.tensors.push_back({{static_cast<uint32_t>(conv.bias.len)}, conv.bias.data});
  }
  c.tensors.push_back(
      {{static_cast<uint32_t>(w.head_weight.rows), static_cast<uint32_t>(w.head_weight.cols)},
       w.head_weight.data});
  c.tensors.push_back({{static_cast<uint32_t>(w.head_bias.len)}, w.head_bias.data});
  write_container_file(path, c);
}

inline SupernetWeights load_weights(const std::string& path) {
  const Container c = read_container_file(path);
  if (c.tensors.size() < 2 || c.tensors.size() % 2 != 0)
    throw IoError("weight container has unexpected tensor count");
  SupernetWeights w;
  w.skeleton_hash = c.content_hash;
  const size_t conv_count = (c.tensors.size() - 2) / 2;
  for (size_t i = 0; i < conv_count; ++i) {
    const TensorBlob& kb = c.tensors[2 * i];
    const TensorBlob& bb = c.tensors[2 * i + 1];
    if (kb.dims.size() != 4 || bb.dims.size() != 1) throw IoError("weight tensor ranks are malformed");
    ConvParamT<float> p;
    p.kernel = Tensor4(static_cast<int>(kb.dims[0]), static_cast<int>(kb.dims[1]),
                       static_cast<int>(kb.dims[2]), static_cast<int>(kb.dims[3]));
    p.kernel.data = kb.data;
    p.bias = Tensor1(static_cast<int>(bb.dims[0]));
    p.bias.data = bb.data;
    w.convs.push_back(std::move(p));
  }
  const TensorBlob& hw = c.tensors[c.tensors.size() - 2];
  const TensorBlob& hb = c.tensors[c.tensors.size() - 1];
  if (hw.dims.size() != 2 || hb.dims.size() != 1) throw IoError("head tensor ranks are malformed");
  w.head_weight = Tensor2(static_cast<int>(hw.dims[0]), static_cast<int>(hw.dims[1]));
  w.head_weight.data = hw.data;
  w.head_bias = Tensor1(static_cast<int>(hb.dims[0]));
  w.head_bias.data = hb.data;
  return w;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  uint64_t seed = 1;

  void validate() const {
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
    if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("train.momentum must be in [0, 1)");
  }
};

struct SgdState {
  WeightsT<float> velocity;
};

inline SgdState make_sgd_state(const SupernetWeights& w) { return SgdState{make_zero_like(w)}; }

namespace detail {

inline void sgd_axpy(std::vector<float>& w, std::vector<float>& v, const std::vector<float>& g,
                     float lr, float mu) {
  for (size_t i = 0; i < w.size(); ++i) {
    v[i] = mu * v[i] + g[i];
    w[i] -= lr * v[i];
  }
}

}  // namespace detail

// v = mu*v + g; w -= lr*v, elementwise over every shared tensor. Gradients
// are zero outside the slices touched this step, so momentum buffers respect
// slicing by construction.
inline void apply_sgd(SupernetWeights& w, SgdState& state, const WeightsT<float>& grads, double lr,
                      double mu) {
  const float flr = static_cast<float>(lr), fmu = static_cast<float>(mu);
  for (size_t i = 0; i < w.convs.size(); ++i) {
    detail::sgd_axpy(w.convs[i].kernel.data, state.velocity.convs[i].kernel.data,
                     grads.convs[i].kernel.data, flr, fmu);
    detail::sgd_axpy(w.convs[i].bias.data, state.velocity.convs[i].bias.data, grads.convs[i].bias.data,
                     flr, fmu);
  }
  detail::sgd_axpy(w.head_weight.data, state.velocity.head_weight.data, grads.head_weight.data, flr, fmu);
  detail::sgd_axpy(w.head_bias.data, state.velocity.head_bias.data, grads.head_bias.data, flr, fmu);
}

namespace detail {

inline void check_labels(const std::vector<int>& labels, int n, int classes) {
  if (static_cast<int>(labels.size()) != n) throw ConfigError("labels do not match batch size");
  for (int l : labels)
    if (l < 0 || l >= classes) throw ConfigError("label out of range");
}

// Forward + loss + backward for one sub-network, accumulating into `grads`.
inline double subnet_loss_backward(const SupernetWeights& w, const BackboneSkeleton& skeleton,
                                   const ArchConfig& config, const Tensor4& batch,
                                   const std::vector<int>& labels, WeightsT<float>& grads) {
  const NetworkPlan plan = plan_network(skeleton, config);
  ForwardTrace<float> trace;
  forward_net(w, plan, batch, &trace);
  Tensor2 grad_logits;
  const double loss = softmax_xent(trace.logits, labels, grad_logits);
  if (!std::isfinite(loss))
    throw TrainingError("non-finite loss for sub-network " + encode(config));
  backward_net(w, plan, trace, grad_logits, grads);
  return loss;
}

}  // namespace detail

struct SandwichReport {
  double loss_largest = 0, loss_smallest = 0, loss_rand_a = 0, loss_rand_b = 0;
  std::string arch_largest, arch_smallest, arch_rand_a, arch_rand_b;

  double total() const { return loss_largest + loss_smallest + loss_rand_a + loss_rand_b; }
};

// One sandwich step with the four sub-networks given explicitly, in the order
// largest, smallest, random, random. All four gradient sets accumulate into
// one buffer; a single SGD-with-momentum update follows.
inline SandwichReport sandwich_step_with_configs(SupernetWeights& w, SgdState& state,
                                                 const BackboneSkeleton& skeleton, const Tensor4& batch,
                                                 const std::vector<int>& labels,
                                                 const std::array<ArchConfig, 4>& configs, double lr,
                                                 double mu) {
  detail::check_labels(labels, batch.n, skeleton.num_classes);
  WeightsT<float> grads = make_zero_like(w);
  SandwichReport report;
  report.loss_largest = detail::subnet_loss_backward(w, skeleton, configs[0], batch, labels, grads);
  report.loss_smallest = detail::subnet_loss_backward(w, skeleton, configs[1], batch, labels, grads);
  report.loss_rand_a = detail::subnet_loss_backward(w, skeleton, configs[2], batch, labels, grads);
  report.loss_rand_b = detail::subnet_loss_backward(w, skeleton, configs[3], batch, labels, grads);
  report.arch_largest = encode(configs[0]);
  report.arch_smallest = encode(configs[1]);
  report.arch_rand_a = encode(configs[2]);
  report.arch_rand_b = encode(configs[3]);
  apply_sgd(w, state, grads, lr, mu);
  return report;
}

// Sandwich rule: the largest, the smallest, and two uniformly sampled
// intermediate sub-networks per step (sampled with replacement).
inline SandwichReport train_step_sandwich(SupernetWeights& w, SgdState& state,
                                          const BackboneSkeleton& skeleton, const Tensor4& batch,
                                          const std::vector<int>& labels, Rng& rng, double lr,
                                          double mu) {
  const ArchConfig rand_a = random_config(skeleton, rng);
  const ArchConfig rand_b = random_config(skeleton, rng);
  return sandwich_step_with_configs(
      w, state, skeleton, batch, labels,
      {uniform_config(skeleton, 4), uniform_config(skeleton, 1), rand_a, rand_b}, lr, mu);
}

// Plain single-network step; used for from-scratch retraining.
inline double train_step_single(SupernetWeights& w, SgdState& state, const BackboneSkeleton& skeleton,
                                const ArchConfig& config, const Tensor4& batch,
                                const std::vector<int>& labels, double lr, double mu) {
  detail::check_labels(labels, batch.n, skeleton.num_classes);
  WeightsT<float> grads = make_zero_like(w);
  const double loss = detail::subnet_loss_backward(w, skeleton, config, batch, labels, grads);
  apply_sgd(w, state, grads, lr, mu);
  return loss;
}

namespace detail {

inline std::pair<Tensor4, std::vector<int>> gather_batch(const LabeledSet& set,
                                                         const std::vector<int>& order, size_t start,
                                                         size_t count) {
  Tensor4 batch(static_cast<int>(count), set.images.c, set.images.h, set.images.w);
  std::vector<int> labels(count);
  const size_t plane = static_cast<size_t>(set.images.c) * set.images.h * set.images.w;
  for (size_t i = 0; i < count; ++i) {
    const int src = order[start + i];
    std::copy_n(set.images.data.begin() + static_cast<size_t>(src) * plane, plane,
                batch.data.begin() + i * plane);
    labels[i] = set.labels[static_cast<size_t>(src)];
  }
  return {std::move(batch), std::move(labels)};
}

}  // namespace detail

struct EpochStats {
  double mean_total = 0, mean_largest = 0, mean_smallest = 0, mean_random = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

// Deterministic sandwich training: one rng stream drives the per-epoch
// shuffle and the per-step sub-network draws, so a fixed seed reproduces the
// weight trajectory bitwise (single-threaded).
inline TrainHistory train_supernet(SupernetWeights& w, const BackboneSkeleton& skeleton,
                                   const LabeledSet& train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.images.n == 0) throw ConfigError("training set is empty");
  Rng rng = Rng::derive(cfg.seed, detail::kTrainStream);
  SgdState state = make_sgd_state(w);
  std::vector<int> order(train.images.n);
  for (int i = 0; i < train.images.n; ++i) order[i] = i;
  TrainHistory history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t count = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
      auto [batch, labels] = detail::gather_batch(train, order, start, count);
      const SandwichReport r =
          train_step_sandwich(w, state, skeleton, batch, labels, rng, cfg.learning_rate, cfg.momentum);
      stats.mean_total += r.total();
      stats.mean_largest += r.loss_largest;
      stats.mean_smallest += r.loss_smallest;
      stats.mean_random += 0.5 * (r.loss_rand_a + r.loss_rand_b);
      ++steps;
    }
    stats.mean_total /= steps;
    stats.mean_largest /= steps;
    stats.mean_smallest /= steps;
    stats.mean_random /= steps;
    history.epochs.push_back(stats);
  }
  return history;
}

// From-scratch training of one materialized architecture.
inline std::vector<double> train_standalone(SupernetWeights& w, const BackboneSkeleton& skeleton,
                                            const LabeledSet& train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.images.n == 0) throw ConfigError("training set is empty");
  if (skeleton.searchable_count() != 0)
    throw ConfigError("standalone training expects a materialized skeleton");
  Rng rng = Rng::derive(cfg.seed, detail::kTrainStream);
  SgdState state = make_sgd_state(w);
  const ArchConfig full;
  std::vector<int> order(train.images.n);
  for (int i = 0; i < train.images.n; ++i) order[i] = i;
  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t count = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
      auto [batch, labels] = detail::gather_batch(train, order, start, count);
      sum += train_step_single(w, state, skeleton, full, batch, labels, cfg.learning_rate, cfg.momentum);
      ++steps;
    }
    epoch_loss.push_back(sum / steps);
  }
  return epoch_loss;
}

// ---------------------------------------------------------------------------
// Gradient checking (double precision replay of the same kernel templates)
// ---------------------------------------------------------------------------

enum class GradCheckKind { Conv3x3, Conv1x1, LinearHead, ReluOffKink };

namespace detail {

inline double rel_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-12});
  return std::fabs(a - b) / denom;
}

// Fills with float-rounded uniform values upcast to double.
inline void fill_f32_upcast(std::vector<double>& v, Rng& rng, float lo, float hi) {
  for (auto& x : v) x = static_cast<double>(rng.uniform_float(lo, hi));
}

inline double conv_gradient_check(int k, uint64_t seed) {
  constexpr double h = 1e-3;
  double max_err = 0.0;
  Rng rng(seed);
  // odd and even spatial sizes hit both same-padding splits
  for (const auto& [size, stride] : {std::pair{5, 1}, {5, 2}, {6, 2}}) {
    ConvPlan cp;
    cp.k = k;
    cp.stride = stride;
    cp.cin = 3;
    cp.cout = 4;
    cp.h_in = size;
    cp.w_in = size;
    cp.h_out = (cp.h_in + stride - 1) / stride;
    cp.w_out = (cp.w_in + stride - 1) / stride;

    Tensor4T<double> in(2, 3, size, size);
    fill_f32_upcast(in.data, rng, -1.f, 1.f);
    // one spare output channel so the sliced path is exercised
    Tensor4T<double> kernel(cp.cout + 1, cp.cin, k, k);
    fill_f32_upcast(kernel.data, rng, -1.f, 1.f);
    Tensor1T<double> bias(cp.cout + 1);
    fill_f32_upcast(bias.data, rng, -0.5f, 0.5f);
    Tensor4T<double> coeff(2, cp.cout, cp.h_out, cp.w_out);
    fill_f32_upcast(coeff.data, rng, -1.f, 1.f);

    const auto loss = [&]() {
      Tensor4T<double> out(2, cp.cout, cp.h_out, cp.w_out);
      conv2d_forward(in, kernel, bias, cp, out);
      double acc = 0;
      for (size_t i = 0; i < out.data.size(); ++i) acc += coeff.data[i] * out.data[i];
      return acc;
    };

    Tensor4T<double> grad_in(2, 3, size, size);
    Tensor4T<double> grad_kernel(cp.cout + 1, cp.cin, k, k);
    Tensor1T<double> grad_bias(cp.cout + 1);
    conv2d_backward(in, kernel, cp, coeff, grad_in, grad_kernel, grad_bias);

    const auto check = [&](std::vector<double>& values, const std::vector<double>& analytic) {
      for (size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss();
        values[i] = saved - h;
        const double down = loss();
        values[i] = saved;
        max_err = std::max(max_err, rel_error(analytic[i], (up - down) / (2 * h)));
      }
    };
    check(kernel.data, grad_kernel.data);
    check(bias.data, grad_bias.data);
    check(in.data, grad_in.data);
  }
  return max_err;
}

inline double linear_gradient_check(uint64_t seed) {
  constexpr double h = 1e-3;
  constexpr int n = 3, f_max = 6, f_active = 5, classes = 4;
  Rng rng(seed);
  Tensor2T<double> feat(n, f_active);
  fill_f32_upcast(feat.data, rng, -1.f, 1.f);
  Tensor2T<double> weight(f_max, classes);
  fill_f32_upcast(weight.data, rng, -1.f, 1.f);
  Tensor1T<double> bias(classes);
  fill_f32_upcast(bias.data, rng, -0.5f, 0.5f);
  Tensor2T<double> coeff(n, classes);
  fill_f32_upcast(coeff.data, rng, -1.f, 1.f);

  const auto loss = [&]() {
    const Tensor2T<double> logits = linear_forward(feat, weight, bias, f_active, classes);
    double acc = 0;
    for (size_t i = 0; i < logits.data.size(); ++i) acc += coeff.data[i] * logits.data[i];
    return acc;
  };

  Tensor2T<double> grad_weight(f_max, classes);
  Tensor1T<double> grad_bias(classes);
  Tensor2T<double> grad_feat(n, f_active);
  linear_backward(feat, weight, coeff, f_active, classes, grad_weight, grad_bias, grad_feat);

  double max_err = 0.0;
  const auto check = [&](std::vector<double>& values, const std::vector<double>& analytic) {
    for (size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss();
      values[i] = saved - h;
      const double down = loss();
      values[i] = saved;
      max_err = std::max(max_err, rel_error(analytic[i], (up - down) / (2 * h)));
    }
  };
  check(weight.data, grad_weight.data);
  check(bias.data, grad_bias.data);
  check(feat.data, grad_feat.data);
  return max_err;
}

inline double relu_gradient_check(uint64_t seed) {
  constexpr double h = 1e-3;
  Rng rng(seed);
  Tensor4T<double> in(2, 3, 4, 4);
  // inputs bounded away from the kink by 0.1 > h
  for (auto& x : in.data) {
    const double mag = static_cast<double>(rng.uniform_float(0.1f, 1.f));
    x = rng.uniform_int(0, 1) == 0 ? mag : -mag;
  }
  Tensor4T<double> coeff(2, 3, 4, 4);
  fill_f32_upcast(coeff.data, rng, -1.f, 1.f);

  const auto loss = [&]() {
    Tensor4T<double> out = in;
    relu_inplace(out);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i) acc += coeff.data[i] * out.data[i];
    return acc;
  };

  Tensor4T<double> out = in;
  relu_inplace(out);
  Tensor4T<double> grad = coeff;
  relu_backward_inplace(grad, out);

  double max_err = 0.0;
  for (size_t i = 0; i < in.data.size(); ++i) {
    const double saved = in.data[i];
    in.data[i] = saved + h;
    const double up = loss();
    in.data[i] = saved - h;
    const double down = loss();
    in.data[i] = saved;
    max_err = std::max(max_err, rel_error(grad.data[i], (up - down) / (2 * h)));
  }
  return max_err;
}

}  // namespace detail

// Max relative error between analytic gradients and central finite
// differences (step 1e-3, float32 values upcast to float64 accumulation)
// over every parameter and input of one small layer instance.
inline double gradient_check(GradCheckKind kind, uint64_t seed) {
  switch (kind) {
    case GradCheckKind::Conv3x3: return detail::conv_gradient_check(3, seed);
    case GradCheckKind::Conv1x1: return detail::conv_gradient_check(1, seed);
    case GradCheckKind::LinearHead: return detail::linear_gradient_check(seed);
    case GradCheckKind::ReluOffKink: return detail::relu_gradient_check(seed);
  }
  return 1.0;
}

}  // namespace slimnas
