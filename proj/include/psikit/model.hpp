#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "rng.hpp"

namespace psikit {

// Pluggable classifier contract. Prediction must be deterministic for a fixed
// parameter state and is safe to call from many threads on an immutable model.
class ClassifierModel {
 public:
  virtual ~ClassifierModel() = default;
  virtual std::vector<float> predict(const GrayImage& img) const = 0;
  virtual int num_classes() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual std::vector<std::uint8_t> save_checkpoint() const {
    throw std::runtime_error("this model does not support checkpoints");
  }
  virtual void load_checkpoint(const std::vector<std::uint8_t>&) {
    throw std::runtime_error("this model does not support checkpoints");
  }
};

enum class Activation { ReLU, TernaryCommit };

inline const char* to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "ternary";
}

class TrainDivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool eval_train = true;  // include a "train" accuracy series in the log
  std::vector<std::pair<std::string, const LabeledDataset*>> eval_splits;
  std::function<void(int epoch, const std::map<std::string, double>&)> epoch_hook;
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::map<std::string, double> split_accuracy;  // includes "train" when enabled
};

inline std::vector<double> softmax(const std::vector<float>& logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (float v : logits) m = std::max(m, static_cast<double>(v));
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Lowest index wins ties.
template <typename V>
inline int argmax_class(const std::vector<V>& scores) {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  return best;
}

// ---------------------------------------------------------------------------
// RefNet: the built-in reference classifier.
//
//   conv(1->16, 3x3) - ReLU - maxpool2 - conv(16->32, 3x3) - ReLU - maxpool2
//   - adaptive maxpool to 5x5 - dense(800->256) - A - dense(256->classes)
//
// where A is ReLU or a ternary commitment to {-1, 0, +1} with a dead zone of
// tau, trained with a straight-through gradient (identity inside [-1,1]).
// The adaptive pool pins the dense fan-in at 800 for any canvas >= 8x8, which
// keeps the parameter count at 209,856 + 257*classes (~212k for 10 classes),
// inside the 500k budget for every supported configuration.
//
// Scalar type is templated: float for training speed, double for the finite
// difference gradient check.
// ---------------------------------------------------------------------------

template <typename T>
class RefNetT : public ClassifierModel {
 public:
  static constexpr int kC1 = 16;
  static constexpr int kC2 = 32;
  static constexpr int kAdapt = 5;
  static constexpr int kFlat = kC2 * kAdapt * kAdapt;  // 800
  static constexpr int kHidden = 256;
  static constexpr std::size_t kParamBudget = 500000;

  RefNetT(int classes, Activation activation = Activation::ReLU, double tau = 0.05,
          std::uint64_t init_seed = 0)
      : classes_(classes), activation_(activation), tau_(tau) {
    if (classes < 2) throw std::invalid_argument("RefNet needs at least 2 classes");
    compute_offsets();
    if (params_.size() > kParamBudget)
      throw std::logic_error("RefNet parameter count " + std::to_string(params_.size()) +
                             " exceeds the 500k budget");
    init_weights(init_seed);
  }

  int num_classes() const override { return classes_; }
  std::size_t param_count() const override { return params_.size(); }
  Activation activation() const { return activation_; }
  double tau() const { return tau_; }

  const std::vector<T>& parameters() const { return params_; }
  void set_parameters(const std::vector<T>& p) {
    if (p.size() != params_.size()) throw std::invalid_argument("parameter size mismatch");
    params_ = p;
  }

  template <typename U>
  void copy_parameters_from(const RefNetT<U>& other) {
    if (other.param_count() != params_.size())
      throw std::invalid_argument("parameter layout mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i)
      params_[i] = static_cast<T>(other.parameters()[i]);
  }

  // Scratch buffers for one forward/backward pass; reusable across samples.
  struct Workspace {
    std::vector<T> input;
    std::vector<T> a1, p1, a2, p2, ap, z1, h1, logits;
    std::vector<int> p1_arg, p2_arg, ap_arg;
    std::vector<T> d_logits, d_h1, d_z1, d_ap, d_p2, d_a2, d_p1, d_a1;
    int ih = 0, iw = 0, h1h = 0, h1w = 0, p1h = 0, p1w = 0, h2h = 0, h2w = 0, p2h = 0, p2w = 0;
  };

  std::vector<float> predict(const GrayImage& img) const override {
    Workspace ws;
    forward(img, ws);
    std::vector<float> out(ws.logits.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(ws.logits[i]);
    return out;
  }

  void forward(const GrayImage& img, Workspace& ws) const {
    if (img.width < 8 || img.height < 8)
      throw std::invalid_argument("RefNet input must be at least 8x8");
    ws.ih = img.height;
    ws.iw = img.width;
    ws.input.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      ws.input[i] = static_cast<T>(img.pixels[i]);

    ws.h1h = ws.ih - 2;
    ws.h1w = ws.iw - 2;
    ws.a1.assign(static_cast<std::size_t>(kC1) * ws.h1h * ws.h1w, T(0));
    conv3x3(ws.input.data(), 1, ws.ih, ws.iw, w(0), w(1), kC1, ws.a1.data());
    relu(ws.a1);

    maxpool2(ws.a1.data(), kC1, ws.h1h, ws.h1w, ws.p1, ws.p1_arg, ws.p1h, ws.p1w);

    ws.h2h = ws.p1h - 2;
    ws.h2w = ws.p1w - 2;
    if (ws.h2h < 1 || ws.h2w < 1) throw std::invalid_argument("RefNet input too small");
    ws.a2.assign(static_cast<std::size_t>(kC2) * ws.h2h * ws.h2w, T(0));
    conv3x3(ws.p1.data(), kC1, ws.p1h, ws.p1w, w(2), w(3), kC2, ws.a2.data());
    relu(ws.a2);

    maxpool2(ws.a2.data(), kC2, ws.h2h, ws.h2w, ws.p2, ws.p2_arg, ws.p2h, ws.p2w);
    adaptive_maxpool(ws.p2.data(), kC2, ws.p2h, ws.p2w, ws.ap, ws.ap_arg);

    dense(ws.ap.data(), kFlat, w(4), w(5), kHidden, ws.z1);
    ws.h1.resize(kHidden);
    if (activation_ == Activation::ReLU) {
      for (int j = 0; j < kHidden; ++j) ws.h1[j] = ws.z1[j] > T(0) ? ws.z1[j] : T(0);
    } else {
      const T t = static_cast<T>(tau_);
      for (int j = 0; j < kHidden; ++j)
        ws.h1[j] = ws.z1[j] > t ? T(1) : (ws.z1[j] < -t ? T(-1) : T(0));
    }
    dense(ws.h1.data(), kHidden, w(6), w(7), classes_, ws.logits);
  }

  // Softmax cross-entropy loss and parameter gradients for one sample.
  // Gradients are accumulated into `grad` (flat, same layout as parameters).
  double backward(Workspace& ws, int label, std::vector<T>& grad) const {
    const int C = classes_;
    // softmax + loss
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) m = std::max(m, static_cast<double>(ws.logits[c]));
    double sum = 0.0;
    ws.d_logits.resize(C);
    for (int c = 0; c < C; ++c) {
      const double e = std::exp(static_cast<double>(ws.logits[c]) - m);
      ws.d_logits[c] = static_cast<T>(e);
      sum += e;
    }
    const double loss = std::log(sum) - (static_cast<double>(ws.logits[label]) - m);
    for (int c = 0; c < C; ++c) {
      ws.d_logits[c] = static_cast<T>(static_cast<double>(ws.d_logits[c]) / sum);
      if (c == label) ws.d_logits[c] -= T(1);
    }

    // fc2
    T* gw2 = grad.data() + off_[6];
    T* gb2 = grad.data() + off_[7];
    ws.d_h1.assign(kHidden, T(0));
    for (int c = 0; c < C; ++c) {
      const T d = ws.d_logits[c];
      axpy(d, ws.h1.data(), gw2 + static_cast<std::size_t>(c) * kHidden, kHidden);
      axpy(d, w(6) + static_cast<std::size_t>(c) * kHidden, ws.d_h1.data(), kHidden);
      gb2[c] += d;
    }

    // activation (straight-through for ternary: identity inside [-1, 1])
    ws.d_z1.resize(kHidden);
    if (activation_ == Activation::ReLU) {
      for (int j = 0; j < kHidden; ++j) ws.d_z1[j] = ws.z1[j] > T(0) ? ws.d_h1[j] : T(0);
    } else {
      for (int j = 0; j < kHidden; ++j)
        ws.d_z1[j] = (ws.z1[j] >= T(-1) && ws.z1[j] <= T(1)) ? ws.d_h1[j] : T(0);
    }

    // fc1
    T* gw1f = grad.data() + off_[4];
    T* gb1f = grad.data() + off_[5];
    ws.d_ap.assign(kFlat, T(0));
    for (int j = 0; j < kHidden; ++j) {
      const T d = ws.d_z1[j];
      if (d == T(0)) continue;
      axpy(d, ws.ap.data(), gw1f + static_cast<std::size_t>(j) * kFlat, kFlat);
      axpy(d, w(4) + static_cast<std::size_t>(j) * kFlat, ws.d_ap.data(), kFlat);
      gb1f[j] += d;
    }

    // adaptive pool -> p2
    ws.d_p2.assign(ws.p2.size(), T(0));
    for (std::size_t i = 0; i < ws.ap_arg.size(); ++i) ws.d_p2[ws.ap_arg[i]] += ws.d_ap[i];

    // pool2 -> a2 (relu mask folded in: a2 holds post-relu values)
    ws.d_a2.assign(ws.a2.size(), T(0));
    for (std::size_t i = 0; i < ws.p2_arg.size(); ++i) ws.d_a2[ws.p2_arg[i]] += ws.d_p2[i];
    for (std::size_t i = 0; i < ws.a2.size(); ++i)
      if (ws.a2[i] <= T(0)) ws.d_a2[i] = T(0);

    // conv2
    ws.d_p1.assign(ws.p1.size(), T(0));
    conv3x3_backward(ws.p1.data(), kC1, ws.p1h, ws.p1w, w(2), kC2, ws.d_a2.data(), ws.h2h,
                     ws.h2w, grad.data() + off_[2], grad.data() + off_[3], ws.d_p1.data());

    // pool1 -> a1 with relu mask
    ws.d_a1.assign(ws.a1.size(), T(0));
    for (std::size_t i = 0; i < ws.p1_arg.size(); ++i) ws.d_a1[ws.p1_arg[i]] += ws.d_p1[i];
    for (std::size_t i = 0; i < ws.a1.size(); ++i)
      if (ws.a1[i] <= T(0)) ws.d_a1[i] = T(0);

    // conv1 (no input gradient needed)
    conv3x3_backward(ws.input.data(), 1, ws.ih, ws.iw, w(0), kC1, ws.d_a1.data(), ws.h1h, ws.h1w,
                     grad.data() + off_[0], grad.data() + off_[1], nullptr);

    return loss;
  }

  double sample_loss(const GrayImage& img, int label, Workspace& ws) const {
    forward(img, ws);
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes_; ++c) m = std::max(m, static_cast<double>(ws.logits[c]));
    double sum = 0.0;
    for (int c = 0; c < classes_; ++c)
      sum += std::exp(static_cast<double>(ws.logits[c]) - m);
    return std::log(sum) - (static_cast<double>(ws.logits[label]) - m);
  }

  // SGD with momentum on an averaged gradient.
  void apply_gradient(const std::vector<T>& grad, double lr, double momentum) {
    if (vel_.size() != params_.size()) vel_.assign(params_.size(), T(0));
    const T mu = static_cast<T>(momentum);
    const T step = static_cast<T>(lr);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      vel_[i] = mu * vel_[i] + grad[i];
      params_[i] -= step * vel_[i];
    }
  }

  void reset_momentum() { vel_.assign(params_.size(), T(0)); }

  // ------------------------------------------------------------------
  // Checkpoints: "EIDC", version u16 LE, layer count u16 LE, then per tensor
  // rank u8 + dims u32 LE + raw f32 LE weights, and a trailing CRC32 of all
  // preceding bytes.
  // ------------------------------------------------------------------

  std::vector<std::uint8_t> save_checkpoint() const override {
    ByteWriter out;
    out.raw("EIDC", 4);
    out.u16_le(1);  // version
    out.u16_le(static_cast<std::uint16_t>(kTensorCount));
    for (int t = 0; t < kTensorCount; ++t) {
      const auto dims = tensor_dims(t);
      out.u8(static_cast<std::uint8_t>(dims.size()));
      for (std::uint32_t d : dims) out.u32_le(d);
      const T* p = params_.data() + off_[t];
      const std::size_t n = tensor_size(t);
      for (std::size_t i = 0; i < n; ++i) out.f32_le(static_cast<float>(p[i]));
    }
    out.u32_le(crc32(out.bytes.data(), out.bytes.size()));
    return std::move(out.bytes);
  }

  void load_checkpoint(const std::vector<std::uint8_t>& bytes) override {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "EIDC", 4) != 0)
      throw FormatError("not a checkpoint: bad magic");
    // Structure first (truncation reads as "unexpected end of checkpoint"),
    // CRC last.
    ByteReader r(bytes.data(), bytes.size() >= 4 ? bytes.size() - 4 : bytes.size());
    r.take(4, "checkpoint");  // magic
    const std::uint16_t version = r.u16_le("checkpoint");
    if (version != 1)
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const std::uint16_t layers = r.u16_le("checkpoint");
    if (layers != kTensorCount)
      throw FormatError("checkpoint layer count " + std::to_string(layers) + ", expected " +
                        std::to_string(kTensorCount));
    std::vector<T> fresh(params_.size());
    for (int t = 0; t < kTensorCount; ++t) {
      const auto want = tensor_dims(t);
      const std::uint8_t rank = r.u8("checkpoint");
      if (rank != want.size())
        throw FormatError("checkpoint tensor " + std::to_string(t) + ": rank " +
                          std::to_string(rank) + ", expected " + std::to_string(want.size()));
      for (std::size_t d = 0; d < want.size(); ++d) {
        const std::uint32_t dim = r.u32_le("checkpoint");
        if (dim != want[d])
          throw FormatError("checkpoint tensor " + std::to_string(t) + ": dim " +
                            std::to_string(dim) + ", expected " + std::to_string(want[d]));
      }
      T* p = fresh.data() + off_[t];
      const std::size_t n = tensor_size(t);
      for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<T>(r.f32_le("checkpoint"));
    }
    if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
    const std::uint32_t stored_crc = std::uint32_t(bytes[bytes.size() - 4]) |
                                     (std::uint32_t(bytes[bytes.size() - 3]) << 8) |
                                     (std::uint32_t(bytes[bytes.size() - 2]) << 16) |
                                     (std::uint32_t(bytes[bytes.size() - 1]) << 24);
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
      throw FormatError("checkpoint CRC mismatch");
    params_ = std::move(fresh);
    vel_.clear();
  }

  // Reads the class count out of the fc2 tensor header so a checkpoint can be
  // opened without knowing its configuration. The activation is not part of
  // the format and must be supplied by the caller.
  static RefNetT from_checkpoint(const std::vector<std::uint8_t>& bytes,
                                 Activation activation = Activation::ReLU, double tau = 0.05) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "EIDC", 4) != 0)
      throw FormatError("not a checkpoint: bad magic");
    ByteReader r(bytes.data(), bytes.size());
    r.take(4, "checkpoint");
    r.u16_le("checkpoint");
    const std::uint16_t layers = r.u16_le("checkpoint");
    if (layers != kTensorCount)
      throw FormatError("checkpoint layer count " + std::to_string(layers) + ", expected " +
                        std::to_string(kTensorCount));
    int classes = 0;
    for (int t = 0; t < kTensorCount; ++t) {
      const std::uint8_t rank = r.u8("checkpoint");
      std::uint64_t n = 1;
      std::uint32_t first = 0;
      for (int d = 0; d < rank; ++d) {
        const std::uint32_t dim = r.u32_le("checkpoint");
        if (d == 0) first = dim;
        n *= dim;
      }
      if (n > (1u << 26)) throw FormatError("checkpoint tensor implausibly large");
      if (t == 6) classes = static_cast<int>(first);
      r.take(n * 4, "checkpoint");
    }
    RefNetT model(classes, activation, tau, 0);
    model.load_checkpoint(bytes);
    return model;
  }

 private:
  static constexpr int kTensorCount = 8;

  void compute_offsets() {
    off_.resize(kTensorCount + 1);
    off_[0] = 0;
    for (int t = 0; t < kTensorCount; ++t) off_[t + 1] = off_[t] + tensor_size(t);
    params_.assign(off_[kTensorCount], T(0));
  }

  std::vector<std::uint32_t> tensor_dims(int t) const {
    switch (t) {
      case 0: return {kC1, 1, 3, 3};
      case 1: return {kC1};
      case 2: return {kC2, kC1, 3, 3};
      case 3: return {kC2};
      case 4: return {kHidden, kFlat};
      case 5: return {kHidden};
      case 6: return {static_cast<std::uint32_t>(classes_), kHidden};
      case 7: return {static_cast<std::uint32_t>(classes_)};
    }
    throw std::logic_error("bad tensor index");
  }

  std::size_t tensor_size(int t) const {
    std::size_t n = 1;
    for (std::uint32_t d : tensor_dims(t)) n *= d;
    return n;
  }

  const T* w(int t) const { return params_.data() + off_[t]; }

  void init_weights(std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x52656665724e6574ull));
    const int fan_in[kTensorCount] = {9, 0, kC1 * 9, 0, kFlat, 0, kHidden, 0};
    for (int t = 0; t < kTensorCount; ++t) {
      T* p = params_.data() + off_[t];
      const std::size_t n = tensor_size(t);
      if (fan_in[t] == 0) {
        for (std::size_t i = 0; i < n; ++i) p[i] = T(0);
      } else {
        const double limit = std::sqrt(6.0 / fan_in[t]);
        for (std::size_t i = 0; i < n; ++i)
          p[i] = static_cast<T>(rng.next_range(-limit, limit));
      }
    }
  }

  static void relu(std::vector<T>& v) {
    for (T& x : v)
      if (x < T(0)) x = T(0);
  }

  // Eight-lane dot product. The lane structure fixes the summation order in
  // source (so results are bit-stable) while letting the compiler vectorize a
  // float reduction it would otherwise have to keep scalar.
  static T dot_lanes(const T* __restrict a, const T* __restrict b, int n) {
    T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8)
      for (int j = 0; j < 8; ++j) lanes[j] += a[i + j] * b[i + j];
    T s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
          ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
  }

  static T sum_lanes(const T* __restrict a, int n) {
    T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8)
      for (int j = 0; j < 8; ++j) lanes[j] += a[i + j];
    T s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
          ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; i < n; ++i) s += a[i];
    return s;
  }

  // y += alpha * x
  static void axpy(T alpha, const T* __restrict x, T* __restrict y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
  }

  // Valid 3x3 convolution, NCHW single sample.
  static void conv3x3(const T* in, int ic, int ih, int iw, const T* weights, const T* bias,
                      int oc, T* out) {
    const int oh = ih - 2, ow = iw - 2;
    for (int o = 0; o < oc; ++o) {
      T* oplane = out + static_cast<std::size_t>(o) * oh * ow;
      const T b = bias[o];
      for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) oplane[i] = b;
      for (int c = 0; c < ic; ++c) {
        const T* w9 = weights + (static_cast<std::size_t>(o) * ic + c) * 9;
        const T* iplane = in + static_cast<std::size_t>(c) * ih * iw;
        for (int oy = 0; oy < oh; ++oy) {
          T* __restrict orow = oplane + static_cast<std::size_t>(oy) * ow;
          for (int ky = 0; ky < 3; ++ky) {
            const T* __restrict irow = iplane + static_cast<std::size_t>(oy + ky) * iw;
            const T w0 = w9[ky * 3], w1 = w9[ky * 3 + 1], w2 = w9[ky * 3 + 2];
            for (int ox = 0; ox < ow; ++ox)
              orow[ox] += w0 * irow[ox] + w1 * irow[ox + 1] + w2 * irow[ox + 2];
          }
        }
      }
    }
  }

  // Gradients of the valid 3x3 convolution. d_out is already masked by the
  // downstream ReLU. d_in may be null when the input gradient is not needed.
  static void conv3x3_backward(const T* in, int ic, int ih, int iw, const T* weights, int oc,
                               const T* d_out, int oh, int ow, T* g_weights, T* g_bias,
                               T* d_in) {
    for (int o = 0; o < oc; ++o) {
      const T* dplane = d_out + static_cast<std::size_t>(o) * oh * ow;
      g_bias[o] += sum_lanes(dplane, oh * ow);
      for (int c = 0; c < ic; ++c) {
        const T* iplane = in + static_cast<std::size_t>(c) * ih * iw;
        const T* w9 = weights + (static_cast<std::size_t>(o) * ic + c) * 9;
        T* g9 = g_weights + (static_cast<std::size_t>(o) * ic + c) * 9;
        T* dip = d_in ? d_in + static_cast<std::size_t>(c) * ih * iw : nullptr;
        for (int oy = 0; oy < oh; ++oy) {
          const T* drow = dplane + static_cast<std::size_t>(oy) * ow;
          for (int ky = 0; ky < 3; ++ky) {
            const T* irow = iplane + static_cast<std::size_t>(oy + ky) * iw;
            for (int kx = 0; kx < 3; ++kx)
              g9[ky * 3 + kx] += dot_lanes(drow, irow + kx, ow);
            if (dip) {
              T* __restrict dirow = dip + static_cast<std::size_t>(oy + ky) * iw;
              const T w0 = w9[ky * 3], w1 = w9[ky * 3 + 1], w2 = w9[ky * 3 + 2];
              for (int ox = 0; ox < ow; ++ox) {
                const T d = drow[ox];
                dirow[ox] += w0 * d;
                dirow[ox + 1] += w1 * d;
                dirow[ox + 2] += w2 * d;
              }
            }
          }
        }
      }
    }
  }

  // 2x2 stride-2 max pool (floor halving, minimum output 1) with argmax
  // bookkeeping for the backward pass.
  static void maxpool2(const T* in, int ch, int ih, int iw, std::vector<T>& out,
                       std::vector<int>& arg, int& oh, int& ow) {
    oh = std::max(1, ih / 2);
    ow = std::max(1, iw / 2);
    out.resize(static_cast<std::size_t>(ch) * oh * ow);
    arg.resize(out.size());
    std::size_t idx = 0;
    for (int c = 0; c < ch; ++c) {
      const T* plane = in + static_cast<std::size_t>(c) * ih * iw;
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = oy * 2, y1 = std::min(y0 + 2, ih);
        for (int ox = 0; ox < ow; ++ox, ++idx) {
          const int x0 = ox * 2, x1 = std::min(x0 + 2, iw);
          T best = plane[static_cast<std::size_t>(y0) * iw + x0];
          int besti = y0 * iw + x0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              const T v = plane[static_cast<std::size_t>(y) * iw + x];
              if (v > best) {
                best = v;
                besti = y * iw + x;
              }
            }
          out[idx] = best;
          arg[idx] = c * ih * iw + besti;
        }
      }
    }
  }

  // Max pool onto a fixed kAdapt x kAdapt grid; bins repeat when the input is
  // smaller than the grid, so the flattened size is canvas-independent.
  static void adaptive_maxpool(const T* in, int ch, int ih, int iw, std::vector<T>& out,
                               std::vector<int>& arg) {
    out.resize(static_cast<std::size_t>(ch) * kAdapt * kAdapt);
    arg.resize(out.size());
    std::size_t idx = 0;
    for (int c = 0; c < ch; ++c) {
      const T* plane = in + static_cast<std::size_t>(c) * ih * iw;
      for (int oy = 0; oy < kAdapt; ++oy) {
        const int y0 = oy * ih / kAdapt;
        const int y1 = std::min(ih, std::max(y0 + 1, ((oy + 1) * ih + kAdapt - 1) / kAdapt));
        for (int ox = 0; ox < kAdapt; ++ox, ++idx) {
          const int x0 = ox * iw / kAdapt;
          const int x1 = std::min(iw, std::max(x0 + 1, ((ox + 1) * iw + kAdapt - 1) / kAdapt));
          T best = plane[static_cast<std::size_t>(y0) * iw + x0];
          int besti = y0 * iw + x0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              const T v = plane[static_cast<std::size_t>(y) * iw + x];
              if (v > best) {
                best = v;
                besti = y * iw + x;
              }
            }
          out[idx] = best;
          arg[idx] = c * ih * iw + besti;
        }
      }
    }
  }

  static void dense(const T* in, int n_in, const T* weights, const T* bias, int n_out,
                    std::vector<T>& out) {
    out.resize(n_out);
    for (int j = 0; j < n_out; ++j)
      out[j] = bias[j] + dot_lanes(weights + static_cast<std::size_t>(j) * n_in, in, n_in);
  }

  int classes_;
  Activation activation_;
  double tau_;
  std::vector<std::size_t> off_;
  std::vector<T> params_;
  std::vector<T> vel_;
};

using RefNet = RefNetT<float>;

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  int total = 0;
};

inline EvalResult evaluate(const ClassifierModel& model, const LabeledDataset& data,
                           unsigned threads = 1) {
  if (data.images.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  const int classes = model.num_classes();
  for (int l : data.labels)
    if (l < 0 || l >= classes)
      throw std::invalid_argument("evaluate: label " + std::to_string(l) +
                                  " outside the model's " + std::to_string(classes) +
                                  " classes");
  std::vector<int> predicted(data.images.size());
  parallel_for(data.images.size(), threads,
               [&](std::size_t i) { predicted[i] = argmax_class(model.predict(data.images[i])); });

  EvalResult r;
  r.total = static_cast<int>(data.images.size());
  r.confusion.assign(classes, std::vector<int>(classes, 0));
  int correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    r.confusion[data.labels[i]][predicted[i]]++;
    if (predicted[i] == data.labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / r.total;
  r.per_class_accuracy.assign(classes, 0.0);
  for (int c = 0; c < classes; ++c) {
    int row = 0;
    for (int p = 0; p < classes; ++p) row += r.confusion[c][p];
    if (row > 0) r.per_class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / row;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

template <typename T>
std::vector<EpochMetrics> train(RefNetT<T>& model, const LabeledDataset& data,
                                const TrainConfig& cfg) {
  data.validate();
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  for (int l : data.labels)
    if (l < 0 || l >= model.num_classes())
      throw std::invalid_argument("training label outside the model's class count");

  const std::size_t n = data.images.size();
  const int batch = std::min<std::size_t>(cfg.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // Per-sample gradient slots; summed in index order afterwards so the result
  // does not depend on the thread count.
  std::vector<std::vector<T>> slot_grads(batch, std::vector<T>(model.param_count(), T(0)));
  std::vector<double> slot_loss(batch, 0.0);
  const unsigned workers = std::max(1u, cfg.threads);
  std::vector<typename RefNetT<T>::Workspace> ws(workers);
  std::vector<T> grad(model.param_count());
  std::vector<EpochMetrics> log;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // deterministic shuffle
    Rng shuffle_rng(splitmix64(cfg.seed + 0x9e3779b97f4a7c15ull * epoch));
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.next_below(static_cast<std::uint32_t>(i + 1));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
      const std::size_t count = std::min<std::size_t>(batch, n - start);
      parallel_for_workers(count, cfg.threads, [&](std::size_t k, unsigned worker) {
        const std::size_t idx = order[start + k];
        std::fill(slot_grads[k].begin(), slot_grads[k].end(), T(0));
        model.forward(data.images[idx], ws[worker]);
        slot_loss[k] = model.backward(ws[worker], data.labels[idx], slot_grads[k]);
      });
      std::fill(grad.begin(), grad.end(), T(0));
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        batch_loss += slot_loss[k];
        const std::vector<T>& g = slot_grads[k];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
      }
      const T inv = static_cast<T>(1.0 / static_cast<double>(count));
      for (T& g : grad) g *= inv;
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss))
        throw TrainDivergenceError("divergence: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
      model.apply_gradient(grad, cfg.learning_rate, cfg.momentum);
      loss_sum += batch_loss * static_cast<double>(count);
      seen += count;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = loss_sum / static_cast<double>(seen);
    if (cfg.eval_train)
      m.split_accuracy["train"] = evaluate(model, data, cfg.threads).accuracy;
    for (const auto& [name, split] : cfg.eval_splits)
      m.split_accuracy[name] = evaluate(model, *split, cfg.threads).accuracy;
    if (cfg.epoch_hook) cfg.epoch_hook(epoch, m.split_accuracy);
    log.push_back(std::move(m));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Gradient check: central finite differences against the analytic gradients,
// run in double precision on a copy of the model. Quantization must be off.
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  int params_checked = 0;
};

inline GradCheckResult gradient_check(const RefNet& model, const GrayImage& img, int label,
                                      double epsilon, int n_params = 120,
                                      std::uint64_t pick_seed = 0x67726164) {
  if (model.activation() != Activation::ReLU)
    throw std::invalid_argument("gradient_check requires the ReLU activation");
  if (!(epsilon >= 1e-5 && epsilon <= 1e-3))
    throw std::invalid_argument("epsilon must be in [1e-5, 1e-3]");

  RefNetT<double> dm(model.num_classes(), Activation::ReLU, model.tau(), 0);
  dm.copy_parameters_from(model);

  RefNetT<double>::Workspace ws;
  std::vector<double> analytic(dm.param_count(), 0.0);
  dm.forward(img, ws);
  dm.backward(ws, label, analytic);

  std::vector<double> params = dm.parameters();
  Rng rng(pick_seed);
  GradCheckResult res;
  res.params_checked = n_params;
  for (int k = 0; k < n_params; ++k) {
    const std::size_t i = rng.next_u64() % params.size();
    const double saved = params[i];
    params[i] = saved + epsilon;
    dm.set_parameters(params);
    const double lp = dm.sample_loss(img, label, ws);
    params[i] = saved - epsilon;
    dm.set_parameters(params);
    const double lm = dm.sample_loss(img, label, ws);
    params[i] = saved;
    const double fd = (lp - lm) / (2.0 * epsilon);
    const double rel = std::abs(fd - analytic[i]) / std::max(std::abs(fd) + std::abs(analytic[i]), 1e-8);
    res.max_rel_error = std::max(res.max_rel_error, rel);
  }
  dm.set_parameters(params);
  return res;
}

}  // namespace psikit
