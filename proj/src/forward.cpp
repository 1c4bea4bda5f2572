#include "scopelens/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scopelens/error.hpp"
#include "scopelens/parallel.hpp"

namespace scopelens {

int ActivationTrace::batch_size() const {
  for (const Tensor& t : outputs_) {
    if (!t.empty()) return t.dim(0);
  }
  return 0;
}

const Tensor& ActivationTrace::output(std::size_t index) const {
  if (!has(index)) throw PreconditionError("layer #" + std::to_string(index) + " not present in trace");
  return outputs_[index];
}

const Tensor& ActivationTrace::features(const NetworkSpec& spec, std::string_view layer) const {
  return output(spec.feature_index(spec.index_of(layer)));
}

const Tensor& ActivationTrace::pre_activation(const NetworkSpec& spec, std::string_view layer) const {
  return output(spec.index_of(layer));
}

namespace {

std::span<const float> channel_plane(const Tensor& t, int n, int channel) {
  const std::size_t plane = static_cast<std::size_t>(t.dim(2)) * t.dim(3);
  return t.item(n).subspan(static_cast<std::size_t>(channel) * plane, plane);
}

}  // namespace

std::span<const float> ActivationTrace::unit_map(const NetworkSpec& spec, const Unit& unit, int n) const {
  check_unit(spec, unit);
  return channel_plane(features(spec, unit.layer), n, unit.channel);
}

std::span<const float> ActivationTrace::unit_pre_activation_map(const NetworkSpec& spec, const Unit& unit,
                                                                int n) const {
  check_unit(spec, unit);
  return channel_plane(pre_activation(spec, unit.layer), n, unit.channel);
}

const Tensor& ActivationTrace::final_output() const {
  if (outputs_.empty() || outputs_.back().empty()) throw PreconditionError("trace has no final output");
  return outputs_.back();
}

namespace {

struct LayerWeights {
  const Tensor* kernel = nullptr;
  const Tensor* bias = nullptr;
};

void conv_item(const LayerSpec& l, const FeatureShape& in_shape, const FeatureShape& out_shape,
               const LayerWeights& lw, std::span<const float> in, std::span<float> out) {
  const int k = l.kernel, s = l.stride, pad = l.padding;
  const int H = in_shape.height, W = in_shape.width;
  const int Ho = out_shape.height, Wo = out_shape.width;
  const int cin_g = in_shape.channels / l.groups;
  const int cout_g = l.channels_out / l.groups;
  const std::size_t K = static_cast<std::size_t>(cin_g) * k * k;
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;

  std::vector<double> cols(K * P);
  std::vector<double> acc(P);
  const float* wdata = lw.kernel->values().data();
  const float* bdata = lw.bias->values().data();

  for (int g = 0; g < l.groups; ++g) {
    // im2col: row (c, ky, kx), column (oy, ox); out-of-bounds taps are zero.
    std::size_t row = 0;
    for (int c = 0; c < cin_g; ++c) {
      const float* plane = in.data() + static_cast<std::size_t>(g * cin_g + c) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx, ++row) {
          double* dst = cols.data() + row * P;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * s - pad + ky;
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ox * s - pad + kx;
              *dst++ = (iy >= 0 && iy < H && ix >= 0 && ix < W) ? plane[static_cast<std::size_t>(iy) * W + ix] : 0.0;
            }
          }
        }
      }
    }
    for (int co = g * cout_g; co < (g + 1) * cout_g; ++co) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(bdata[co]));
      const float* wrow = wdata + static_cast<std::size_t>(co) * K;
      for (std::size_t kk = 0; kk < K; ++kk) {
        const double w = wrow[kk];
        const double* c = cols.data() + kk * P;
        for (std::size_t p = 0; p < P; ++p) acc[p] += w * c[p];
      }
      float* dst = out.data() + static_cast<std::size_t>(co) * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] = static_cast<float>(acc[p]);
    }
  }
}

void maxpool_item(const LayerSpec& l, const FeatureShape& in_shape, const FeatureShape& out_shape,
                  std::span<const float> in, std::span<float> out) {
  const int H = in_shape.height, W = in_shape.width;
  const int Ho = out_shape.height, Wo = out_shape.width;
  for (int c = 0; c < in_shape.channels; ++c) {
    const float* plane = in.data() + static_cast<std::size_t>(c) * H * W;
    float* dst = out.data() + static_cast<std::size_t>(c) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const int y0 = std::max(oy * l.stride - l.padding, 0);
      const int y1 = std::min(oy * l.stride - l.padding + l.kernel, H);
      for (int ox = 0; ox < Wo; ++ox) {
        const int x0 = std::max(ox * l.stride - l.padding, 0);
        const int x1 = std::min(ox * l.stride - l.padding + l.kernel, W);
        float m = -std::numeric_limits<float>::infinity();
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) m = std::max(m, plane[static_cast<std::size_t>(y) * W + x]);
        }
        *dst++ = m;
      }
    }
  }
}

void lrn_item(const LrnParams& p, const FeatureShape& shape, std::span<const float> in, std::span<float> out) {
  const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
  const int half = p.size / 2;
  const double alpha_n = static_cast<double>(p.alpha) / p.size;
  for (std::size_t pos = 0; pos < plane; ++pos) {
    for (int c = 0; c < shape.channels; ++c) {
      double sum = 0.0;
      for (int j = std::max(0, c - half); j <= std::min(shape.channels - 1, c + half); ++j) {
        const double v = in[static_cast<std::size_t>(j) * plane + pos];
        sum += v * v;
      }
      const double x = in[static_cast<std::size_t>(c) * plane + pos];
      out[static_cast<std::size_t>(c) * plane + pos] =
          static_cast<float>(x / std::pow(static_cast<double>(p.k) + alpha_n * sum, static_cast<double>(p.beta)));
    }
  }
}

void fc_item(const LayerSpec& l, const LayerWeights& lw, std::span<const float> in, std::span<float> out) {
  const std::size_t n_in = in.size();
  const float* w = lw.kernel->values().data();
  const float* b = lw.bias->values().data();
  for (int o = 0; o < l.channels_out; ++o) {
    const float* row = w + static_cast<std::size_t>(o) * n_in;
    double acc = b[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += static_cast<double>(row[i]) * in[i];
    out[o] = static_cast<float>(acc);
  }
}

void softmax_item(const FeatureShape& shape, std::span<const float> in, std::span<float> out) {
  const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
  std::vector<double> e(shape.channels);
  for (std::size_t pos = 0; pos < plane; ++pos) {
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < shape.channels; ++c) m = std::max(m, static_cast<double>(in[c * plane + pos]));
    double sum = 0.0;
    for (int c = 0; c < shape.channels; ++c) {
      e[c] = std::exp(static_cast<double>(in[c * plane + pos]) - m);
      sum += e[c];
    }
    for (int c = 0; c < shape.channels; ++c) out[c * plane + pos] = static_cast<float>(e[c] / sum);
  }
}

}  // namespace

ActivationTrace forward(const NetworkSpec& spec, const WeightStore& weights, const Tensor& batch,
                        const ForwardOptions& options) {
  validate_weights(spec, weights);
  const FeatureShape& input = spec.input_shape();
  if (batch.rank() != 4 || batch.dim(1) != input.channels || batch.dim(2) != input.height ||
      batch.dim(3) != input.width) {
    throw ShapeError("batch shape " + shape_string(batch.shape()) + " does not match network input [Nx" +
                     std::to_string(input.channels) + "x" + std::to_string(input.height) + "x" +
                     std::to_string(input.width) + "]");
  }
  const std::size_t last = options.stop_after.value_or(spec.size() - 1);
  if (last >= spec.size()) throw PreconditionError("stop_after past the last layer");

  const int n_items = batch.dim(0);
  std::vector<LayerWeights> lw(last + 1);
  for (std::size_t i = 0; i <= last; ++i) {
    const LayerSpec& l = spec.layer(i);
    if (l.has_weights()) lw[i] = {&weights.find(weight_blob(l))->second, &weights.find(bias_blob(l))->second};
  }

  std::vector<Tensor> outputs(last + 1);
  for (std::size_t i = 0; i <= last; ++i) {
    const FeatureShape& s = spec.output_shape(i);
    outputs[i] = Tensor({n_items, s.channels, s.height, s.width});
  }

  parallel_for(static_cast<std::size_t>(n_items), options.threads, [&](std::size_t item) {
    const int n = static_cast<int>(item);
    for (std::size_t i = 0; i <= last; ++i) {
      const LayerSpec& l = spec.layer(i);
      const FeatureShape& in_shape = spec.layer_input_shape(i);
      const FeatureShape& out_shape = spec.output_shape(i);
      std::span<const float> in = i == 0 ? batch.item(n) : std::span<const float>(outputs[i - 1].item(n));
      std::span<float> out = outputs[i].item(n);
      switch (l.kind) {
        case LayerKind::Conv: conv_item(l, in_shape, out_shape, lw[i], in, out); break;
        case LayerKind::MaxPool: maxpool_item(l, in_shape, out_shape, in, out); break;
        case LayerKind::Relu:
          std::transform(in.begin(), in.end(), out.begin(), [](float v) { return v > 0.0f ? v : 0.0f; });
          break;
        case LayerKind::Lrn: lrn_item(l.lrn, in_shape, in, out); break;
        case LayerKind::Fc: fc_item(l, lw[i], in, out); break;
        case LayerKind::Softmax: softmax_item(out_shape, in, out); break;
      }
    }
  });

  if (!options.keep_all) {
    for (std::size_t i = 0; i < last; ++i) outputs[i] = Tensor();
  }
  return ActivationTrace(std::move(outputs));
}

Model::Model(NetworkSpec spec, WeightStore weights)
    : spec_(std::make_shared<const NetworkSpec>(std::move(spec))),
      weights_(std::make_shared<const WeightStore>(std::move(weights))),
      counter_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  validate_weights(*spec_, *weights_);
}

ActivationTrace Model::forward(const Tensor& batch, const ForwardOptions& options) const {
  ActivationTrace trace = scopelens::forward(*spec_, *weights_, batch, options);
  counter_->fetch_add(static_cast<std::uint64_t>(batch.dim(0)));
  return trace;
}

ActivationTrace Model::forward_one(const Tensor& chw, const ForwardOptions& options) const {
  std::vector<int> shape = {1};
  shape.insert(shape.end(), chw.shape().begin(), chw.shape().end());
  return forward(chw.reshaped(std::move(shape)), options);
}

std::vector<std::pair<int, float>> top_k(const Tensor& probabilities, int n, int k) {
  const auto row = probabilities.item(n);
  std::vector<int> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return row[a] > row[b]; });
  std::vector<std::pair<int, float>> out;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(idx.size())); ++i) out.emplace_back(idx[i], row[idx[i]]);
  return out;
}

int argmax(std::span<const float> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace scopelens
