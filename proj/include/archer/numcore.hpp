#pragma once

// Dense matrices, fully connected networks with reverse-mode gradients,
// Adam, and the flat binary parameter snapshot format.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "archer/errors.hpp"
#include "archer/rng.hpp"

namespace archer {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix initializer");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  /// A 1 x n matrix holding a copy of `values`.
  static Matrix row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation : std::uint32_t { relu = 0, tanh = 1, linear = 2 };

/// One fully connected layer. `weight` is in_dim x out_dim so that a batch
/// X (n x in_dim) maps to X * weight + bias.
struct Layer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::linear;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct MlpParams {
  std::vector<Layer> layers;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Throws ShapeError unless consecutive layers chain.
  void validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.in_dim() == 0 || l.out_dim() == 0) throw ShapeError("layer with zero width");
      if (l.bias.size() != l.out_dim()) {
        throw ShapeError("layer " + std::to_string(i) + ": bias length does not match out-dim");
      }
      if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
        throw ShapeError("layer " + std::to_string(i) + ": in-dim " + std::to_string(l.in_dim()) +
                         " does not chain with previous out-dim " +
                         std::to_string(layers[i - 1].out_dim()));
      }
    }
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weight.all_finite()) return false;
      for (double b : l.bias)
        if (!std::isfinite(b)) return false;
    }
    return true;
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Gradient (or Adam moment) storage shaped like an MlpParams.
struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static ParamGrads zeros_like(const MlpParams& p) {
    ParamGrads g;
    for (const auto& l : p.layers) {
      g.weights.emplace_back(l.in_dim(), l.out_dim());
      g.biases.emplace_back(l.out_dim(), 0.0);
    }
    return g;
  }

  bool matches(const MlpParams& p) const {
    if (weights.size() != p.layers.size() || biases.size() != p.layers.size()) return false;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      if (weights[i].rows() != p.layers[i].in_dim() || weights[i].cols() != p.layers[i].out_dim() ||
          biases[i].size() != p.layers[i].out_dim())
        return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.all_finite()) return false;
    for (const auto& b : biases)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const ParamGrads&, const ParamGrads&) = default;
};

/// Activations recorded by a forward pass; inputs[i] feeds layer i and
/// outputs[i] is its post-activation value.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

struct BackwardResult {
  ParamGrads grads;
  Matrix grad_input;
};

namespace detail {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::tanh:
      return std::tanh(z);
    case Activation::linear:
      return z;
  }
  return z;
}

// Derivative expressed through the post-activation value y. For relu, y > 0
// exactly when z > 0, so the subgradient at 0 is 0.
inline double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::linear:
      return 1.0;
  }
  return 1.0;
}

// out = x * w + b, row by row; the inner loop runs over contiguous columns.
inline Matrix affine(const Matrix& x, const Layer& layer) {
  const std::size_t n = x.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  Matrix z(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    double* zr = z.row(r).data();
    std::copy(layer.bias.begin(), layer.bias.end(), zr);
    const double* xr = x.row(r).data();
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const double* wk = layer.weight.row(k).data();
      for (std::size_t j = 0; j < out; ++j) zr[j] += xv * wk[j];
    }
  }
  return z;
}

// Unrolled dot product with a fixed summation order.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

inline void check_cache(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_output) {
  const std::size_t L = params.layers.size();
  if (cache.inputs.size() != L || cache.outputs.size() != L) {
    throw ShapeError("forward cache was produced by a network with a different layer count");
  }
  const std::size_t n = grad_output.rows();
  for (std::size_t i = 0; i < L; ++i) {
    const auto& l = params.layers[i];
    if (cache.inputs[i].cols() != l.in_dim() || cache.outputs[i].cols() != l.out_dim() ||
        cache.inputs[i].rows() != n || cache.outputs[i].rows() != n) {
      throw ShapeError("forward cache does not match layer " + std::to_string(i));
    }
  }
  if (grad_output.cols() != params.out_dim()) {
    throw ShapeError("grad_output width " + std::to_string(grad_output.cols()) +
                     " does not match network out-dim " + std::to_string(params.out_dim()));
  }
}

// dZ for the layer, given dY (gradient w.r.t. the layer's output).
inline Matrix pre_activation_grad(const Layer& layer, const Matrix& y, const Matrix& dy) {
  Matrix dz(dy.rows(), dy.cols());
  auto out = dz.values();
  auto yv = y.values();
  auto gv = dy.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gv[i] * activation_slope(layer.activation, yv[i]);
  return dz;
}

// dX = dZ * W^T
inline Matrix input_grad(const Layer& layer, const Matrix& dz) {
  const std::size_t n = dz.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  Matrix dx(n, in);
  for (std::size_t r = 0; r < n; ++r) {
    const double* dzr = dz.row(r).data();
    double* dxr = dx.row(r).data();
    for (std::size_t k = 0; k < in; ++k) dxr[k] = dot(dzr, layer.weight.row(k).data(), out);
  }
  return dx;
}

}  // namespace detail

/// Batched forward pass: each row of `input` is one sample.
inline ForwardResult mlp_forward(const MlpParams& params, const Matrix& input) {
  params.validate();
  if (input.cols() != params.in_dim()) {
    throw ShapeError("input width " + std::to_string(input.cols()) + " does not match network in-dim " +
                     std::to_string(params.in_dim()));
  }
  ForwardResult result;
  result.cache.inputs.reserve(params.layers.size());
  result.cache.outputs.reserve(params.layers.size());
  Matrix x = input;
  for (const auto& layer : params.layers) {
    Matrix z = detail::affine(x, layer);
    for (double& v : z.values()) v = detail::activate(layer.activation, v);
    result.cache.inputs.push_back(std::move(x));
    x = z;
    result.cache.outputs.push_back(std::move(z));
  }
  result.output = std::move(x);
  return result;
}

inline ForwardResult mlp_forward(const MlpParams& params, std::span<const double> input) {
  return mlp_forward(params, Matrix::row_vector(input));
}

/// Output only, without keeping the cache.
inline Matrix mlp_predict(const MlpParams& params, const Matrix& input) {
  params.validate();
  if (input.cols() != params.in_dim()) throw ShapeError("input width does not match network in-dim");
  Matrix x = input;
  for (const auto& layer : params.layers) {
    Matrix z = detail::affine(x, layer);
    for (double& v : z.values()) v = detail::activate(layer.activation, v);
    x = std::move(z);
  }
  return x;
}

inline Vector mlp_predict(const MlpParams& params, std::span<const double> input) {
  Matrix out = mlp_predict(params, Matrix::row_vector(input));
  return Vector(out.values().begin(), out.values().end());
}

/// Reverse-mode gradients of sum(output .* grad_output) over the batch, with
/// respect to every weight and bias and to the network input.
inline BackwardResult mlp_backward(const MlpParams& params, const ForwardCache& cache,
                                   const Matrix& grad_output) {
  detail::check_cache(params, cache, grad_output);
  const std::size_t L = params.layers.size();
  BackwardResult result{ParamGrads::zeros_like(params), Matrix()};
  Matrix dy = grad_output;
  for (std::size_t li = L; li-- > 0;) {
    const auto& layer = params.layers[li];
    Matrix dz = detail::pre_activation_grad(layer, cache.outputs[li], dy);
    const Matrix& x = cache.inputs[li];
    Matrix& dw = result.grads.weights[li];
    Vector& db = result.grads.biases[li];
    const std::size_t out = layer.out_dim();
    for (std::size_t r = 0; r < dz.rows(); ++r) {
      const double* dzr = dz.row(r).data();
      const double* xr = x.row(r).data();
      for (std::size_t j = 0; j < out; ++j) db[j] += dzr[j];
      for (std::size_t k = 0; k < layer.in_dim(); ++k) {
        const double xv = xr[k];
        if (xv == 0.0) continue;
        double* dwk = dw.row(k).data();
        for (std::size_t j = 0; j < out; ++j) dwk[j] += xv * dzr[j];
      }
    }
    dy = detail::input_grad(layer, dz);
  }
  result.grad_input = std::move(dy);
  return result;
}

/// Gradient with respect to the input only; skips weight gradients.
inline Matrix mlp_input_gradient(const MlpParams& params, const ForwardCache& cache,
                                 const Matrix& grad_output) {
  detail::check_cache(params, cache, grad_output);
  Matrix dy = grad_output;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& layer = params.layers[li];
    dy = detail::input_grad(layer, detail::pre_activation_grad(layer, cache.outputs[li], dy));
  }
  return dy;
}

struct AdamState {
  ParamGrads m;
  ParamGrads v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& p) {
    return AdamState{ParamGrads::zeros_like(p), ParamGrads::zeros_like(p)};
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update. Throws NumericError, leaving everything
/// untouched, if any gradient is non-finite.
inline void adam_step(MlpParams& params, const ParamGrads& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (!grads.matches(params) || !state.m.matches(params) || !state.v.matches(params)) {
    throw ShapeError("gradient or Adam moment shapes do not match the parameters");
  }
  if (!grads.all_finite()) throw NumericError("non-finite gradient passed to Adam");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;

  auto update = [&](std::span<double> p, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  };
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& layer = params.layers[li];
    update(layer.weight.values(), grads.weights[li].values(), state.m.weights[li].values(),
           state.v.weights[li].values());
    update(layer.bias, grads.biases[li], state.m.biases[li], state.v.biases[li]);
  }
}

/// in_dim x out_dim weights uniform in [-1/sqrt(in_dim), 1/sqrt(in_dim)].
inline Matrix fanin_init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(in_dim, out_dim);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

inline constexpr double kFinalLayerInitBound = 3e-3;

inline Matrix final_layer_init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  std::uniform_real_distribution<double> dist(-kFinalLayerInitBound, kFinalLayerInitBound);
  Matrix m(in_dim, out_dim);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

/// Fully connected network with relu hidden layers. Hidden weights and biases
/// use fan-in initialization, the output layer the small uniform range.
inline MlpParams make_mlp(std::size_t in_dim, std::span<const std::size_t> hidden, std::size_t out_dim,
                          Activation output_activation, Rng& rng) {
  MlpParams p;
  std::size_t prev = in_dim;
  for (std::size_t width : hidden) {
    Layer l{fanin_init(prev, width, rng), Vector(width), Activation::relu};
    const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& b : l.bias) b = dist(rng);
    p.layers.push_back(std::move(l));
    prev = width;
  }
  Layer out{final_layer_init(prev, out_dim, rng), Vector(out_dim), output_activation};
  std::uniform_real_distribution<double> dist(-kFinalLayerInitBound, kFinalLayerInitBound);
  for (double& b : out.bias) b = dist(rng);
  p.layers.push_back(std::move(out));
  p.validate();
  return p;
}

/// Central-difference gradient of a scalar function.
template <class F>
Vector finite_diff_grad(F&& f, Vector x, double h) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(std::as_const(x));
    x[i] = orig - h;
    const double down = f(std::as_const(x));
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Flat parameter views, in layer order: weight (row-major) then bias.
inline Vector flatten(const MlpParams& p) {
  Vector out;
  out.reserve(p.parameter_count());
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weight.values().begin(), l.weight.values().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

inline Vector flatten(const ParamGrads& g) {
  Vector out;
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    out.insert(out.end(), g.weights[i].values().begin(), g.weights[i].values().end());
    out.insert(out.end(), g.biases[i].begin(), g.biases[i].end());
  }
  return out;
}

inline void unflatten_into(MlpParams& p, std::span<const double> flat) {
  if (flat.size() != p.parameter_count()) throw ShapeError("flat parameter length mismatch");
  std::size_t pos = 0;
  for (auto& l : p.layers) {
    for (double& v : l.weight.values()) v = flat[pos++];
    for (double& v : l.bias) v = flat[pos++];
  }
}

// Snapshot format, all little-endian:
//   u32 layer_count
//   per layer: u32 in_dim, u32 out_dim, u32 activation
//   per layer: in_dim*out_dim f64 weights (row-major), out_dim f64 biases
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

inline void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("truncated snapshot header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("truncated snapshot data");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline void write_snapshot(std::ostream& os, const MlpParams& p) {
  p.validate();
  detail::put_u32(os, static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    detail::put_u32(os, static_cast<std::uint32_t>(l.in_dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : p.layers) {
    for (double v : l.weight.values()) detail::put_f64(os, v);
    for (double v : l.bias) detail::put_f64(os, v);
  }
}

inline MlpParams read_snapshot(std::istream& is) {
  const std::uint32_t count = detail::get_u32(is);
  if (count == 0 || count > 1024) throw FormatError("implausible layer count in snapshot");
  MlpParams p;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t in = detail::get_u32(is);
    const std::uint32_t out = detail::get_u32(is);
    const std::uint32_t act = detail::get_u32(is);
    if (act > static_cast<std::uint32_t>(Activation::linear)) throw FormatError("unknown activation code");
    p.layers.push_back(Layer{Matrix(in, out), Vector(out), static_cast<Activation>(act)});
  }
  for (auto& l : p.layers) {
    for (double& v : l.weight.values()) v = detail::get_f64(is);
    for (double& v : l.bias) v = detail::get_f64(is);
  }
  try {
    p.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("snapshot describes an invalid network: ") + e.what());
  }
  return p;
}

inline void save_snapshot(const std::string& path, const MlpParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_snapshot(os, p);
}

inline MlpParams load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_snapshot(is);
}

}  // namespace archer
