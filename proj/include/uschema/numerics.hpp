#pragma once

// Dense arithmetic, parameter storage, ADAM, gradient clipping and a
// central-difference gradient checker. Everything is templated on the scalar
// type: float for training, double for verification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uschema {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major dense matrix.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// 1/(1+e^{-x}) without overflow for large |x|.
template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// log(1 + e^x), stable for large |x|.
template <class T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class T>
T l2_norm(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

/// y += alpha * x
template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// Cosine similarity clamped to [-1, 1]. Empty when either vector is zero.
template <class T>
std::optional<T> cosine(std::span<const T> u, std::span<const T> v) {
  const T nu = l2_norm(u);
  const T nv = l2_norm(v);
  if (nu == T(0) || nv == T(0)) return std::nullopt;
  return std::clamp(dot(u, v) / (nu * nv), T(-1), T(1));
}

template <class T>
void fill_uniform(std::span<T> values, T scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-double(scale), double(scale));
  for (auto& x : values) x = T(dist(rng));
}

template <class T>
struct ParamBlock {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

/// Named parameter blocks with a gradient buffer per block. Blocks are added
/// once during model construction; references stay valid afterwards.
template <class T>
class ParameterSet {
 public:
  ParamBlock<T>& add(std::string name, std::size_t rows, std::size_t cols) {
    if (find(name)) throw std::invalid_argument("duplicate parameter block " + name);
    blocks_.push_back({std::move(name), Matrix<T>(rows, cols), Matrix<T>(rows, cols)});
    return blocks_.back();
  }

  ParamBlock<T>* find(std::string_view name) {
    for (auto& b : blocks_)
      if (b.name == name) return &b;
    return nullptr;
  }
  const ParamBlock<T>* find(std::string_view name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return &b;
    return nullptr;
  }
  ParamBlock<T>& at(std::string_view name) {
    if (auto* b = find(name)) return *b;
    throw std::out_of_range("no parameter block " + std::string(name));
  }
  const ParamBlock<T>& at(std::string_view name) const {
    if (const auto* b = find(name)) return *b;
    throw std::out_of_range("no parameter block " + std::string(name));
  }

  std::vector<ParamBlock<T>>& blocks() noexcept { return blocks_; }
  const std::vector<ParamBlock<T>>& blocks() const noexcept { return blocks_; }

  void zero_grads() {
    for (auto& b : blocks_) b.grad.fill(T(0));
  }

 private:
  std::vector<ParamBlock<T>> blocks_;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  long long step = 0;
  std::vector<Matrix<T>> first_moment;
  std::vector<Matrix<T>> second_moment;

  explicit AdamState(const ParameterSet<T>& params) {
    for (const auto& b : params.blocks()) {
      first_moment.emplace_back(b.value.rows(), b.value.cols());
      second_moment.emplace_back(b.value.rows(), b.value.cols());
    }
  }
};

/// Bias-corrected ADAM update of every block from its `grad`. The step
/// counter is incremented before bias correction. A non-finite gradient
/// throws before any parameter is touched.
template <class T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state, const AdamConfig& cfg) {
  auto& blocks = params.blocks();
  if (state.first_moment.size() != blocks.size())
    throw std::invalid_argument("optimizer state does not match parameter set");
  for (const auto& b : blocks) {
    for (T g : b.grad.values())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter block '" + b.name + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    auto w = blocks[k].value.values();
    auto g = blocks[k].grad.values();
    auto m = state.first_moment[k].values();
    auto v = state.second_moment[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double mhat = double(m[i]) / c1;
      const double vhat = double(v[i]) / c2;
      w[i] -= T(cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
  }
}

/// Global l2 norm over a list of gradient buffers.
template <class T>
double global_norm(std::span<const std::span<T>> grads) {
  double s = 0;
  for (auto g : grads)
    for (T x : g) s += double(x) * double(x);
  return std::sqrt(s);
}

/// Scales all buffers by max_norm/norm when their joint norm exceeds
/// max_norm. Returns the norm before clipping.
template <class T>
double clip_global_norm(std::span<const std::span<T>> grads, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const T scale = T(max_norm / norm);
    for (auto g : grads)
      for (T& x : g) x *= scale;
  }
  return norm;
}

template <class T>
double clip_global_norm(ParameterSet<T>& params, double max_norm) {
  std::vector<std::span<T>> grads;
  for (auto& b : params.blocks()) grads.push_back(b.grad.values());
  return clip_global_norm<T>(std::span<const std::span<T>>(grads), max_norm);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (double precision only).

struct GradCheckBlock {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckReport {
  double max_relative_error = 0;
  std::string worst_block;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t coordinates = 0;
  std::vector<std::pair<std::string, double>> block_max;  // per block, input order
  bool passed = true;
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `loss` for every coordinate of every block,
/// compared against the block's analytic gradient. Parameter values are
/// restored exactly after each probe.
template <class Loss>
GradCheckReport finite_difference_check(Loss&& loss, std::span<GradCheckBlock> blocks,
                                        double epsilon, double tolerance) {
  GradCheckReport report;
  for (auto& block : blocks) {
    if (block.values.size() != block.analytic.size())
      throw std::invalid_argument("gradient shape mismatch in block " + block.name);
    double block_max = 0;
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      const double saved = block.values[i];
      block.values[i] = saved + epsilon;
      const double up = loss();
      block.values[i] = saved - epsilon;
      const double down = loss();
      block.values[i] = saved;
      const double numeric = (up - down) / (2 * epsilon);
      const double err = relative_error(block.analytic[i], numeric);
      ++report.coordinates;
      block_max = std::max(block_max, err);
      if (report.worst_block.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_block = block.name;
        report.worst_index = i;
        report.worst_analytic = block.analytic[i];
        report.worst_numeric = numeric;
      }
    }
    report.block_max.emplace_back(block.name, block_max);
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace uschema
