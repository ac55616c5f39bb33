#pragma once

// Relation encoders. A relation is represented either by a row of a lookup
// table or by composing its pattern's word embeddings with a width-3
// convolution or a bidirectional LSTM, each max-pooled over time. Forward
// passes can record a cache from which backward() accumulates exact
// gradients.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uschema/numerics.hpp"

namespace uschema {

enum class ReprSource { lookup, cnn, lstm };
enum class Coverage { scored, unseen };

template <class T>
struct RelationRepr {
  std::vector<T> vector;
  ReprSource source = ReprSource::lookup;
  Coverage coverage = Coverage::unseen;

  bool scored() const noexcept { return coverage == Coverage::scored; }
  std::span<const T> view() const noexcept { return vector; }
};

/// Gradient storage aligned with ParameterSet::blocks().
template <class T>
using GradBuffer = std::vector<Matrix<T>>;

template <class T>
GradBuffer<T> make_grad_buffer(const ParameterSet<T>& params) {
  GradBuffer<T> g;
  for (const auto& b : params.blocks()) g.emplace_back(b.value.rows(), b.value.cols());
  return g;
}

/// Block indices of the encoder parameters inside a ParameterSet.
struct EncoderLayout {
  static constexpr std::size_t npos = std::size_t(-1);
  std::size_t word_emb = npos;
  std::size_t cnn_filters = npos;
  std::size_t cnn_bias = npos;
  // [direction][input, recurrent, bias]; direction 0 = forward.
  std::size_t lstm[2][3] = {{npos, npos, npos}, {npos, npos, npos}};
};

inline const char* lstm_block_name(int direction, int part) {
  static const char* names[2][3] = {{"lstm.fwd.input", "lstm.fwd.recurrent", "lstm.fwd.bias"},
                                    {"lstm.bwd.input", "lstm.bwd.recurrent", "lstm.bwd.bias"}};
  return names[direction][part];
}

template <class T>
std::size_t block_index(const ParameterSet<T>& params, std::string_view name) {
  const auto& bs = params.blocks();
  for (std::size_t i = 0; i < bs.size(); ++i)
    if (bs[i].name == name) return i;
  return EncoderLayout::npos;
}

template <class T>
EncoderLayout resolve_layout(const ParameterSet<T>& params) {
  EncoderLayout l;
  l.word_emb = block_index(params, "word_emb");
  l.cnn_filters = block_index(params, "cnn.filters");
  l.cnn_bias = block_index(params, "cnn.bias");
  for (int d = 0; d < 2; ++d)
    for (int p = 0; p < 3; ++p) l.lstm[d][p] = block_index(params, lstm_block_name(d, p));
  return l;
}

/// Inverted dropout on embedded inputs; disabled when rate is 0 or no rng.
struct DropoutSpec {
  double rate = 0;
  std::mt19937_64* rng = nullptr;

  bool active() const noexcept { return rate > 0 && rng != nullptr; }
};

namespace detail {

// y += W x
template <class T>
void gemv(const Matrix<T>& w, std::span<const T> x, std::span<T> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] += dot(w.row(r), x);
}

// y += W^T x
template <class T>
void gemv_t(const Matrix<T>& w, std::span<const T> x, std::span<T> y) {
  for (std::size_t r = 0; r < w.rows(); ++r)
    if (x[r] != T(0)) axpy(x[r], w.row(r), y);
}

// W += a b^T
template <class T>
void outer_add(std::span<const T> a, std::span<const T> b, Matrix<T>& w) {
  for (std::size_t r = 0; r < w.rows(); ++r)
    if (a[r] != T(0)) axpy(a[r], b, w.row(r));
}

/// Embeds `rows` into an (n x d) matrix, applying and recording dropout.
template <class T>
Matrix<T> embed(std::span<const std::size_t> rows, const Matrix<T>& emb, const DropoutSpec& dropout,
                Matrix<T>& mask) {
  const std::size_t d = emb.cols();
  Matrix<T> x(rows.size(), d);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t] >= emb.rows()) throw std::out_of_range("embedding row out of range");
    std::copy(emb.row(rows[t]).begin(), emb.row(rows[t]).end(), x.row(t).begin());
  }
  if (dropout.active()) {
    mask = Matrix<T>(rows.size(), d);
    std::bernoulli_distribution keep(1.0 - dropout.rate);
    const T scale = T(1.0 / (1.0 - dropout.rate));
    auto mv = mask.values();
    auto xv = x.values();
    for (std::size_t i = 0; i < mv.size(); ++i) {
      mv[i] = keep(*dropout.rng) ? scale : T(0);
      xv[i] *= mv[i];
    }
  } else {
    mask = Matrix<T>();
  }
  return x;
}

template <class T>
void scatter_embedding_grad(std::span<const std::size_t> rows, const Matrix<T>& dx, const Matrix<T>& mask,
                            Matrix<T>& demb) {
  for (std::size_t t = 0; t < rows.size(); ++t) {
    auto g = demb.row(rows[t]);
    auto src = dx.row(t);
    if (mask.empty()) {
      axpy(T(1), src, g);
    } else {
      auto m = mask.row(t);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += src[j] * m[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CNN: pad one boundary token on each side, width-3 convolution, tanh,
// max over time.

template <class T>
struct CnnCache {
  std::vector<std::size_t> rows;  // including the two pads
  Matrix<T> inputs;               // (n+2) x d after dropout
  Matrix<T> mask;
  Matrix<T> activations;          // n x d, post-tanh
  std::vector<std::size_t> argmax;
};

template <class T>
void add_cnn_params(ParameterSet<T>& params, std::size_t dim) {
  params.add("cnn.filters", dim, 3 * dim);
  params.add("cnn.bias", 1, dim);
}

/// `rows` are canonical embedding rows of a non-empty token sequence.
template <class T>
RelationRepr<T> encode_cnn(std::span<const std::size_t> rows, std::size_t pad_row, const ParameterSet<T>& params,
                           const EncoderLayout& layout, CnnCache<T>* cache = nullptr, DropoutSpec dropout = {}) {
  if (rows.empty()) throw std::invalid_argument("encode_cnn: empty sequence");
  const auto& emb = params.blocks()[layout.word_emb].value;
  const auto& filters = params.blocks()[layout.cnn_filters].value;
  const auto& bias = params.blocks()[layout.cnn_bias].value;
  const std::size_t d = emb.cols();
  const std::size_t n = rows.size();

  std::vector<std::size_t> padded;
  padded.reserve(n + 2);
  padded.push_back(pad_row);
  padded.insert(padded.end(), rows.begin(), rows.end());
  padded.push_back(pad_row);

  Matrix<T> mask;
  Matrix<T> x = detail::embed<T>(padded, emb, dropout, mask);
  Matrix<T> h(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    // Rows t, t+1, t+2 of x are contiguous: the window is one 3d span.
    std::span<const T> window(x.values().data() + t * d, 3 * d);
    auto out = h.row(t);
    std::copy(bias.row(0).begin(), bias.row(0).end(), out.begin());
    detail::gemv(filters, window, out);
    for (auto& v : out) v = std::tanh(v);
  }

  RelationRepr<T> repr{std::vector<T>(d), ReprSource::cnn, Coverage::scored};
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    T best = h(0, j);
    for (std::size_t t = 1; t < n; ++t)
      if (h(t, j) > best) {
        best = h(t, j);
        argmax[j] = t;
      }
    repr.vector[j] = best;
  }
  if (cache) {
    cache->rows = std::move(padded);
    cache->inputs = std::move(x);
    cache->mask = std::move(mask);
    cache->activations = std::move(h);
    cache->argmax = std::move(argmax);
  }
  return repr;
}

template <class T>
void backward_cnn(const CnnCache<T>& cache, std::span<const T> dy, const ParameterSet<T>& params,
                  const EncoderLayout& layout, GradBuffer<T>& grads) {
  const auto& filters = params.blocks()[layout.cnn_filters].value;
  const std::size_t d = filters.rows();
  const std::size_t n = cache.activations.rows();
  Matrix<T> dz(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t t = cache.argmax[j];
    const T a = cache.activations(t, j);
    dz(t, j) += dy[j] * (T(1) - a * a);
  }
  Matrix<T> dx(n + 2, d);
  auto& dfilters = grads[layout.cnn_filters];
  auto& dbias = grads[layout.cnn_bias];
  for (std::size_t t = 0; t < n; ++t) {
    auto g = dz.row(t);
    bool any = false;
    for (T v : g) any = any || v != T(0);
    if (!any) continue;
    std::span<const T> window(cache.inputs.values().data() + t * d, 3 * d);
    detail::outer_add<T>(g, window, dfilters);
    axpy(T(1), std::span<const T>(g), dbias.row(0));
    std::span<T> dwindow(dx.values().data() + t * d, 3 * d);
    detail::gemv_t<T>(filters, g, dwindow);
  }
  detail::scatter_embedding_grad<T>(cache.rows, dx, cache.mask, grads[layout.word_emb]);
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM. Gate order inside the 4d pre-activation: input,
// forget, output, candidate. Per position the forward and backward hidden
// states are averaged, then max-pooled over time.

template <class T>
struct LstmStep {
  std::vector<T> i, f, o, g, c, tanh_c, h;
};

template <class T>
struct LstmCache {
  std::vector<std::size_t> rows;
  Matrix<T> inputs;  // n x d after dropout
  Matrix<T> mask;
  std::vector<LstmStep<T>> steps[2];  // steps[1] runs over the reversed sequence
  std::vector<std::size_t> argmax;
};

template <class T>
void add_lstm_params(ParameterSet<T>& params, std::size_t dim) {
  for (int dir = 0; dir < 2; ++dir) {
    params.add(lstm_block_name(dir, 0), 4 * dim, dim);
    params.add(lstm_block_name(dir, 1), 4 * dim, dim);
    params.add(lstm_block_name(dir, 2), 1, 4 * dim);
  }
}

/// Sets the forget-gate slice of both bias blocks to `value`.
template <class T>
void set_forget_bias(ParameterSet<T>& params, T value) {
  for (int dir = 0; dir < 2; ++dir) {
    auto& b = params.at(lstm_block_name(dir, 2)).value;
    const std::size_t d = b.cols() / 4;
    for (std::size_t j = d; j < 2 * d; ++j) b(0, j) = value;
  }
}

namespace detail {

template <class T>
std::vector<LstmStep<T>> lstm_direction(const Matrix<T>& x, bool reversed, const Matrix<T>& w_in,
                                        const Matrix<T>& w_rec, const Matrix<T>& bias) {
  const std::size_t n = x.rows();
  const std::size_t d = w_in.cols();
  std::vector<LstmStep<T>> steps(n);
  std::vector<T> h_prev(d, T(0)), c_prev(d, T(0)), a(4 * d);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reversed ? n - 1 - s : s;
    std::copy(bias.row(0).begin(), bias.row(0).end(), a.begin());
    gemv(w_in, x.row(t), std::span<T>(a));
    gemv(w_rec, std::span<const T>(h_prev), std::span<T>(a));
    auto& st = steps[s];
    st.i.resize(d);
    st.f.resize(d);
    st.o.resize(d);
    st.g.resize(d);
    st.c.resize(d);
    st.tanh_c.resize(d);
    st.h.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      st.i[j] = sigmoid(a[j]);
      st.f[j] = sigmoid(a[d + j]);
      st.o[j] = sigmoid(a[2 * d + j]);
      st.g[j] = std::tanh(a[3 * d + j]);
      st.c[j] = st.f[j] * c_prev[j] + st.i[j] * st.g[j];
      st.tanh_c[j] = std::tanh(st.c[j]);
      st.h[j] = st.o[j] * st.tanh_c[j];
    }
    h_prev = st.h;
    c_prev = st.c;
  }
  return steps;
}

// dh_ext[s] is the external gradient on the hidden state of step s.
template <class T>
void lstm_direction_backward(const Matrix<T>& x, bool reversed, const std::vector<LstmStep<T>>& steps,
                             const Matrix<T>& dh_ext, const Matrix<T>& w_in, const Matrix<T>& w_rec,
                             Matrix<T>& dw_in, Matrix<T>& dw_rec, Matrix<T>& dbias, Matrix<T>& dx) {
  const std::size_t n = x.rows();
  const std::size_t d = w_in.cols();
  std::vector<T> dh_next(d, T(0)), dc_next(d, T(0)), da(4 * d), zeros(d, T(0));
  for (std::size_t s = n; s-- > 0;) {
    const std::size_t t = reversed ? n - 1 - s : s;
    const auto& st = steps[s];
    const std::vector<T>& c_prev = s > 0 ? steps[s - 1].c : zeros;
    const std::vector<T>& h_prev = s > 0 ? steps[s - 1].h : zeros;
    for (std::size_t j = 0; j < d; ++j) {
      const T dh = dh_ext(s, j) + dh_next[j];
      const T dout = dh * st.tanh_c[j];
      const T dc = dh * st.o[j] * (T(1) - st.tanh_c[j] * st.tanh_c[j]) + dc_next[j];
      const T di = dc * st.g[j];
      const T dg = dc * st.i[j];
      const T df = dc * c_prev[j];
      dc_next[j] = dc * st.f[j];
      da[j] = di * st.i[j] * (T(1) - st.i[j]);
      da[d + j] = df * st.f[j] * (T(1) - st.f[j]);
      da[2 * d + j] = dout * st.o[j] * (T(1) - st.o[j]);
      da[3 * d + j] = dg * (T(1) - st.g[j] * st.g[j]);
    }
    std::span<const T> dav(da);
    outer_add(dav, x.row(t), dw_in);
    if (s > 0) outer_add(dav, std::span<const T>(h_prev), dw_rec);
    axpy(T(1), dav, dbias.row(0));
    gemv_t(w_in, dav, dx.row(t));
    std::fill(dh_next.begin(), dh_next.end(), T(0));
    gemv_t(w_rec, dav, std::span<T>(dh_next));
  }
}

}  // namespace detail

template <class T>
RelationRepr<T> encode_lstm(std::span<const std::size_t> rows, const ParameterSet<T>& params,
                            const EncoderLayout& layout, LstmCache<T>* cache = nullptr, DropoutSpec dropout = {}) {
  if (rows.empty()) throw std::invalid_argument("encode_lstm: empty sequence");
  const auto& emb = params.blocks()[layout.word_emb].value;
  const std::size_t n = rows.size();
  const std::size_t d = params.blocks()[layout.lstm[0][0]].value.cols();

  Matrix<T> mask;
  Matrix<T> x = detail::embed<T>(rows, emb, dropout, mask);
  std::vector<LstmStep<T>> steps[2];
  for (int dir = 0; dir < 2; ++dir) {
    const auto& bs = params.blocks();
    steps[dir] = detail::lstm_direction<T>(x, dir == 1, bs[layout.lstm[dir][0]].value, bs[layout.lstm[dir][1]].value,
                                           bs[layout.lstm[dir][2]].value);
  }

  RelationRepr<T> repr{std::vector<T>(d), ReprSource::lstm, Coverage::scored};
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    T best = T(0);
    for (std::size_t t = 0; t < n; ++t) {
      const T avg = (steps[0][t].h[j] + steps[1][n - 1 - t].h[j]) / T(2);
      if (t == 0 || avg > best) {
        best = avg;
        argmax[j] = t;
      }
    }
    repr.vector[j] = best;
  }
  if (cache) {
    cache->rows.assign(rows.begin(), rows.end());
    cache->inputs = std::move(x);
    cache->mask = std::move(mask);
    cache->steps[0] = std::move(steps[0]);
    cache->steps[1] = std::move(steps[1]);
    cache->argmax = std::move(argmax);
  }
  return repr;
}

template <class T>
void backward_lstm(const LstmCache<T>& cache, std::span<const T> dy, const ParameterSet<T>& params,
                   const EncoderLayout& layout, GradBuffer<T>& grads) {
  const std::size_t n = cache.inputs.rows();
  const std::size_t d = dy.size();
  Matrix<T> dh[2] = {Matrix<T>(n, d), Matrix<T>(n, d)};
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t t = cache.argmax[j];
    dh[0](t, j) += dy[j] / T(2);
    dh[1](n - 1 - t, j) += dy[j] / T(2);
  }
  Matrix<T> dx(n, cache.inputs.cols());
  const auto& bs = params.blocks();
  for (int dir = 0; dir < 2; ++dir) {
    detail::lstm_direction_backward<T>(cache.inputs, dir == 1, cache.steps[dir], dh[dir], bs[layout.lstm[dir][0]].value,
                                       bs[layout.lstm[dir][1]].value, grads[layout.lstm[dir][0]],
                                       grads[layout.lstm[dir][1]], grads[layout.lstm[dir][2]], dx);
  }
  detail::scatter_embedding_grad<T>(cache.rows, dx, cache.mask, grads[layout.word_emb]);
}

// ---------------------------------------------------------------------------

/// sigma(u . v); empty when the representation is unseen.
template <class T>
std::optional<T> score_triple(std::span<const T> pair_vector, const RelationRepr<T>& repr) {
  if (!repr.scored()) return std::nullopt;
  if (repr.vector.size() != pair_vector.size()) throw std::invalid_argument("dimension mismatch");
  return sigmoid(dot(pair_vector, repr.view()));
}

}  // namespace uschema
