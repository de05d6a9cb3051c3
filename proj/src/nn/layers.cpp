#include "instasim/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace instasim::nn {

namespace {

void check_linear_shapes(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.shape().size() != 2 || bias.shape().size() != 1 || x.cols() != weight.shape()[0] ||
      bias.shape()[0] != weight.shape()[1]) {
    throw std::invalid_argument("linear: shape mismatch x" + x.shape_string() + " W" + weight.shape_string() +
                                " b" + bias.shape_string());
  }
}

// y_row += a * x_row
inline void axpy(Real a, const Real* x, Real* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_linear_shapes(x, weight, bias);
  const int n = x.rows();
  const int in = weight.shape()[0];
  const int out = weight.shape()[1];
  Tensor y = Tensor::matrix(n, out);
  for (int r = 0; r < n; ++r) {
    Real* yr = y.row(r);
    std::copy(bias.data(), bias.data() + out, yr);
    const Real* xr = x.row(r);
    for (int k = 0; k < in; ++k) {
      const Real xv = xr[k];
      if (xv == Real(0)) continue;
      axpy(xv, weight.row(k), yr, out);
    }
  }
  return y;
}

Tensor linear_backward(const Tensor& x, const Tensor& weight, const Tensor& dy, Tensor* dweight, Tensor* dbias) {
  const int n = x.rows();
  const int in = weight.shape()[0];
  const int out = weight.shape()[1];
  if (dy.rows() != n || dy.cols() != out) throw std::invalid_argument("linear_backward: dy shape mismatch");
  Tensor dx = Tensor::matrix(n, in);
  for (int r = 0; r < n; ++r) {
    const Real* dyr = dy.row(r);
    const Real* xr = x.row(r);
    Real* dxr = dx.row(r);
    for (int k = 0; k < in; ++k) {
      dxr[k] = dot(dyr, weight.row(k), out);
      if (dweight != nullptr && xr[k] != Real(0)) axpy(xr[k], dyr, dweight->row(k), out);
    }
    if (dbias != nullptr) axpy(Real(1), dyr, dbias->data(), out);
  }
  return dx;
}

// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& shift, LayerNormCache* cache) {
  const int n = x.rows();
  const int d = x.cols();
  if (d < 2) throw std::invalid_argument("layer_norm: feature dim must be >= 2");
  if (static_cast<int>(scale.size()) != d || static_cast<int>(shift.size()) != d) {
    throw std::invalid_argument("layer_norm: affine shape mismatch");
  }
  Tensor y(x.shape());
  if (cache != nullptr) {
    cache->normalized = Tensor(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(n), Real(0));
  }
  for (int r = 0; r < n; ++r) {
    const Real* xr = x.row(r);
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += xr[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      const double diff = xr[c] - mean;
      var += diff * diff;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    Real* yr = y.row(r);
    for (int c = 0; c < d; ++c) {
      const Real xhat = static_cast<Real>((xr[c] - mean) * inv);
      yr[c] = scale[static_cast<std::size_t>(c)] * xhat + shift[static_cast<std::size_t>(c)];
      if (cache != nullptr) cache->normalized.row(r)[c] = xhat;
    }
    if (cache != nullptr) cache->inv_std[static_cast<std::size_t>(r)] = static_cast<Real>(inv);
  }
  return y;
}

Tensor layer_norm_backward(const LayerNormCache& cache, const Tensor& scale, const Tensor& dy, Tensor* dscale,
                           Tensor* dshift) {
  const Tensor& xhat = cache.normalized;
  const int n = xhat.rows();
  const int d = xhat.cols();
  Tensor dx(xhat.shape());
  std::vector<double> dxhat(static_cast<std::size_t>(d));
  for (int r = 0; r < n; ++r) {
    const Real* dyr = dy.row(r);
    const Real* xr = xhat.row(r);
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (int c = 0; c < d; ++c) {
      const double g = static_cast<double>(dyr[c]) * scale[static_cast<std::size_t>(c)];
      dxhat[static_cast<std::size_t>(c)] = g;
      sum_dxhat += g;
      sum_dxhat_xhat += g * xr[c];
      if (dscale != nullptr) (*dscale)[static_cast<std::size_t>(c)] += dyr[c] * xr[c];
      if (dshift != nullptr) (*dshift)[static_cast<std::size_t>(c)] += dyr[c];
    }
    const double inv = cache.inv_std[static_cast<std::size_t>(r)];
    Real* dxr = dx.row(r);
    for (int c = 0; c < d; ++c) {
      dxr[c] = static_cast<Real>(inv / d * (d * dxhat[static_cast<std::size_t>(c)] - sum_dxhat - xr[c] * sum_dxhat_xhat));
    }
  }
  return dx;
}

void relu_inplace(Tensor& x) {
  for (Real& v : x.values()) v = v > Real(0) ? v : Real(0);
}

void relu_backward_inplace(const Tensor& output, Tensor& dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(output[i] > Real(0))) dy[i] = Real(0);
  }
}

// ---------------------------------------------------------------------------

MaxPoolResult max_pool_set(const Tensor& tokens) {
  const int n = tokens.rows();
  const int d = tokens.cols();
  if (n == 0 || tokens.empty()) throw std::invalid_argument("max_pool_set: empty token set");
  MaxPoolResult out{Tensor::matrix(1, d), std::vector<int>(static_cast<std::size_t>(d), 0)};
  std::copy(tokens.row(0), tokens.row(0) + d, out.pooled.data());
  for (int r = 1; r < n; ++r) {
    const Real* tr = tokens.row(r);
    for (int c = 0; c < d; ++c) {
      if (tr[c] > out.pooled[static_cast<std::size_t>(c)]) {
        out.pooled[static_cast<std::size_t>(c)] = tr[c];
        out.argmax[static_cast<std::size_t>(c)] = r;
      }
    }
  }
  return out;
}

void max_pool_backward(const std::vector<int>& argmax, const Tensor& dpooled, Tensor& dtokens) {
  for (std::size_t c = 0; c < argmax.size(); ++c) dtokens.row(argmax[c])[c] += dpooled[c];
}

// ---------------------------------------------------------------------------

Tensor film(const Tensor& z, const Tensor& scale, const Tensor& shift) {
  require_same_shape(z, scale, "film");
  require_same_shape(z, shift, "film");
  Tensor y(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = scale[i] * z[i] + shift[i];
  return y;
}

void film_backward(const Tensor& z, const Tensor& scale, const Tensor& dy, Tensor* dz, Tensor* dscale, Tensor* dshift) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (dz != nullptr) (*dz)[i] += dy[i] * scale[i];
    if (dscale != nullptr) (*dscale)[i] += dy[i] * z[i];
    if (dshift != nullptr) (*dshift)[i] += dy[i];
  }
}

// ---------------------------------------------------------------------------

Tensor multi_head_cross_attention(const Tensor& query, const Tensor& kv, const AttentionWeights& w, int heads,
                                  AttentionCache* cache) {
  const int hidden = query.cols();
  const int n = kv.rows();
  if (n == 0 || kv.empty()) throw std::invalid_argument("multi_head_cross_attention: empty key/value set");
  if (heads <= 0 || hidden != heads * kHeadDim || kv.cols() != hidden || query.rows() != 1) {
    throw std::invalid_argument("multi_head_cross_attention: hidden dim must equal heads * 16");
  }
  Tensor q = linear(query, w.wq, w.bq);
  Tensor k = linear(kv, w.wk, w.bk);
  Tensor v = linear(kv, w.wv, w.bv);
  Tensor probs = Tensor::matrix(heads, n);
  Tensor context = Tensor::matrix(1, hidden);
  const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(kHeadDim)));
  for (int h = 0; h < heads; ++h) {
    const int off = h * kHeadDim;
    Real* p = probs.row(h);
    Real max_score = -std::numeric_limits<Real>::infinity();
    for (int j = 0; j < n; ++j) {
      p[j] = dot(q.data() + off, k.row(j) + off, kHeadDim) * inv_sqrt;
      max_score = std::max(max_score, p[j]);
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      p[j] = std::exp(p[j] - max_score);
      denom += p[j];
    }
    const Real inv_denom = static_cast<Real>(1.0 / denom);
    Real* ctx = context.data() + off;
    for (int j = 0; j < n; ++j) {
      p[j] *= inv_denom;
      axpy(p[j], v.row(j) + off, ctx, kHeadDim);
    }
  }
  Tensor out = linear(context, w.wo, w.bo);
  if (cache != nullptr) {
    cache->query = query;
    cache->kv = kv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return out;
}

void multi_head_cross_attention_backward(const AttentionCache& c, const AttentionWeights& w, int heads,
                                         const Tensor& dout, Tensor* dquery, Tensor* dkv, const AttentionGrads& g) {
  const int hidden = c.query.cols();
  const int n = c.kv.rows();
  const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(kHeadDim)));
  Tensor dcontext = linear_backward(c.context, w.wo, dout, g.wo, g.bo);
  Tensor dq = Tensor::matrix(1, hidden);
  Tensor dk = Tensor::matrix(n, hidden);
  Tensor dv = Tensor::matrix(n, hidden);
  std::vector<Real> dp(static_cast<std::size_t>(n));
  for (int h = 0; h < heads; ++h) {
    const int off = h * kHeadDim;
    const Real* p = c.probs.row(h);
    const Real* dctx = dcontext.data() + off;
    double weighted = 0.0;
    for (int j = 0; j < n; ++j) {
      axpy(p[j], dctx, dv.row(j) + off, kHeadDim);
      dp[static_cast<std::size_t>(j)] = dot(dctx, c.v.row(j) + off, kHeadDim);
      weighted += static_cast<double>(p[j]) * dp[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < n; ++j) {
      const Real ds = static_cast<Real>(p[j] * (dp[static_cast<std::size_t>(j)] - weighted)) * inv_sqrt;
      axpy(ds, c.k.row(j) + off, dq.data() + off, kHeadDim);
      axpy(ds, c.q.data() + off, dk.row(j) + off, kHeadDim);
    }
  }
  Tensor dquery_local = linear_backward(c.query, w.wq, dq, g.wq, g.bq);
  Tensor dkv_k = linear_backward(c.kv, w.wk, dk, g.wk, g.bk);
  Tensor dkv_v = linear_backward(c.kv, w.wv, dv, g.wv, g.bv);
  if (dquery != nullptr) dquery->add_(dquery_local);
  if (dkv != nullptr) {
    dkv->add_(dkv_k);
    dkv->add_(dkv_v);
  }
}

// ---------------------------------------------------------------------------

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng, double init_scale,
               bool use_bias)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".weight", {in, out});
  if (use_bias) {
    bias_ = &store.add(name + ".bias", {out});
  } else {
    zero_bias_ = Tensor({out});
  }
  kaiming_uniform(weight_->value, in, rng, init_scale);
}

Parameter& Linear::bias() const {
  if (bias_ == nullptr) throw std::logic_error("Linear::bias: layer has no bias");
  return *bias_;
}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight_->value, bias_value()); }

Tensor Linear::backward(const Tensor& x, const Tensor& dy) const {
  weight_->has_grad = true;
  if (bias_ != nullptr) bias_->has_grad = true;
  return linear_backward(x, weight_->value, dy, &weight_->grad, bias_ != nullptr ? &bias_->grad : nullptr);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim) {
  scale_ = &store.add(name + ".scale", {dim});
  shift_ = &store.add(name + ".shift", {dim});
  scale_->value.fill(Real(1));
}

Tensor LayerNorm::forward(const Tensor& x, LayerNormCache* cache) const {
  return layer_norm(x, scale_->value, shift_->value, cache);
}

Tensor LayerNorm::backward(const LayerNormCache& cache, const Tensor& dy) const {
  scale_->has_grad = true;
  shift_->has_grad = true;
  return layer_norm_backward(cache, scale_->value, dy, &scale_->grad, &shift_->grad);
}

MLPBlock::MLPBlock(ParamStore& store, const std::string& name, int in, int hidden, int out, std::mt19937_64& rng,
                   double output_init_scale)
    : first_(store, name + ".fc1", in, hidden, rng),
      norm_(store, name + ".norm", hidden),
      second_(store, name + ".fc2", hidden, out, rng, output_init_scale) {}

Tensor MLPBlock::forward(const Tensor& x, Cache* cache) const {
  Tensor h = first_.forward(x);
  Tensor a = norm_.forward(h, cache != nullptr ? &cache->norm : nullptr);
  relu_inplace(a);
  Tensor y = second_.forward(a);
  if (cache != nullptr) {
    cache->input = x;
    cache->activated = std::move(a);
  }
  return y;
}

Tensor MLPBlock::backward(const Cache& cache, const Tensor& dy) const {
  Tensor da = second_.backward(cache.activated, dy);
  relu_backward_inplace(cache.activated, da);
  Tensor dh = norm_.backward(cache.norm, da);
  return first_.backward(cache.input, dh);
}

CrossAttention::CrossAttention(ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng)
    : heads_(hidden / kHeadDim),
      q_(store, name + ".q", hidden, hidden, rng, std::sqrt(0.5)),
      // Key projection has no bias.
      k_(store, name + ".k", hidden, hidden, rng, std::sqrt(0.5), false),
      v_(store, name + ".v", hidden, hidden, rng, std::sqrt(0.5)),
      o_(store, name + ".o", hidden, hidden, rng, std::sqrt(0.5)) {
  if (hidden % kHeadDim != 0) throw std::invalid_argument("CrossAttention: hidden must be a multiple of 16");
}

AttentionWeights CrossAttention::weights() const {
  return {q_.weight().value, q_.bias_value(), k_.weight().value, k_.bias_value(),
          v_.weight().value, v_.bias_value(), o_.weight().value, o_.bias_value()};
}

Tensor CrossAttention::forward(const Tensor& query, const Tensor& kv, AttentionCache* cache) const {
  return multi_head_cross_attention(query, kv, weights(), heads_, cache);
}

void CrossAttention::backward(const AttentionCache& cache, const Tensor& dout, Tensor* dquery, Tensor* dkv) const {
  for (const Linear* l : {&q_, &k_, &v_, &o_}) {
    l->weight().has_grad = true;
    if (l->has_bias()) l->bias().has_grad = true;
  }
  AttentionGrads g{&q_.weight().grad, &q_.bias().grad, &k_.weight().grad, nullptr,
                   &v_.weight().grad, &v_.bias().grad, &o_.weight().grad, &o_.bias().grad};
  multi_head_cross_attention_backward(cache, weights(), heads_, dout, dquery, dkv, g);
}

}  // namespace instasim::nn
