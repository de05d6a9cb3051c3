#ifndef INSTASIM_NN_LAYERS_HPP_
#define INSTASIM_NN_LAYERS_HPP_

#include <random>
#include <string>
#include <vector>

#include "instasim/nn/param_store.hpp"
#include "instasim/nn/tensor.hpp"

namespace instasim::nn {

inline constexpr int kHeadDim = 16;
inline constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Primitive ops. Rows are samples/tokens, the last axis is features. Backward
// functions accumulate (+=) into the gradient tensors they are given.

// y = x W + b with W stored [in, out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor linear_backward(const Tensor& x, const Tensor& weight, const Tensor& dy, Tensor* dweight,
                       Tensor* dbias);

struct LayerNormCache {
  Tensor normalized;
  std::vector<Real> inv_std;
};
Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& shift, LayerNormCache* cache);
Tensor layer_norm_backward(const LayerNormCache& cache, const Tensor& scale, const Tensor& dy,
                           Tensor* dscale, Tensor* dshift);

void relu_inplace(Tensor& x);
// Masks dy where the ReLU output was zero.
void relu_backward_inplace(const Tensor& output, Tensor& dy);

struct MaxPoolResult {
  Tensor pooled;            // [1, d]
  std::vector<int> argmax;  // per feature, lowest index on ties
};
// Element-wise max over the rows of `tokens`; throws on an empty set.
MaxPoolResult max_pool_set(const Tensor& tokens);
// Routes the gradient to the argmax rows only.
void max_pool_backward(const std::vector<int>& argmax, const Tensor& dpooled, Tensor& dtokens);

// scale (.) z + shift
Tensor film(const Tensor& z, const Tensor& scale, const Tensor& shift);
void film_backward(const Tensor& z, const Tensor& scale, const Tensor& dy, Tensor* dz, Tensor* dscale,
                   Tensor* dshift);

struct AttentionWeights {
  const Tensor& wq;
  const Tensor& bq;
  const Tensor& wk;
  const Tensor& bk;
  const Tensor& wv;
  const Tensor& bv;
  const Tensor& wo;
  const Tensor& bo;
};

struct AttentionGrads {
  Tensor* wq = nullptr;
  Tensor* bq = nullptr;
  Tensor* wk = nullptr;
  Tensor* bk = nullptr;
  Tensor* wv = nullptr;
  Tensor* bv = nullptr;
  Tensor* wo = nullptr;
  Tensor* bo = nullptr;
};

struct AttentionCache {
  Tensor query;    // [1, H]
  Tensor kv;       // [n, H]
  Tensor q;        // [1, H]
  Tensor k;        // [n, H]
  Tensor v;        // [n, H]
  Tensor probs;    // [heads, n]
  Tensor context;  // [1, H]
};

// Scaled dot-product attention of one query token over a key/value set,
// 16 channels per head. Throws on an empty set or hidden != heads * 16.
Tensor multi_head_cross_attention(const Tensor& query, const Tensor& kv, const AttentionWeights& w,
                                  int heads, AttentionCache* cache);
void multi_head_cross_attention_backward(const AttentionCache& cache, const AttentionWeights& w,
                                         int heads, const Tensor& dout, Tensor* dquery, Tensor* dkv,
                                         const AttentionGrads& grads);

// ---------------------------------------------------------------------------
// Parameterised modules. Forward is const and thread-safe; backward writes
// into the owning ParamStore's gradients and must not run concurrently.

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng,
         double init_scale = 1.0, bool use_bias = true);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy) const;

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }
  Parameter& weight() const { return *weight_; }
  // Throws for a bias-free layer.
  Parameter& bias() const;
  bool has_bias() const { return bias_ != nullptr; }
  const Tensor& bias_value() const { return bias_ != nullptr ? bias_->value : zero_bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  Tensor zero_bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim);

  Tensor forward(const Tensor& x, LayerNormCache* cache) const;
  Tensor backward(const LayerNormCache& cache, const Tensor& dy) const;

 private:
  Parameter* scale_ = nullptr;
  Parameter* shift_ = nullptr;
};

// linear -> layer norm -> ReLU -> linear
class MLPBlock {
 public:
  struct Cache {
    Tensor input;
    LayerNormCache norm;
    Tensor activated;
  };

  MLPBlock() = default;
  MLPBlock(ParamStore& store, const std::string& name, int in, int hidden, int out,
           std::mt19937_64& rng, double output_init_scale = 1.0);

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Cache& cache, const Tensor& dy) const;

  int in_dim() const { return first_.in_dim(); }
  int out_dim() const { return second_.out_dim(); }
  const Linear& output_layer() const { return second_; }

 private:
  Linear first_;
  LayerNorm norm_;
  Linear second_;
};

class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(ParamStore& store, const std::string& name, int hidden, std::mt19937_64& rng);

  Tensor forward(const Tensor& query, const Tensor& kv, AttentionCache* cache = nullptr) const;
  void backward(const AttentionCache& cache, const Tensor& dout, Tensor* dquery, Tensor* dkv) const;

  int heads() const { return heads_; }

 private:
  AttentionWeights weights() const;

  int heads_ = 0;
  Linear q_, k_, v_, o_;
};

}  // namespace instasim::nn

#endif  // INSTASIM_NN_LAYERS_HPP_
