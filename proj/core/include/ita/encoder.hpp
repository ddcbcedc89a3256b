#pragma once

#include <cstddef>
#include <vector>

#include "ita/matrix.hpp"
#include "ita/params.hpp"
#include "ita/rng.hpp"

namespace ita {

// Dimensions of the token encoder plus the emission projection and CRF
// tables that hang off it. One ParameterSet holds every trainable tensor.
struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t label_count = 0;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t max_positions = 256;
  double ln_eps = 1e-5;
};

// Per-layer activations cached on the forward pass and reused verbatim by
// the backward pass.
struct LayerTrace {
  Matrix x_in;                     // layer input, n x d
  Matrix q, k, v;                  // projected queries/keys/values, n x d
  std::vector<Matrix> attn;        // per-head row-stochastic weights, n x n
  Matrix head_concat;              // concatenated head outputs, n x d
  Matrix xhat1;                    // first layer norm, normalized activations
  std::vector<double> inv_sigma1;  // 1 / sqrt(var + eps) per row
  Matrix y1;                       // first layer norm output (= FF input)
  Matrix ff_pre;                   // y1 * w1 + b1, n x d_ff
  Matrix ff_act;                   // gelu(ff_pre)
  Matrix xhat2;                    // second layer norm internals
  std::vector<double> inv_sigma2;
};

struct EncoderTrace {
  std::vector<std::size_t> token_ids;
  std::vector<LayerTrace> layers;
  Matrix output;                   // final hidden states, n x d
};

// Exact GELU x * Phi(x) and its derivative Phi(x) + x * phi(x).
double gelu(double x);
double gelu_prime(double x);

// Throws ConfigError on impossible dimensions (zero sizes, heads not
// dividing d_model, ...).
void validate_config(const EncoderConfig& cfg);

// Creates every tensor of the model, zero-filled, in a fixed order.
void register_parameters(const EncoderConfig& cfg, ParameterSet& params);

// Embeddings uniform in [-0.1, 0.1], projection weights Glorot uniform,
// layer-norm gain 1 / bias 0, all other biases and the CRF tables zero.
// Each tensor draws from rng.fork(name), so values do not depend on the
// registration order of unrelated tensors.
void init_parameters(const EncoderConfig& cfg, ParameterSet& params, Rng& rng);

// Hidden states for one id sequence (n x d). Throws DataError on empty
// input, out-of-range ids, or n > max_positions.
Matrix encode(const EncoderConfig& cfg, const ParameterSet& params,
              const std::vector<std::size_t>& ids);

// Same forward pass, keeping everything the backward pass needs.
EncoderTrace encode_trace(const EncoderConfig& cfg, const ParameterSet& params,
                          const std::vector<std::size_t>& ids);

// Accumulates d(loss)/d(parameters) into grads given d(loss)/d(trace.output).
void encoder_backward(const EncoderConfig& cfg, const ParameterSet& params,
                      const EncoderTrace& trace, const Matrix& d_output,
                      ParameterSet& grads);

// CRF emission scores for the first sentence_len rows of hidden: an
// (sentence_len x label_count) matrix hidden[0:m] * emit.weight + emit.bias.
Matrix emissions(const ParameterSet& params, const Matrix& hidden,
                 std::size_t sentence_len);

// Scatters emission gradients back onto the hidden states (rows past the
// sentence stay untouched) and accumulates emit.* gradients.
void emissions_backward(const ParameterSet& params, const Matrix& hidden,
                        std::size_t sentence_len, const Matrix& d_emissions,
                        Matrix& d_hidden, ParameterSet& grads);

// Mean L2 distance between the first n rows of two hidden-state matrices.
double representation_distance(const Matrix& a, const Matrix& b, std::size_t n);

}  // namespace ita
