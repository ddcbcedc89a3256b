#include "ita/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ita/errors.hpp"

namespace ita {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::string layer_name(std::size_t l, const char* suffix) {
  return "layer" + std::to_string(l) + "." + suffix;
}

void softmax_row(double* row, std::size_t n) {
  double m = row[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, row[j]);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - m);
    z += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= z;
}

void layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& bias,
                        double eps, Matrix& xhat, std::vector<double>& inv_sigma,
                        Matrix& y) {
  const std::size_t n = x.rows(), d = x.cols();
  xhat.resize(n, d);
  y.resize(n, d);
  inv_sigma.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row_ptr(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xi[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    double* xh = xhat.row_ptr(i);
    double* yi = y.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (xi[j] - mean) * is;
      yi[j] = gain(0, j) * xh[j] + bias(0, j);
    }
  }
}

// dx for y = gain * xhat + bias, where xhat = (x - mean) / sigma. The mean
// and sigma terms make each row's gradient couple across columns:
//   dx = inv_sigma * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
void layer_norm_backward(const Matrix& xhat, const std::vector<double>& inv_sigma,
                         const Matrix& gain, const Matrix& dy, Matrix& dx,
                         Matrix& dgain, Matrix& dbias) {
  const std::size_t n = xhat.rows(), d = xhat.cols();
  dx.resize(n, d);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xh = xhat.row_ptr(i);
    const double* dyi = dy.row_ptr(i);
    double* dxi = dx.row_ptr(i);
    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dxh = dyi[j] * gain(0, j);
      dxi[j] = dxh;
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh[j];
      dgain(0, j) += dyi[j] * xh[j];
      dbias(0, j) += dyi[j];
    }
    for (std::size_t j = 0; j < d; ++j)
      dxi[j] = inv_sigma[i] * (dxi[j] - sum_dxh * inv_d - xh[j] * sum_dxh_xh * inv_d);
  }
}

void add_col_sums(const Matrix& m, Matrix& bias_grad) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* mi = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) bias_grad(0, j) += mi[j];
  }
}

void check_ids(const EncoderConfig& cfg, const std::vector<std::size_t>& ids) {
  if (ids.empty()) throw DataError("encoder input is empty");
  if (ids.size() > cfg.max_positions)
    throw DataError("sequence length " + std::to_string(ids.size()) +
                    " exceeds max_positions " + std::to_string(cfg.max_positions));
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] >= cfg.vocab_size)
      throw DataError("token id " + std::to_string(ids[i]) + " at position " +
                      std::to_string(i) + " is outside the vocabulary");
}

// Shared forward pass; fills trace when one is supplied.
Matrix forward_impl(const EncoderConfig& cfg, const ParameterSet& params,
                    const std::vector<std::size_t>& ids, EncoderTrace* trace) {
  validate_config(cfg);
  check_ids(cfg, ids);
  const std::size_t n = ids.size();
  const std::size_t d = cfg.d_model;
  const std::size_t num_heads = cfg.heads;
  const std::size_t d_head = d / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d_head));

  const Matrix& tok = params.at("embed.token");
  const Matrix& pos = params.at("embed.pos");
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* t = tok.row_ptr(ids[i]);
    const double* p = pos.row_ptr(i);
    double* xi = x.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) xi[j] = t[j] + p[j];
  }
  if (trace) {
    trace->token_ids = ids;
    trace->layers.resize(cfg.layers);
  }

  LayerTrace scratch;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerTrace& lt = trace ? trace->layers[l] : scratch;
    lt.x_in = x;

    matmul(lt.x_in, params.at(layer_name(l, "attn.wq")), lt.q);
    add_row_bias(lt.q, params.at(layer_name(l, "attn.bq")));
    matmul(lt.x_in, params.at(layer_name(l, "attn.wk")), lt.k);
    add_row_bias(lt.k, params.at(layer_name(l, "attn.bk")));
    matmul(lt.x_in, params.at(layer_name(l, "attn.wv")), lt.v);
    add_row_bias(lt.v, params.at(layer_name(l, "attn.bv")));

    lt.attn.assign(num_heads, Matrix());
    lt.head_concat.resize(n, d);
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t off = h * d_head;
      Matrix& a = lt.attn[h];
      a.resize(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        double* ai = a.row_ptr(i);
        const double* qi = lt.q.row_ptr(i) + off;
        for (std::size_t j = 0; j < n; ++j)
          ai[j] = dot(qi, lt.k.row_ptr(j) + off, d_head) * inv_sqrt_dh;
        softmax_row(ai, n);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row_ptr(i);
        double* oi = lt.head_concat.row_ptr(i) + off;
        for (std::size_t c = 0; c < d_head; ++c) oi[c] = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double w = ai[j];
          if (w == 0.0) continue;
          const double* vj = lt.v.row_ptr(j) + off;
          for (std::size_t c = 0; c < d_head; ++c) oi[c] += w * vj[c];
        }
      }
    }

    Matrix attn_out;
    matmul(lt.head_concat, params.at(layer_name(l, "attn.wo")), attn_out);
    add_row_bias(attn_out, params.at(layer_name(l, "attn.bo")));
    attn_out.add_inplace(lt.x_in);  // residual

    layer_norm_forward(attn_out, params.at(layer_name(l, "ln1.gain")),
                       params.at(layer_name(l, "ln1.bias")), cfg.ln_eps, lt.xhat1,
                       lt.inv_sigma1, lt.y1);

    matmul(lt.y1, params.at(layer_name(l, "ff.w1")), lt.ff_pre);
    add_row_bias(lt.ff_pre, params.at(layer_name(l, "ff.b1")));
    lt.ff_act.resize(n, cfg.d_ff);
    for (std::size_t i = 0; i < lt.ff_pre.size(); ++i)
      lt.ff_act.values()[i] = gelu(lt.ff_pre.values()[i]);

    Matrix ff_out;
    matmul(lt.ff_act, params.at(layer_name(l, "ff.w2")), ff_out);
    add_row_bias(ff_out, params.at(layer_name(l, "ff.b2")));
    ff_out.add_inplace(lt.y1);  // residual

    Matrix ln2_y;
    layer_norm_forward(ff_out, params.at(layer_name(l, "ln2.gain")),
                       params.at(layer_name(l, "ln2.bias")), cfg.ln_eps, lt.xhat2,
                       lt.inv_sigma2, ln2_y);
    x = std::move(ln2_y);
  }

  if (trace) trace->output = x;
  return x;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_prime(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

void validate_config(const EncoderConfig& cfg) {
  if (cfg.vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (cfg.label_count == 0) throw ConfigError("label_count must be positive");
  if (cfg.d_model == 0 || cfg.heads == 0 || cfg.d_model % cfg.heads != 0)
    throw ConfigError("d_model must be a positive multiple of heads");
  if (cfg.d_ff == 0) throw ConfigError("d_ff must be positive");
  if (cfg.max_positions == 0) throw ConfigError("max_positions must be positive");
}

void register_parameters(const EncoderConfig& cfg, ParameterSet& params) {
  validate_config(cfg);
  const std::size_t d = cfg.d_model, f = cfg.d_ff, labels = cfg.label_count;
  params.add("embed.token", cfg.vocab_size, d);
  params.add("embed.pos", cfg.max_positions, d);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    params.add(layer_name(l, "attn.wq"), d, d);
    params.add(layer_name(l, "attn.bq"), 1, d);
    params.add(layer_name(l, "attn.wk"), d, d);
    params.add(layer_name(l, "attn.bk"), 1, d);
    params.add(layer_name(l, "attn.wv"), d, d);
    params.add(layer_name(l, "attn.bv"), 1, d);
    params.add(layer_name(l, "attn.wo"), d, d);
    params.add(layer_name(l, "attn.bo"), 1, d);
    params.add(layer_name(l, "ln1.gain"), 1, d);
    params.add(layer_name(l, "ln1.bias"), 1, d);
    params.add(layer_name(l, "ff.w1"), d, f);
    params.add(layer_name(l, "ff.b1"), 1, f);
    params.add(layer_name(l, "ff.w2"), f, d);
    params.add(layer_name(l, "ff.b2"), 1, d);
    params.add(layer_name(l, "ln2.gain"), 1, d);
    params.add(layer_name(l, "ln2.bias"), 1, d);
  }
  params.add("emit.weight", d, labels);
  params.add("emit.bias", 1, labels);
  params.add("crf.transitions", labels, labels);
  params.add("crf.start", 1, labels);
  params.add("crf.end", 1, labels);
}

void init_parameters(const EncoderConfig& cfg, ParameterSet& params, Rng& rng) {
  validate_config(cfg);
  for (std::size_t i = 0; i < params.count(); ++i) {
    NamedTensor& t = params.item(i);
    Rng sub = rng.fork(t.name);
    Matrix& m = t.value;
    if (t.name.starts_with("crf.")) {
      m.fill(0.0);
    } else if (t.name.starts_with("embed.")) {
      for (double& v : m.values()) v = sub.uniform(-0.1, 0.1);
    } else if (t.name.ends_with(".gain")) {
      m.fill(1.0);
    } else if (m.rows() == 1) {
      m.fill(0.0);  // every remaining 1 x k tensor is a bias
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (double& v : m.values()) v = sub.uniform(-limit, limit);
    }
  }
}

Matrix encode(const EncoderConfig& cfg, const ParameterSet& params,
              const std::vector<std::size_t>& ids) {
  return forward_impl(cfg, params, ids, nullptr);
}

EncoderTrace encode_trace(const EncoderConfig& cfg, const ParameterSet& params,
                          const std::vector<std::size_t>& ids) {
  EncoderTrace trace;
  forward_impl(cfg, params, ids, &trace);
  return trace;
}

void encoder_backward(const EncoderConfig& cfg, const ParameterSet& params,
                      const EncoderTrace& trace, const Matrix& d_output,
                      ParameterSet& grads) {
  const std::size_t n = trace.token_ids.size();
  const std::size_t d = cfg.d_model;
  const std::size_t num_heads = cfg.heads;
  const std::size_t d_head = d / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d_head));

  Matrix dx = d_output;  // gradient flowing toward the embeddings
  for (std::size_t li = cfg.layers; li-- > 0;) {
    const LayerTrace& lt = trace.layers[li];

    // Second layer norm.
    Matrix d_ff_out;
    layer_norm_backward(lt.xhat2, lt.inv_sigma2, params.at(layer_name(li, "ln2.gain")),
                        dx, d_ff_out, grads.at(layer_name(li, "ln2.gain")),
                        grads.at(layer_name(li, "ln2.bias")));

    // ff_out = ff_act * w2 + b2 + y1 (residual).
    Matrix dy1 = d_ff_out;
    Matrix d_act;
    matmul_a_bt(d_ff_out, params.at(layer_name(li, "ff.w2")), d_act);
    matmul_at_b_acc(lt.ff_act, d_ff_out, grads.at(layer_name(li, "ff.w2")));
    add_col_sums(d_ff_out, grads.at(layer_name(li, "ff.b2")));

    Matrix d_pre(n, cfg.d_ff);
    for (std::size_t i = 0; i < d_pre.size(); ++i)
      d_pre.values()[i] = d_act.values()[i] * gelu_prime(lt.ff_pre.values()[i]);

    Matrix dy1_ff;
    matmul_a_bt(d_pre, params.at(layer_name(li, "ff.w1")), dy1_ff);
    dy1.add_inplace(dy1_ff);
    matmul_at_b_acc(lt.y1, d_pre, grads.at(layer_name(li, "ff.w1")));
    add_col_sums(d_pre, grads.at(layer_name(li, "ff.b1")));

    // First layer norm.
    Matrix d_attn_res;
    layer_norm_backward(lt.xhat1, lt.inv_sigma1, params.at(layer_name(li, "ln1.gain")),
                        dy1, d_attn_res, grads.at(layer_name(li, "ln1.gain")),
                        grads.at(layer_name(li, "ln1.bias")));

    // attn_res = head_concat * wo + bo + x_in (residual).
    Matrix dx_in = d_attn_res;
    Matrix d_concat;
    matmul_a_bt(d_attn_res, params.at(layer_name(li, "attn.wo")), d_concat);
    matmul_at_b_acc(lt.head_concat, d_attn_res, grads.at(layer_name(li, "attn.wo")));
    add_col_sums(d_attn_res, grads.at(layer_name(li, "attn.bo")));

    Matrix dq(n, d), dk(n, d), dv(n, d);
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t off = h * d_head;
      const Matrix& a = lt.attn[h];
      // dA = dO V^T; dV += A^T dO (per head slice).
      Matrix da(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        const double* doi = d_concat.row_ptr(i) + off;
        double* dai = da.row_ptr(i);
        for (std::size_t j = 0; j < n; ++j)
          dai[j] = dot(doi, lt.v.row_ptr(j) + off, d_head);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row_ptr(i);
        const double* doi = d_concat.row_ptr(i) + off;
        for (std::size_t j = 0; j < n; ++j) {
          const double w = ai[j];
          if (w == 0.0) continue;
          double* dvj = dv.row_ptr(j) + off;
          for (std::size_t c = 0; c < d_head; ++c) dvj[c] += w * doi[c];
        }
      }
      // Softmax rows: dS = A * (dA - rowsum(dA * A)).
      for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row_ptr(i);
        double* dai = da.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += dai[j] * ai[j];
        for (std::size_t j = 0; j < n; ++j) dai[j] = ai[j] * (dai[j] - s);
      }
      // S = Q K^T / sqrt(d_head): dQ += dS K / sqrt, dK += dS^T Q / sqrt.
      for (std::size_t i = 0; i < n; ++i) {
        const double* dai = da.row_ptr(i);
        double* dqi = dq.row_ptr(i) + off;
        const double* qi = lt.q.row_ptr(i) + off;
        for (std::size_t j = 0; j < n; ++j) {
          const double g = dai[j] * inv_sqrt_dh;
          if (g == 0.0) continue;
          const double* kj = lt.k.row_ptr(j) + off;
          double* dkj = dk.row_ptr(j) + off;
          for (std::size_t c = 0; c < d_head; ++c) {
            dqi[c] += g * kj[c];
            dkj[c] += g * qi[c];
          }
        }
      }
    }

    // Q/K/V projections back to the layer input.
    Matrix dx_proj;
    matmul_a_bt(dq, params.at(layer_name(li, "attn.wq")), dx_proj);
    dx_in.add_inplace(dx_proj);
    matmul_a_bt(dk, params.at(layer_name(li, "attn.wk")), dx_proj);
    dx_in.add_inplace(dx_proj);
    matmul_a_bt(dv, params.at(layer_name(li, "attn.wv")), dx_proj);
    dx_in.add_inplace(dx_proj);
    matmul_at_b_acc(lt.x_in, dq, grads.at(layer_name(li, "attn.wq")));
    matmul_at_b_acc(lt.x_in, dk, grads.at(layer_name(li, "attn.wk")));
    matmul_at_b_acc(lt.x_in, dv, grads.at(layer_name(li, "attn.wv")));
    add_col_sums(dq, grads.at(layer_name(li, "attn.bq")));
    add_col_sums(dk, grads.at(layer_name(li, "attn.bk")));
    add_col_sums(dv, grads.at(layer_name(li, "attn.bv")));

    dx = std::move(dx_in);
  }

  Matrix& d_tok = grads.at("embed.token");
  Matrix& d_pos = grads.at("embed.pos");
  for (std::size_t i = 0; i < n; ++i) {
    const double* dxi = dx.row_ptr(i);
    double* dt = d_tok.row_ptr(trace.token_ids[i]);
    double* dp = d_pos.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) {
      dt[j] += dxi[j];
      dp[j] += dxi[j];
    }
  }
}

Matrix emissions(const ParameterSet& params, const Matrix& hidden,
                 std::size_t sentence_len) {
  if (sentence_len == 0 || sentence_len > hidden.rows())
    throw DataError("emission projection needs 1 <= sentence_len <= hidden rows");
  const Matrix& w = params.at("emit.weight");
  const Matrix& b = params.at("emit.bias");
  Matrix out(sentence_len, w.cols());
  for (std::size_t i = 0; i < sentence_len; ++i) {
    const double* hi = hidden.row_ptr(i);
    double* oi = out.row_ptr(i);
    for (std::size_t l = 0; l < w.cols(); ++l) oi[l] = b(0, l);
    for (std::size_t j = 0; j < w.rows(); ++j) {
      const double hv = hi[j];
      if (hv == 0.0) continue;
      const double* wj = w.row_ptr(j);
      for (std::size_t l = 0; l < w.cols(); ++l) oi[l] += hv * wj[l];
    }
  }
  return out;
}

void emissions_backward(const ParameterSet& params, const Matrix& hidden,
                        std::size_t sentence_len, const Matrix& d_emissions,
                        Matrix& d_hidden, ParameterSet& grads) {
  if (d_emissions.rows() != sentence_len)
    throw DataError("emission gradient shape does not match sentence length");
  const Matrix& w = params.at("emit.weight");
  Matrix& dw = grads.at("emit.weight");
  Matrix& db = grads.at("emit.bias");
  if (d_hidden.rows() != hidden.rows() || d_hidden.cols() != hidden.cols())
    d_hidden.resize(hidden.rows(), hidden.cols());
  for (std::size_t i = 0; i < sentence_len; ++i) {
    const double* de = d_emissions.row_ptr(i);
    const double* hi = hidden.row_ptr(i);
    double* dh = d_hidden.row_ptr(i);
    for (std::size_t l = 0; l < w.cols(); ++l) db(0, l) += de[l];
    for (std::size_t j = 0; j < w.rows(); ++j) {
      const double* wj = w.row_ptr(j);
      double* dwj = dw.row_ptr(j);
      double acc = 0.0;
      for (std::size_t l = 0; l < w.cols(); ++l) {
        acc += de[l] * wj[l];
        dwj[l] += hi[j] * de[l];
      }
      dh[j] += acc;
    }
  }
}

double representation_distance(const Matrix& a, const Matrix& b, std::size_t n) {
  if (n == 0 || n > a.rows() || n > b.rows() || a.cols() != b.cols())
    throw DataError("representation distance needs n rows present in both matrices");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row_ptr(i);
    const double* bi = b.row_ptr(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double c = ai[j] - bi[j];
      sq += c * c;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(n);
}

}  // namespace ita
