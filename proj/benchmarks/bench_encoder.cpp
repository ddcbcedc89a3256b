#include <benchmark/benchmark.h>

#include <vector>

#include "ita/encoder.hpp"
#include "ita/rng.hpp"

namespace {

struct Model {
  ita::EncoderConfig cfg;
  ita::ParameterSet params;
  std::vector<std::size_t> ids;
};

Model make_model(std::size_t n) {
  Model m;
  m.cfg.vocab_size = 512;
  m.cfg.label_count = 9;
  m.cfg.d_model = 64;
  m.cfg.d_ff = 128;
  m.cfg.layers = 2;
  m.cfg.heads = 4;
  m.cfg.max_positions = 256;
  ita::register_parameters(m.cfg, m.params);
  ita::Rng rng(7);
  ita::init_parameters(m.cfg, m.params, rng);
  m.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.ids[i] = rng.next_below(m.cfg.vocab_size);
  return m;
}

void bench_encode(benchmark::State& state) {
  const Model m = make_model(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    ita::Matrix h = ita::encode(m.cfg, m.params, m.ids);
    benchmark::DoNotOptimize(h.data());
  }
}

void bench_encode_and_backward(benchmark::State& state) {
  const Model m = make_model(static_cast<std::size_t>(state.range(0)));
  ita::ParameterSet grads = m.params.zeros_like();
  for (auto _ : state) {
    ita::EncoderTrace trace = ita::encode_trace(m.cfg, m.params, m.ids);
    ita::Matrix d_out(trace.output.rows(), trace.output.cols(), 1.0);
    grads.set_zero();
    ita::encoder_backward(m.cfg, m.params, trace, d_out, grads);
    benchmark::DoNotOptimize(grads.count());
  }
}

}  // namespace

BENCHMARK(bench_encode)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(bench_encode_and_backward)->Arg(16)->Arg(64)->Arg(256);
