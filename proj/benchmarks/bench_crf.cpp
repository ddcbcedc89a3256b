#include <benchmark/benchmark.h>

#include <vector>

#include "ita/crf.hpp"
#include "ita/rng.hpp"

namespace {

struct Instance {
  ita::Matrix emissions;
  ita::CrfParams crf;
  std::vector<std::size_t> gold;
};

Instance make_instance(std::size_t n, std::size_t labels) {
  ita::Rng rng(42);
  Instance inst;
  inst.emissions.resize(n, labels);
  for (double& v : inst.emissions.values()) v = rng.uniform(-2.0, 2.0);
  inst.crf.transitions.resize(labels, labels);
  for (double& v : inst.crf.transitions.values()) v = rng.uniform(-2.0, 2.0);
  inst.crf.start.resize(1, labels);
  for (double& v : inst.crf.start.values()) v = rng.uniform(-2.0, 2.0);
  inst.crf.end.resize(1, labels);
  for (double& v : inst.crf.end.values()) v = rng.uniform(-2.0, 2.0);
  inst.gold.resize(n);
  for (std::size_t i = 0; i < n; ++i) inst.gold[i] = rng.next_below(labels);
  return inst;
}

void bench_chain_tables(benchmark::State& state) {
  const Instance inst = make_instance(static_cast<std::size_t>(state.range(0)),
                                      static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    ita::ChainTables tables = ita::chain_tables(inst.emissions, inst.crf);
    benchmark::DoNotOptimize(tables.log_z);
  }
}

void bench_nll_backward(benchmark::State& state) {
  const Instance inst = make_instance(static_cast<std::size_t>(state.range(0)),
                                      static_cast<std::size_t>(state.range(1)));
  const ita::ChainTables tables = ita::chain_tables(inst.emissions, inst.crf);
  for (auto _ : state) {
    ita::CrfGradients g = ita::nll_backward(inst.emissions, inst.crf, inst.gold, tables);
    benchmark::DoNotOptimize(g.d_emissions);
  }
}

void bench_viterbi(benchmark::State& state) {
  const Instance inst = make_instance(static_cast<std::size_t>(state.range(0)),
                                      static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    ita::ViterbiResult r = ita::viterbi(inst.emissions, inst.crf);
    benchmark::DoNotOptimize(r.score);
  }
}

void bench_cva_backward(benchmark::State& state) {
  const Instance inst = make_instance(static_cast<std::size_t>(state.range(0)),
                                      static_cast<std::size_t>(state.range(1)));
  const ita::ChainTables tables = ita::chain_tables(inst.emissions, inst.crf);
  const ita::Matrix teacher = ita::marginals_from_tables(tables);
  for (auto _ : state) {
    ita::CrfGradients g = ita::cva_backward(teacher, inst.emissions, inst.crf, tables);
    benchmark::DoNotOptimize(g.d_emissions);
  }
}

}  // namespace

BENCHMARK(bench_chain_tables)->Args({16, 9})->Args({64, 9})->Args({64, 17});
BENCHMARK(bench_nll_backward)->Args({16, 9})->Args({64, 9})->Args({64, 17});
BENCHMARK(bench_viterbi)->Args({16, 9})->Args({64, 9})->Args({64, 17});
BENCHMARK(bench_cva_backward)->Args({16, 9})->Args({64, 9})->Args({64, 17});
