#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ita/alignment.hpp"
#include "ita/corpus.hpp"
#include "ita/rng.hpp"

namespace {

ita::VisualContextRecord make_record(std::size_t objects, std::size_t captions) {
  ita::Rng rng(11);
  ita::VisualContextRecord rec;
  rec.image_id = "bench";
  for (std::size_t i = 0; i < objects; ++i) {
    ita::DetectedObject obj;
    obj.tag = "object" + std::to_string(i % 17);
    obj.confidence = rng.next_double();
    for (std::size_t a = 0; a < 5; ++a)
      obj.attributes.push_back({"attr" + std::to_string(a), rng.next_double()});
    rec.objects.push_back(std::move(obj));
  }
  for (std::size_t c = 0; c < captions; ++c) {
    std::string text;
    for (std::size_t w = 0; w < 24; ++w) text += "word" + std::to_string((c + w) % 31) + " ";
    rec.captions.push_back({text, 1.0 - 0.01 * static_cast<double>(c)});
  }
  rec.ocr_text = "SALE 50% OFF limited time only";
  return rec;
}

void bench_linearize_all(benchmark::State& state) {
  const ita::VisualContextRecord rec = make_record(static_cast<std::size_t>(state.range(0)), 8);
  const ita::AlignmentConfig cfg;
  for (auto _ : state) {
    std::vector<std::string> tokens = ita::linearize_all(rec, cfg);
    benchmark::DoNotOptimize(tokens.size());
  }
}

void bench_build_cross_modal(benchmark::State& state) {
  const ita::VisualContextRecord rec = make_record(40, 8);
  const ita::AlignmentConfig cfg;
  ita::LabeledSentence sentence;
  for (int i = 0; i < 12; ++i) {
    sentence.tokens.push_back("tok" + std::to_string(i));
    sentence.labels.push_back("O");
  }
  const std::vector<std::string> context = ita::linearize_all(rec, cfg);
  for (auto _ : state) {
    ita::CrossModalInput input = ita::build_cross_modal_input(sentence, context, cfg);
    benchmark::DoNotOptimize(input.tokens.size());
  }
}

}  // namespace

BENCHMARK(bench_linearize_all)->Arg(10)->Arg(40)->Arg(100);
BENCHMARK(bench_build_cross_modal);
