#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "ita/alignment.hpp"
#include "ita/corpus.hpp"
#include "ita/encoder.hpp"
#include "ita/params.hpp"

namespace ita {

// One typed entity span; token indices are inclusive on both ends.
struct Span {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

// Valid B..(I..)E runs and S singletons become spans. Malformed runs are
// dropped whole: a dangling B, an I/E without an opener, or a type change
// inside a run yields nothing for that run. Total on any label strings.
std::vector<Span> extract_spans(const std::vector<std::string>& labels);

// Inverse of extract_spans on valid input: writes BIOES tags over n tokens.
// Throws DataError when spans overlap or fall outside [0, n).
std::vector<std::string> render_bioes(const std::vector<Span>& spans, std::size_t n);

struct TypeMetrics {
  std::string type;
  double precision = 0.0;  // percentages
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold_count = 0;
  std::size_t pred_count = 0;
  std::size_t match_count = 0;
};

struct MetricReport {
  std::string view;        // "T" or "I+T"
  double precision = 0.0;  // micro, percentages
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold_count = 0;
  std::size_t pred_count = 0;
  std::size_t match_count = 0;
  std::vector<TypeMetrics> per_type;  // sorted by type name
};

// Exact-match micro precision/recall/F1 over parallel per-sentence span
// sets, plus per-type rows on the type-restricted sets. P is 0 with no
// predictions, R is 0 with no gold, F1 is 0 when P + R is 0.
MetricReport micro_prf(const std::vector<std::vector<Span>>& gold,
                       const std::vector<std::vector<Span>>& pred);

struct DualViewReport {
  MetricReport text;   // decoded from the sentence alone
  MetricReport cross;  // decoded from the cross-modal input
  double mean_representation_distance = 0.0;
  std::size_t missing_context_count = 0;  // sentences whose image id had no record
};

// Decodes every sentence on both views with the same parameters and scores
// both against gold. A missing context record degrades to an empty context.
DualViewReport dual_view_eval(const EncoderConfig& cfg, const ParameterSet& params,
                              const std::vector<LabeledSentence>& dataset,
                              const ContextStore& contexts, const AlignmentConfig& align,
                              const Vocabulary& vocab);

// Percentages formatted to two decimals, e.g. 66.666... -> "66.67".
std::string format_percent(double value);

// Aligned plain-text rendering of the metric rows; view restricts the
// output to "t" or "it" ("both" keeps the two sections).
std::string format_metric_table(const DualViewReport& report, const std::string& view = "both");

}  // namespace ita
