#include "ita/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "ita/crf.hpp"
#include "ita/errors.hpp"
#include "ita/model.hpp"

namespace ita {
namespace {

bool typed_tag(const std::string& label, char head) {
  return label.size() >= 3 && label[0] == head && label[1] == '-';
}

double percent_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

std::vector<Span> extract_spans(const std::vector<std::string>& labels) {
  std::vector<Span> out;
  const std::size_t n = labels.size();
  std::size_t i = 0;
  while (i < n) {
    const std::string& lab = labels[i];
    if (typed_tag(lab, 'S')) {
      out.push_back(Span{lab.substr(2), i, i});
      ++i;
      continue;
    }
    if (typed_tag(lab, 'B')) {
      const std::string type = lab.substr(2);
      std::size_t j = i + 1;
      bool closed = false;
      while (j < n) {
        const std::string& next = labels[j];
        if (typed_tag(next, 'I') && next.compare(2, std::string::npos, type) == 0) {
          ++j;
          continue;
        }
        closed = typed_tag(next, 'E') && next.compare(2, std::string::npos, type) == 0;
        break;
      }
      if (closed) {
        out.push_back(Span{type, i, j});
        i = j + 1;
      } else {
        ++i;  // malformed run: drop the opener, rescan from the next token
      }
      continue;
    }
    ++i;  // O, or I/E with no opener
  }
  return out;
}

std::vector<std::string> render_bioes(const std::vector<Span>& spans, std::size_t n) {
  std::vector<std::string> labels(n, "O");
  std::vector<Span> sorted = spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  std::size_t last_end = 0;
  bool first = true;
  for (const Span& s : sorted) {
    if (s.start > s.end || s.end >= n)
      throw DataError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                      "] does not fit in " + std::to_string(n) + " tokens");
    if (!first && s.start <= last_end)
      throw DataError("overlapping spans at token " + std::to_string(s.start));
    if (s.start == s.end) {
      labels[s.start] = "S-" + s.type;
    } else {
      labels[s.start] = "B-" + s.type;
      for (std::size_t i = s.start + 1; i < s.end; ++i) labels[i] = "I-" + s.type;
      labels[s.end] = "E-" + s.type;
    }
    last_end = s.end;
    first = false;
  }
  return labels;
}

MetricReport micro_prf(const std::vector<std::vector<Span>>& gold,
                       const std::vector<std::vector<Span>>& pred) {
  if (gold.size() != pred.size())
    throw DataError("gold and predicted span lists cover different sentence counts");
  struct Counts {
    std::size_t gold = 0, pred = 0, match = 0;
  };
  Counts micro;
  std::map<std::string, Counts> by_type;  // ordered for deterministic rows
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::vector<Span> g = gold[s];
    std::vector<Span> p = pred[s];
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    for (const Span& sp : g) {
      ++micro.gold;
      ++by_type[sp.type].gold;
    }
    for (const Span& sp : p) {
      ++micro.pred;
      ++by_type[sp.type].pred;
    }
    // Multiset intersection: a gold span can satisfy only one prediction.
    std::size_t gi = 0, pi = 0;
    while (gi < g.size() && pi < p.size()) {
      if (g[gi] < p[pi]) {
        ++gi;
      } else if (p[pi] < g[gi]) {
        ++pi;
      } else {
        ++micro.match;
        ++by_type[p[pi].type].match;
        ++gi;
        ++pi;
      }
    }
  }
  MetricReport report;
  report.gold_count = micro.gold;
  report.pred_count = micro.pred;
  report.match_count = micro.match;
  report.precision = percent_ratio(micro.match, micro.pred);
  report.recall = percent_ratio(micro.match, micro.gold);
  report.f1 = f1_of(report.precision, report.recall);
  for (const auto& [type, c] : by_type) {
    TypeMetrics t;
    t.type = type;
    t.gold_count = c.gold;
    t.pred_count = c.pred;
    t.match_count = c.match;
    t.precision = percent_ratio(c.match, c.pred);
    t.recall = percent_ratio(c.match, c.gold);
    t.f1 = f1_of(t.precision, t.recall);
    report.per_type.push_back(std::move(t));
  }
  return report;
}

DualViewReport dual_view_eval(const EncoderConfig& cfg, const ParameterSet& params,
                              const std::vector<LabeledSentence>& dataset,
                              const ContextStore& contexts, const AlignmentConfig& align,
                              const Vocabulary& vocab) {
  DualViewReport report;
  const CrfParams crf = crf_from_params(params);
  std::vector<std::vector<Span>> gold, pred_text, pred_cross;
  gold.reserve(dataset.size());
  pred_text.reserve(dataset.size());
  pred_cross.reserve(dataset.size());
  double distance_sum = 0.0;

  for (const LabeledSentence& sentence : dataset) {
    if (sentence.image_id && !contexts.find(*sentence.image_id))
      ++report.missing_context_count;
    const SentenceViews views = build_views(sentence, contexts, align, vocab);
    const std::size_t n = views.sentence_len;

    const Matrix hidden_text = encode(cfg, params, views.text_ids);
    const Matrix hidden_cross = encode(cfg, params, views.cross_ids);
    distance_sum += representation_distance(hidden_text, hidden_cross, n);

    const ViterbiResult vt = viterbi(emissions(params, hidden_text, n), crf);
    const ViterbiResult vx = viterbi(emissions(params, hidden_cross, n), crf);
    std::vector<std::string> labels_t(n), labels_x(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels_t[i] = vocab.label_string(vt.labels[i]);
      labels_x[i] = vocab.label_string(vx.labels[i]);
    }
    gold.push_back(extract_spans(sentence.labels));
    pred_text.push_back(extract_spans(labels_t));
    pred_cross.push_back(extract_spans(labels_x));
  }

  report.text = micro_prf(gold, pred_text);
  report.text.view = "T";
  report.cross = micro_prf(gold, pred_cross);
  report.cross.view = "I+T";
  report.mean_representation_distance =
      dataset.empty() ? 0.0 : distance_sum / static_cast<double>(dataset.size());
  return report;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

namespace {

void append_report_rows(std::ostringstream& out, const MetricReport& r) {
  auto row = [&out](const std::string& view, const std::string& type, double p, double rec,
                    double f1, std::size_t support) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-6s %-8s %10s %10s %10s %10zu\n", view.c_str(),
                  type.c_str(), format_percent(p).c_str(), format_percent(rec).c_str(),
                  format_percent(f1).c_str(), support);
    out << buf;
  };
  row(r.view, "micro", r.precision, r.recall, r.f1, r.gold_count);
  for (const TypeMetrics& t : r.per_type)
    row(r.view, t.type, t.precision, t.recall, t.f1, t.gold_count);
}

}  // namespace

std::string format_metric_table(const DualViewReport& report, const std::string& view) {
  std::ostringstream out;
  char head[128];
  std::snprintf(head, sizeof(head), "%-6s %-8s %10s %10s %10s %10s\n", "view", "type", "P", "R",
                "F1", "support");
  out << head;
  if (view != "it") append_report_rows(out, report.text);
  if (view != "t") append_report_rows(out, report.cross);
  out << "mean representation distance: " << format_percent(report.mean_representation_distance)
      << "\n";
  if (report.missing_context_count > 0)
    out << "sentences with missing context records: " << report.missing_context_count << "\n";
  return out.str();
}

}  // namespace ita
