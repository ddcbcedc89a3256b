#include "ita/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "ita/checkpoint.hpp"
#include "ita/errors.hpp"
#include "ita/evaluation.hpp"
#include "ita/model.hpp"

namespace ita {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw DataError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

std::vector<LabeledSentence> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  try {
    return parse_conll(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

ContextStore read_contexts(const std::string& path, bool required) {
  ContextStore store;
  if (path.empty()) {
    if (required) throw ConfigError("a contexts file is required");
    return store;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open contexts '" + path + "'");
  try {
    store = parse_context_records(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
  if (store.duplicate_count > 0)
    std::cerr << "warning: " << store.duplicate_count
              << " duplicate context record(s) replaced earlier ones\n";
  return store;
}

std::string normalize_view(const std::string& view, bool allow_auto) {
  if (view == "t" || view == "T") return "t";
  if (view == "it" || view == "I+T" || view == "i+t") return "it";
  if (view == "both") return "both";
  if (allow_auto && view == "auto") return "auto";
  throw ConfigError("unknown view '" + view + "' (expected t, it" +
                    (allow_auto ? ", auto" : ", both") + ")");
}

ordered_json metric_json(const MetricReport& r) {
  ordered_json per_type = ordered_json::array();
  for (const TypeMetrics& t : r.per_type)
    per_type.push_back(ordered_json{{"type", t.type},
                                    {"precision", t.precision},
                                    {"recall", t.recall},
                                    {"f1", t.f1},
                                    {"gold_spans", t.gold_count},
                                    {"predicted_spans", t.pred_count},
                                    {"matched_spans", t.match_count}});
  return ordered_json{{"view", r.view},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"gold_spans", r.gold_count},
                      {"predicted_spans", r.pred_count},
                      {"matched_spans", r.match_count},
                      {"per_type", std::move(per_type)}};
}

ordered_json dual_report_json(const DualViewReport& rep, const std::string& view) {
  ordered_json j;
  if (view != "it") j["text_view"] = metric_json(rep.text);
  if (view != "t") j["cross_view"] = metric_json(rep.cross);
  j["mean_representation_distance"] = rep.mean_representation_distance;
  j["missing_context_count"] = rep.missing_context_count;
  return j;
}

ordered_json train_report_json(const TrainReport& report) {
  ordered_json seeds = ordered_json::array();
  for (const SeedResult& s : report.seeds) {
    ordered_json epochs = ordered_json::array();
    for (const EpochStats& e : s.epochs)
      epochs.push_back(ordered_json{{"epoch", e.epoch},
                                    {"loss_text", e.text_nll},
                                    {"loss_cross", e.cross_nll},
                                    {"loss_cva", e.cva_cross_entropy},
                                    {"kl", e.cva_kl},
                                    {"dev_f1_text", e.dev_f1_text},
                                    {"dev_f1_cross", e.dev_f1_cross},
                                    {"dev_rep_distance", e.dev_representation_distance}});
    seeds.push_back(ordered_json{{"seed", s.seed},
                                 {"best_epoch", s.best_epoch},
                                 {"test", dual_report_json(s.test, "both")},
                                 {"epochs", std::move(epochs)}});
  }
  return ordered_json{{"mean_test_f1_text", report.mean_test_f1_text},
                      {"std_test_f1_text", report.std_test_f1_text},
                      {"mean_test_f1_cross", report.mean_test_f1_cross},
                      {"std_test_f1_cross", report.std_test_f1_cross},
                      {"mean_test_representation_distance",
                       report.mean_test_representation_distance},
                      {"seeds", std::move(seeds)}};
}

TrainOutcome run_training(const TrainOptions& opt, const TrainConfig& cfg,
                          const std::string& log_name) {
  const std::vector<LabeledSentence> train_set = read_corpus(opt.train_path);
  const std::vector<LabeledSentence> dev_set =
      opt.dev_path.empty() ? std::vector<LabeledSentence>{} : read_corpus(opt.dev_path);
  const std::vector<LabeledSentence> test_set =
      opt.test_path.empty() ? std::vector<LabeledSentence>{} : read_corpus(opt.test_path);
  const ContextStore store = read_contexts(opt.contexts_path, false);
  fs::create_directories(opt.output_dir);
  std::ofstream log(opt.output_dir + "/" + log_name, std::ios::trunc);
  if (!log) throw DataError("cannot open training log in '" + opt.output_dir + "'");
  return train(train_set, dev_set, test_set, store, opt.align, opt.encoder, cfg, &log);
}

}  // namespace

int cmd_align(const AlignOptions& opt) {
  return run_guarded([&] {
    const std::vector<LabeledSentence> sentences = read_corpus(opt.corpus_path);
    const ContextStore store = read_contexts(opt.contexts_path, true);
    std::ostringstream out;
    for (std::size_t k = 0; k < sentences.size(); ++k) {
      const LabeledSentence& s = sentences[k];
      const VisualContextRecord* rec = nullptr;
      if (s.image_id) {
        rec = store.find(*s.image_id);
        if (!rec)
          std::cerr << "warning: sentence " << k << " references image id '" << *s.image_id
                    << "' with no context record\n";
      }
      const std::vector<std::string> empty;
      ordered_json j;
      j["tokens"] = s.tokens;
      j["labels"] = s.labels;
      if (s.image_id)
        j["image_id"] = *s.image_id;
      else
        j["image_id"] = nullptr;
      j["la"] = (rec && opt.align.modes.la) ? linearize_local(*rec, opt.align) : empty;
      j["ga"] = (rec && opt.align.modes.ga) ? linearize_global(*rec, opt.align) : empty;
      j["oca"] = (rec && opt.align.modes.oca) ? linearize_ocr(*rec) : empty;
      j["all"] = rec ? linearize_all(*rec, opt.align) : empty;
      j["sentence_length"] = s.size();
      out << j.dump() << '\n';
    }
    write_file_atomic(opt.output_path, out.str());
  });
}

int cmd_train(const TrainOptions& opt) {
  return run_guarded([&] {
    validate_train_config(opt.train);
    const TrainOutcome outcome = run_training(opt, opt.train, "train_log.jsonl");
    for (std::size_t i = 0; i < outcome.checkpoints.size(); ++i) {
      const std::string path = opt.output_dir + "/checkpoint_seed" +
                               std::to_string(opt.train.seeds[i]) + ".json";
      save_checkpoint(outcome.checkpoints[i], path);
    }
    write_file_atomic(opt.output_dir + "/train_report.json",
                      train_report_json(outcome.report).dump(2) + "\n");
    if (!opt.quiet) {
      const TrainReport& r = outcome.report;
      std::cout << "test F1 (T view):   " << format_percent(r.mean_test_f1_text) << " ± "
                << format_percent(r.std_test_f1_text) << "\n"
                << "test F1 (I+T view): " << format_percent(r.mean_test_f1_cross) << " ± "
                << format_percent(r.std_test_f1_cross) << "\n"
                << "mean representation distance: "
                << format_percent(r.mean_test_representation_distance) << "\n"
                << "checkpoints and reports written to " << opt.output_dir << "\n";
    }
  });
}

int cmd_evaluate(const EvaluateOptions& opt) {
  return run_guarded([&] {
    const std::string view = normalize_view(opt.view, false);
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
    const std::vector<LabeledSentence> dataset = read_corpus(opt.dataset_path);
    const ContextStore store = read_contexts(opt.contexts_path, false);
    const DualViewReport rep =
        dual_view_eval(ckpt.encoder, ckpt.params, dataset, store, ckpt.alignment, ckpt.vocab);
    std::cout << format_metric_table(rep, view);
    if (!opt.output_path.empty())
      write_file_atomic(opt.output_path, dual_report_json(rep, view).dump(2) + "\n");
  });
}

namespace {

// Tolerant tagging input: "token", or "token<TAB>label" whose label is
// ignored; blank-line sentence breaks and the usual image-id headers.
std::vector<LabeledSentence> parse_predict_input(std::istream& in) {
  std::vector<LabeledSentence> sentences;
  LabeledSentence current;
  std::optional<std::string> pending_id;
  std::string line;
  auto flush = [&] {
    if (!current.tokens.empty()) sentences.push_back(std::move(current));
    current = LabeledSentence{};
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      pending_id.reset();
      continue;
    }
    if (line.find('\t') == std::string::npos) {
      if (line.rfind("IMGID:", 0) == 0) {
        pending_id = line.substr(6);
        continue;
      }
      if (line.rfind("# img_id = ", 0) == 0) {
        pending_id = line.substr(11);
        continue;
      }
    }
    if (current.tokens.empty() && pending_id) current.image_id = pending_id;
    const std::size_t tab = line.find('\t');
    current.tokens.push_back(tab == std::string::npos ? line : line.substr(0, tab));
  }
  flush();
  return sentences;
}

}  // namespace

int cmd_predict(const PredictOptions& opt) {
  return run_guarded([&] {
    const std::string view = normalize_view(opt.view, true);
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
    std::ifstream in(opt.input_path, std::ios::binary);
    if (!in) throw DataError("cannot open input '" + opt.input_path + "'");
    const std::vector<LabeledSentence> sentences = parse_predict_input(in);
    const ContextStore store = read_contexts(opt.contexts_path, false);
    const bool use_cross = view == "it" || (view == "auto" && !opt.contexts_path.empty());

    std::ostringstream out;
    for (const LabeledSentence& s : sentences) {
      const SentenceViews views = build_views(s, store, ckpt.alignment, ckpt.vocab);
      const std::vector<std::size_t>& ids = use_cross ? views.cross_ids : views.text_ids;
      const std::vector<std::size_t> pred =
          decode(ckpt.encoder, ckpt.params, ids, views.sentence_len);
      if (s.image_id) out << "# img_id = " << *s.image_id << '\n';
      for (std::size_t i = 0; i < s.tokens.size(); ++i)
        out << s.tokens[i] << '\t' << ckpt.vocab.label_string(pred[i]) << '\n';
      out << '\n';
    }
    if (opt.output_path.empty())
      std::cout << out.str();
    else
      write_file_atomic(opt.output_path, out.str());
  });
}

namespace {

struct VariantSpec {
  std::string name;
  std::function<void(TrainConfig&)> apply;
};

const std::vector<VariantSpec>& variant_specs() {
  static const std::vector<VariantSpec> specs = {
      {"baseline",
       [](TrainConfig& c) {
         c.train_text = true;
         c.train_cross = false;
         c.use_cva = false;
       }},
      {"la",
       [](TrainConfig& c) {
         c.train_text = false;
         c.train_cross = true;
         c.use_cva = false;
         c.modes = ModeSet{true, false, false};
       }},
      {"ga",
       [](TrainConfig& c) {
         c.train_text = false;
         c.train_cross = true;
         c.use_cva = false;
         c.modes = ModeSet{false, true, false};
       }},
      {"oca",
       [](TrainConfig& c) {
         c.train_text = false;
         c.train_cross = true;
         c.use_cva = false;
         c.modes = ModeSet{false, false, true};
       }},
      {"all",
       [](TrainConfig& c) {
         c.train_text = false;
         c.train_cross = true;
         c.use_cva = false;
         c.modes = ModeSet{true, true, true};
       }},
      {"joint",
       [](TrainConfig& c) {
         c.train_text = true;
         c.train_cross = true;
         c.use_cva = false;
         c.modes = ModeSet{true, true, true};
       }},
      {"all+cva",
       [](TrainConfig& c) {
         c.train_text = true;
         c.train_cross = true;
         c.use_cva = true;
         c.modes = ModeSet{true, true, true};
       }},
      {"random",
       [](TrainConfig& c) {
         c.train_text = false;
         c.train_cross = true;
         c.use_cva = false;
         c.modes = ModeSet{true, true, true};
         c.random_pairing = true;
       }},
  };
  return specs;
}

}  // namespace

const std::vector<std::string>& ablation_variant_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const VariantSpec& s : variant_specs()) v.push_back(s.name);
    return v;
  }();
  return names;
}

int cmd_ablate(const AblateOptions& opt) {
  return run_guarded([&] {
    std::vector<std::string> wanted = opt.variants;
    if (wanted.empty()) wanted = ablation_variant_names();
    for (const std::string& name : wanted) {
      bool known = false;
      for (const VariantSpec& s : variant_specs()) known = known || s.name == name;
      if (!known) {
        std::string all;
        for (const std::string& n : ablation_variant_names()) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("unknown variant '" + name + "' (known: " + all + ")");
      }
    }

    ordered_json rows = ordered_json::array();
    std::ostringstream table;
    char head[160];
    std::snprintf(head, sizeof(head), "%-10s %18s %18s %14s\n", "variant", "T F1 (mean±std)",
                  "I+T F1 (mean±std)", "rep distance");
    table << head;

    for (const VariantSpec& spec : variant_specs()) {
      bool requested = false;
      for (const std::string& name : wanted) requested = requested || name == spec.name;
      if (!requested) continue;

      TrainConfig cfg = opt.base.train;
      spec.apply(cfg);
      if (opt.quick) {
        cfg.epochs = std::min<std::size_t>(cfg.epochs, 2);
        if (cfg.seeds.size() > 2) cfg.seeds.resize(2);
      }
      validate_train_config(cfg);
      const TrainOutcome outcome =
          run_training(opt.base, cfg, "ablate_log_" + spec.name + ".jsonl");
      const TrainReport& r = outcome.report;
      rows.push_back(ordered_json{{"variant", spec.name},
                                  {"f1_text_mean", r.mean_test_f1_text},
                                  {"f1_text_std", r.std_test_f1_text},
                                  {"f1_cross_mean", r.mean_test_f1_cross},
                                  {"f1_cross_std", r.std_test_f1_cross},
                                  {"rep_distance_mean", r.mean_test_representation_distance}});
      char row[160];
      std::snprintf(row, sizeof(row), "%-10s %8s ± %7s %8s ± %7s %14s\n", spec.name.c_str(),
                    format_percent(r.mean_test_f1_text).c_str(),
                    format_percent(r.std_test_f1_text).c_str(),
                    format_percent(r.mean_test_f1_cross).c_str(),
                    format_percent(r.std_test_f1_cross).c_str(),
                    format_percent(r.mean_test_representation_distance).c_str());
      table << row;
    }

    std::cout << table.str();
    fs::create_directories(opt.base.output_dir);
    write_file_atomic(opt.base.output_dir + "/ablation_report.json",
                      ordered_json{{"variants", std::move(rows)}}.dump(2) + "\n");
  });
}

}  // namespace ita
