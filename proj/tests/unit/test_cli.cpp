#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ita/cli.hpp"
#include "temp_dir.hpp"

using namespace ita;
using ita::testing::TempDir;

namespace {

const std::string kFixtures = ITA_TEST_FIXTURES;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

TrainOptions tiny_train_options(const TempDir& dir) {
  TrainOptions opt;
  opt.train_path = kFixtures + "/align_corpus.tsv";
  opt.test_path = kFixtures + "/align_corpus.tsv";
  opt.contexts_path = kFixtures + "/align_contexts.jsonl";
  opt.output_dir = dir.file("run");
  opt.train.epochs = 1;
  opt.train.batch_size = 4;
  opt.train.seeds = {3};
  opt.encoder.d_model = 8;
  opt.encoder.d_ff = 12;
  opt.encoder.layers = 1;
  opt.encoder.heads = 2;
  opt.encoder.max_positions = 80;
  opt.quiet = true;
  return opt;
}

}  // namespace

TEST_CASE("align reproduces the hand-derived golden files byte for byte") {
  const TempDir dir;
  AlignOptions opt;
  opt.corpus_path = kFixtures + "/align_corpus.tsv";
  opt.contexts_path = kFixtures + "/align_contexts.jsonl";
  opt.output_path = dir.file("aligned.jsonl");

  REQUIRE(cmd_align(opt) == kExitOk);
  CHECK(slurp(opt.output_path) == slurp(kFixtures + "/golden_aligned_all.jsonl"));

  // Re-running writes identical bytes.
  opt.output_path = dir.file("aligned2.jsonl");
  REQUIRE(cmd_align(opt) == kExitOk);
  CHECK(slurp(dir.file("aligned.jsonl")) == slurp(dir.file("aligned2.jsonl")));

  // Restricting the modes gates the emitted segments.
  opt.align.modes = ModeSet{true, false, false};
  opt.output_path = dir.file("aligned_la.jsonl");
  REQUIRE(cmd_align(opt) == kExitOk);
  CHECK(slurp(opt.output_path) == slurp(kFixtures + "/golden_aligned_la.jsonl"));
}

TEST_CASE("align exit codes") {
  const TempDir dir;
  AlignOptions opt;
  opt.corpus_path = dir.file("missing.tsv");
  opt.contexts_path = kFixtures + "/align_contexts.jsonl";
  opt.output_path = dir.file("out.jsonl");
  CHECK(cmd_align(opt) == kExitData);
  CHECK_FALSE(std::filesystem::exists(opt.output_path));  // no partial output

  std::ofstream(dir.file("bad.tsv")) << "no-tab-line\n";
  opt.corpus_path = dir.file("bad.tsv");
  CHECK(cmd_align(opt) == kExitData);
}

TEST_CASE("train, evaluate and predict run end to end on the fixtures") {
  const TempDir dir;
  const TrainOptions topt = tiny_train_options(dir);
  REQUIRE(cmd_train(topt) == kExitOk);

  const std::string ckpt = topt.output_dir + "/checkpoint_seed3.json";
  CHECK(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(topt.output_dir + "/train_report.json"));
  CHECK(std::filesystem::exists(topt.output_dir + "/train_log.jsonl"));

  // The report is timestamp-free: rerunning produces identical bytes.
  TrainOptions again = topt;
  again.output_dir = dir.file("run_b");
  REQUIRE(cmd_train(again) == kExitOk);
  CHECK(slurp(ckpt) == slurp(again.output_dir + "/checkpoint_seed3.json"));
  CHECK(slurp(topt.output_dir + "/train_report.json") ==
        slurp(again.output_dir + "/train_report.json"));

  EvaluateOptions eopt;
  eopt.checkpoint_path = ckpt;
  eopt.dataset_path = kFixtures + "/align_corpus.tsv";
  eopt.contexts_path = kFixtures + "/align_contexts.jsonl";
  eopt.output_path = dir.file("metrics.json");
  REQUIRE(cmd_evaluate(eopt) == kExitOk);
  const std::string metrics = slurp(eopt.output_path);
  CHECK(metrics.find("\"view\": \"T\"") != std::string::npos);
  CHECK(metrics.find("\"view\": \"I+T\"") != std::string::npos);
  CHECK(metrics.find("representation_distance") != std::string::npos);

  PredictOptions popt;
  popt.checkpoint_path = ckpt;
  popt.input_path = kFixtures + "/align_corpus.tsv";
  popt.contexts_path = kFixtures + "/align_contexts.jsonl";
  popt.output_path = dir.file("pred_a.tsv");
  REQUIRE(cmd_predict(popt) == kExitOk);
  popt.output_path = dir.file("pred_b.tsv");
  REQUIRE(cmd_predict(popt) == kExitOk);
  CHECK(slurp(dir.file("pred_a.tsv")) == slurp(dir.file("pred_b.tsv")));

  // Predictions re-parse as a corpus: one tag per token, valid grammar.
  const std::string pred = slurp(dir.file("pred_a.tsv"));
  CHECK(pred.find("We\t") != std::string::npos);
  CHECK(pred.find("# img_id = img1") != std::string::npos);

  // Unknown tokens still receive tags.
  std::ofstream(dir.file("novel.tsv")) << "zzzunseen\nanother\n";
  popt.input_path = dir.file("novel.tsv");
  popt.contexts_path.clear();
  popt.output_path = dir.file("pred_novel.tsv");
  REQUIRE(cmd_predict(popt) == kExitOk);
  const std::string novel = slurp(dir.file("pred_novel.tsv"));
  CHECK(novel.find("zzzunseen\t") != std::string::npos);

  // With no context record the cross view degrades to the text view.
  std::ofstream(dir.file("noimg.tsv")) << "We\nvisited\n";
  PredictOptions t_view;
  t_view.checkpoint_path = ckpt;
  t_view.input_path = dir.file("noimg.tsv");
  t_view.contexts_path = kFixtures + "/align_contexts.jsonl";
  t_view.view = "t";
  t_view.output_path = dir.file("pred_t.tsv");
  REQUIRE(cmd_predict(t_view) == kExitOk);
  PredictOptions auto_view = t_view;
  auto_view.view = "auto";
  auto_view.output_path = dir.file("pred_auto.tsv");
  REQUIRE(cmd_predict(auto_view) == kExitOk);
  CHECK(slurp(dir.file("pred_t.tsv")) == slurp(dir.file("pred_auto.tsv")));

  // Checkpoint path errors are data errors.
  eopt.checkpoint_path = dir.file("nope.json");
  CHECK(cmd_evaluate(eopt) == kExitData);
}

TEST_CASE("evaluate can restrict the table to one view") {
  const TempDir dir;
  const TrainOptions topt = tiny_train_options(dir);
  REQUIRE(cmd_train(topt) == kExitOk);

  EvaluateOptions eopt;
  eopt.checkpoint_path = topt.output_dir + "/checkpoint_seed3.json";
  eopt.dataset_path = kFixtures + "/align_corpus.tsv";
  eopt.contexts_path = kFixtures + "/align_contexts.jsonl";
  eopt.view = "bogus";
  CHECK(cmd_evaluate(eopt) == kExitUsage);
}

TEST_CASE("ablate validates variant names and runs the quick path") {
  const TempDir dir;
  AblateOptions opt;
  opt.base = tiny_train_options(dir);
  opt.quick = true;
  opt.variants = {"baseline", "joint"};
  REQUIRE(cmd_ablate(opt) == kExitOk);
  CHECK(std::filesystem::exists(opt.base.output_dir + "/ablation_report.json"));
  const std::string report = slurp(opt.base.output_dir + "/ablation_report.json");
  CHECK(report.find("\"baseline\"") != std::string::npos);
  CHECK(report.find("\"joint\"") != std::string::npos);
  CHECK(report.find("\"all+cva\"") == std::string::npos);  // not requested

  AblateOptions bad = opt;
  bad.variants = {"nonsense"};
  CHECK(cmd_ablate(bad) == kExitUsage);
}

TEST_CASE("the canonical ablation table covers the method variants in order") {
  const auto& names = ablation_variant_names();
  REQUIRE(names.size() == 8);
  CHECK(names[0] == "baseline");
  CHECK(names[1] == "la");
  CHECK(names[2] == "ga");
  CHECK(names[3] == "oca");
  CHECK(names[4] == "all");
  CHECK(names[5] == "joint");
  CHECK(names[6] == "all+cva");
  CHECK(names[7] == "random");
}
