#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ita/cli.hpp"
#include "ita/errors.hpp"

namespace {

// The config file is a flat JSON object; values become defaults and any
// flag passed on the command line overrides them.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

struct Defaults {
  ita::TrainOptions train;     // shared by train and ablate
  ita::AlignOptions align;
  std::string modes = "all";
};

void apply_config(const nlohmann::json& j, Defaults& d) {
  auto set_str = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
  };
  auto set_size = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = j.at(key).get<std::size_t>();
  };
  auto set_double = [&](const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
  };
  auto set_bool = [&](const char* key, bool& out) {
    if (j.contains(key)) out = j.at(key).get<bool>();
  };

  set_str("train_path", d.train.train_path);
  set_str("dev_path", d.train.dev_path);
  set_str("test_path", d.train.test_path);
  set_str("contexts_path", d.train.contexts_path);
  set_str("output_dir", d.train.output_dir);
  set_str("modes", d.modes);

  set_double("attr_threshold", d.train.align.attr_threshold);
  set_size("max_attrs_per_object", d.train.align.max_attrs_per_object);
  set_size("num_captions", d.train.align.num_captions);
  set_size("max_caption_tokens", d.train.align.max_caption_tokens);
  set_size("max_total_length", d.train.align.max_total_length);

  set_size("epochs", d.train.train.epochs);
  set_size("batch_size", d.train.train.batch_size);
  set_double("lr_encoder", d.train.train.lr_encoder);
  set_double("lr_crf", d.train.train.lr_crf);
  set_double("weight_decay", d.train.train.weight_decay);
  set_double("beta1", d.train.train.beta1);
  set_double("beta2", d.train.train.beta2);
  set_double("epsilon", d.train.train.epsilon);
  set_double("clip_norm", d.train.train.clip_norm);
  set_bool("use_cva", d.train.train.use_cva);
  set_bool("random_pairing", d.train.train.random_pairing);
  set_bool("train_text", d.train.train.train_text);
  set_bool("train_cross", d.train.train.train_cross);
  set_size("cva_warmup_epochs", d.train.train.cva_warmup_epochs);
  set_size("vocab_min_count", d.train.train.vocab_min_count);
  if (j.contains("seeds")) d.train.train.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  set_size("d_model", d.train.encoder.d_model);
  set_size("d_ff", d.train.encoder.d_ff);
  set_size("layers", d.train.encoder.layers);
  set_size("heads", d.train.encoder.heads);
  set_size("max_positions", d.train.encoder.max_positions);
  set_double("ln_eps", d.train.encoder.ln_eps);
}

void add_alignment_flags(CLI::App* cmd, ita::AlignmentConfig& align, std::string& modes) {
  cmd->add_option("--modes", modes, "context segments: all, or a comma list of la,ga,oca");
  cmd->add_option("--attr-threshold", align.attr_threshold,
                  "keep attributes with confidence strictly above this");
  cmd->add_option("--max-attrs", align.max_attrs_per_object, "attributes kept per object");
  cmd->add_option("--num-captions", align.num_captions, "captions kept per image");
  cmd->add_option("--max-caption-tokens", align.max_caption_tokens, "tokens kept per caption");
  cmd->add_option("--max-total-length", align.max_total_length,
                  "cap on sentence plus context tokens");
}

void add_train_flags(CLI::App* cmd, ita::TrainOptions& opt, std::string& modes, bool& no_cva) {
  cmd->add_option("--train", opt.train_path, "training corpus TSV")->required();
  cmd->add_option("--dev", opt.dev_path, "development corpus TSV");
  cmd->add_option("--test", opt.test_path, "test corpus TSV");
  cmd->add_option("--contexts", opt.contexts_path, "visual contexts JSONL");
  cmd->add_option("--output-dir", opt.output_dir, "directory for checkpoints and reports");
  add_alignment_flags(cmd, opt.align, modes);
  cmd->add_option("--epochs", opt.train.epochs, "training epochs");
  cmd->add_option("--batch-size", opt.train.batch_size, "sentences per update");
  cmd->add_option("--lr-encoder", opt.train.lr_encoder, "learning rate for encoder tensors");
  cmd->add_option("--lr-crf", opt.train.lr_crf, "learning rate for the CRF tables");
  cmd->add_option("--weight-decay", opt.train.weight_decay, "decoupled weight decay");
  cmd->add_option("--beta1", opt.train.beta1, "first moment coefficient");
  cmd->add_option("--beta2", opt.train.beta2, "second moment coefficient");
  cmd->add_option("--adam-epsilon", opt.train.epsilon, "optimizer epsilon");
  cmd->add_option("--clip-norm", opt.train.clip_norm, "global gradient norm bound");
  cmd->add_option("--seeds", opt.train.seeds, "seed list (space separated)");
  cmd->add_flag("--no-cva", no_cva, "disable the consistency term (joint training only)");
  cmd->add_flag("--random-pairing", opt.train.random_pairing,
                "permute training image ids (corruption ablation)");
  cmd->add_option("--cva-warmup", opt.train.cva_warmup_epochs,
                  "epochs before the consistency term joins");
  cmd->add_option("--vocab-min-count", opt.train.vocab_min_count,
                  "minimum sentence-token count for a vocabulary entry");
  cmd->add_option("--d-model", opt.encoder.d_model, "hidden width");
  cmd->add_option("--d-ff", opt.encoder.d_ff, "feed-forward width");
  cmd->add_option("--layers", opt.encoder.layers, "encoder layers");
  cmd->add_option("--heads", opt.encoder.heads, "attention heads");
  cmd->add_option("--max-positions", opt.encoder.max_positions, "positional table size");
  cmd->add_flag("--quiet", opt.quiet, "suppress the stdout summary");
}

}  // namespace

int main(int argc, char** argv) {
  Defaults d;
  const std::string config_path = find_config_path(argc, argv);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "config error: cannot open config '" << config_path << "'\n";
      return ita::kExitUsage;
    }
    try {
      nlohmann::json j;
      in >> j;
      apply_config(j, d);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << config_path << ": " << e.what() << '\n';
      return ita::kExitUsage;
    }
  }
  d.align.align = d.train.align;

  CLI::App app{"image-text alignment NER pipeline"};
  app.require_subcommand(0, 1);
  std::string config_dummy;
  app.add_option("--config", config_dummy, "flat JSON config; flags override its values");

  ita::AlignOptions align_opt = d.align;
  std::string align_modes = d.modes;
  CLI::App* align_cmd = app.add_subcommand("align", "linearize visual contexts per sentence");
  align_cmd->add_option("--corpus", align_opt.corpus_path, "corpus TSV")->required();
  align_cmd->add_option("--contexts", align_opt.contexts_path, "visual contexts JSONL")->required();
  align_cmd->add_option("--output", align_opt.output_path, "aligned JSONL output")->required();
  add_alignment_flags(align_cmd, align_opt.align, align_modes);

  ita::TrainOptions train_opt = d.train;
  std::string train_modes = d.modes;
  bool train_no_cva = false;
  CLI::App* train_cmd = app.add_subcommand("train", "train models across seeds");
  add_train_flags(train_cmd, train_opt, train_modes, train_no_cva);

  ita::EvaluateOptions eval_opt;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on both views");
  eval_cmd->add_option("--checkpoint", eval_opt.checkpoint_path, "model checkpoint")->required();
  eval_cmd->add_option("--dataset", eval_opt.dataset_path, "labeled corpus TSV")->required();
  eval_cmd->add_option("--contexts", eval_opt.contexts_path, "visual contexts JSONL");
  eval_cmd->add_option("--output", eval_opt.output_path, "metrics JSON output path");
  eval_cmd->add_option("--view", eval_opt.view, "t, it, or both");

  ita::PredictOptions pred_opt;
  CLI::App* pred_cmd = app.add_subcommand("predict", "tag a corpus with a checkpoint");
  pred_cmd->add_option("--checkpoint", pred_opt.checkpoint_path, "model checkpoint")->required();
  pred_cmd->add_option("--input", pred_opt.input_path, "tokens TSV (labels optional)")->required();
  pred_cmd->add_option("--contexts", pred_opt.contexts_path, "visual contexts JSONL");
  pred_cmd->add_option("--output", pred_opt.output_path, "tagged TSV output (default stdout)");
  pred_cmd->add_option("--view", pred_opt.view, "auto, t, or it");

  ita::AblateOptions ablate_opt;
  ablate_opt.base = d.train;
  std::string ablate_modes = d.modes;
  bool ablate_no_cva = false;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train and compare the method variants");
  add_train_flags(ablate_cmd, ablate_opt.base, ablate_modes, ablate_no_cva);
  ablate_cmd->add_option("--variants", ablate_opt.variants,
                         "subset of: baseline la ga oca all joint all+cva random");
  ablate_cmd->add_flag("--quick", ablate_opt.quick, "cap epochs and seeds for smoke runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ita::kExitUsage;
  }

  try {
    if (*align_cmd) {
      align_opt.align.modes = ita::ModeSet::parse(align_modes);
      return ita::cmd_align(align_opt);
    }
    if (*train_cmd) {
      train_opt.train.modes = ita::ModeSet::parse(train_modes);
      if (train_no_cva) train_opt.train.use_cva = false;
      return ita::cmd_train(train_opt);
    }
    if (*eval_cmd) return ita::cmd_evaluate(eval_opt);
    if (*pred_cmd) return ita::cmd_predict(pred_opt);
    if (*ablate_cmd) {
      ablate_opt.base.train.modes = ita::ModeSet::parse(ablate_modes);
      if (ablate_no_cva) ablate_opt.base.train.use_cva = false;
      return ita::cmd_ablate(ablate_opt);
    }
  } catch (const ita::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ita::kExitUsage;
  }

  std::cout << app.help();
  return ita::kExitUsage;
}
