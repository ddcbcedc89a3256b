#pragma once

#include <string>
#include <vector>

#include "ita/alignment.hpp"
#include "ita/encoder.hpp"
#include "ita/training.hpp"

namespace ita {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct AlignOptions {
  std::string corpus_path;
  std::string contexts_path;
  std::string output_path;
  AlignmentConfig align;
};

struct TrainOptions {
  std::string train_path;
  std::string dev_path;       // optional; empty string = no dev split
  std::string test_path;      // optional
  std::string contexts_path;  // optional; empty string = no visual contexts
  std::string output_dir = ".";
  AlignmentConfig align;
  TrainConfig train;
  EncoderConfig encoder;  // vocab/label sizes are filled from the data
  bool quiet = false;
};

struct EvaluateOptions {
  std::string checkpoint_path;
  std::string dataset_path;
  std::string contexts_path;  // optional
  std::string output_path;    // metrics JSON; empty = stdout table only
  std::string view = "both";  // "t", "it", or "both"
};

struct PredictOptions {
  std::string checkpoint_path;
  std::string input_path;
  std::string contexts_path;  // optional
  std::string output_path;    // empty = stdout
  std::string view = "auto";  // "auto" = cross-modal when contexts are given
};

struct AblateOptions {
  TrainOptions base;
  std::vector<std::string> variants;  // empty = the full canonical set
  bool quick = false;                 // cap epochs at 2 and seeds at 2
};

// Each command returns one of the exit codes above and reports failures on
// stderr; none of them throws.
int cmd_align(const AlignOptions& opt);
int cmd_train(const TrainOptions& opt);
int cmd_evaluate(const EvaluateOptions& opt);
int cmd_predict(const PredictOptions& opt);
int cmd_ablate(const AblateOptions& opt);

// Canonical ablation rows in table order.
const std::vector<std::string>& ablation_variant_names();

}  // namespace ita
