#pragma once

#include <string>

#include "ita/alignment.hpp"
#include "ita/corpus.hpp"
#include "ita/encoder.hpp"
#include "ita/params.hpp"

namespace ita {

inline constexpr const char* kCheckpointVersion = "ita-checkpoint-1";

// Everything needed to reload and run a trained model: dimensions, the
// alignment settings its contexts were built with, the vocabulary, and all
// parameter tensors.
struct Checkpoint {
  std::string version = kCheckpointVersion;
  EncoderConfig encoder;
  AlignmentConfig alignment;
  Vocabulary vocab;
  ParameterSet params;
};

// Single JSON document; written to a temporary file and renamed into place
// so a failed save never leaves a partial checkpoint behind.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws DataError on I/O failure, malformed JSON, shape mismatches, or a
// version other than kCheckpointVersion (the message names both versions).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ita
