#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ita/corpus.hpp"

namespace ita {

// Which linearized segments feed the visual context.
struct ModeSet {
  bool la = true;
  bool ga = true;
  bool oca = true;

  bool any() const { return la || ga || oca; }
  bool operator==(const ModeSet&) const = default;

  // Accepts "all", "la", "ga", "oca" or comma-separated combinations.
  static ModeSet parse(const std::string& text);
  std::string to_string() const;
};

struct AlignmentConfig {
  double attr_threshold = 0.1;
  std::size_t max_attrs_per_object = 3;
  std::size_t num_captions = 5;
  std::size_t max_caption_tokens = 20;
  ModeSet modes;
  std::size_t max_total_length = 256;
};

// The concatenated input [w; w'] with the sentence prefix marked labelable.
struct CrossModalInput {
  std::vector<std::string> tokens;
  std::vector<bool> sentence_mask;  // true exactly on the first n positions
  const LabeledSentence* source_sentence = nullptr;

  std::size_t sentence_length() const {
    std::size_t n = 0;
    while (n < sentence_mask.size() && sentence_mask[n]) ++n;
    return n;
  }
};

// Splits on runs of whitespace; never yields empty tokens.
std::vector<std::string> whitespace_tokens(const std::string& text);

// Object tags sorted by descending confidence, each preceded by up to
// max_attrs_per_object attributes with confidence above the threshold.
std::vector<std::string> linearize_local(const VisualContextRecord& record,
                                         const AlignmentConfig& config);

// The top-k captions, each clipped to max_caption_tokens tokens, joined with
// single [X] separators.
std::vector<std::string> linearize_global(const VisualContextRecord& record,
                                          const AlignmentConfig& config);

// Whitespace tokens of the OCR text.
std::vector<std::string> linearize_ocr(const VisualContextRecord& record);

// LA ++ [X] ++ GA ++ [X] ++ OCA restricted to config.modes; empty segments
// are elided together with their adjoining separator.
std::vector<std::string> linearize_all(const VisualContextRecord& record,
                                       const AlignmentConfig& config);

// tokens = sentence ++ context, truncated from the context tail so that the
// total stays within max_total_length. Throws DataError when the sentence
// alone is too long: gold-labeled tokens are never dropped.
CrossModalInput build_cross_modal_input(const LabeledSentence& sentence,
                                        const std::vector<std::string>& context_tokens,
                                        const AlignmentConfig& config);

// Permutes the image ids across sentences (seeded, uniform); the multiset of
// ids is preserved and tokens/labels are untouched.
std::vector<LabeledSentence> shuffle_pairing(std::vector<LabeledSentence> dataset,
                                             std::uint64_t seed);

}  // namespace ita
