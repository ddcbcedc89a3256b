#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ita {

// One tokenized sentence with gold BIOES labels and an optional image key.
struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  std::optional<std::string> image_id;

  std::size_t size() const { return tokens.size(); }
};

struct Attribute {
  std::string name;
  double confidence = 0.0;
};

struct DetectedObject {
  std::string tag;
  double confidence = 0.0;
  std::vector<Attribute> attributes;
};

struct Caption {
  std::string text;
  double score = 0.0;
};

// Precomputed image analysis: detected objects, beam-ranked captions, OCR
// text. Captions are kept sorted by descending score; at most 100 objects.
struct VisualContextRecord {
  std::string image_id;
  std::vector<DetectedObject> objects;
  std::vector<Caption> captions;  // descending score
  std::string ocr_text;           // may be empty
};

struct ContextStore {
  std::unordered_map<std::string, VisualContextRecord> records;
  std::size_t duplicate_count = 0;

  const VisualContextRecord* find(const std::string& image_id) const {
    auto it = records.find(image_id);
    return it == records.end() ? nullptr : &it->second;
  }
};

struct BioesViolation {
  std::size_t index = 0;
  std::string reason;
};

// Checks the BIOES grammar; nullopt means the sequence is valid.
std::optional<BioesViolation> validate_bioes(const std::vector<std::string>& labels);

// Reads blank-line separated sentences of "token<TAB>label" lines. A header
// line "IMGID:<id>" or "# img_id = <id>" before a sentence sets its image
// key. Throws DataError on malformed lines or invalid BIOES sequences.
std::vector<LabeledSentence> parse_conll(std::istream& in);

// Inverse of parse_conll; emits "# img_id = <id>" headers.
void serialize_conll(const std::vector<LabeledSentence>& sentences, std::ostream& out);

// Reads JSON Lines context records. Later duplicates of an image_id replace
// earlier ones; the replacement count is reported in the store.
ContextStore parse_context_records(std::istream& in);

// Token and label inventory. Corpus tokens get dense ids in first-occurrence
// order; UNK/PAD/SEP are appended after them. "[X]" always maps to SEP.
class Vocabulary {
 public:
  static constexpr const char* kSepToken = "[X]";

  std::size_t token_id(const std::string& token) const;
  const std::string& token_string(std::size_t id) const;
  std::size_t label_id(const std::string& label) const;
  const std::string& label_string(std::size_t id) const;
  bool has_label(const std::string& label) const { return label_to_id_.count(label) > 0; }

  std::size_t token_count() const { return id_to_token_.size(); }
  std::size_t label_count() const { return id_to_label_.size(); }
  std::size_t unk_id() const { return unk_id_; }
  std::size_t pad_id() const { return pad_id_; }
  std::size_t sep_id() const { return sep_id_; }

  // For serialization: corpus tokens in id order (reserved ids excluded).
  std::vector<std::string> corpus_tokens() const;
  const std::vector<std::string>& labels() const { return id_to_label_; }

  friend Vocabulary build_vocab(const std::vector<LabeledSentence>& sentences,
                                const std::vector<std::vector<std::string>>& context_streams,
                                std::size_t min_count);
  friend Vocabulary restore_vocab(const std::vector<std::string>& corpus_tokens,
                                  const std::vector<std::string>& labels);

 private:
  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::vector<std::string> id_to_token_;  // includes reserved entries at the tail
  std::unordered_map<std::string, std::size_t> label_to_id_;
  std::vector<std::string> id_to_label_;
  std::size_t unk_id_ = 0;
  std::size_t pad_id_ = 0;
  std::size_t sep_id_ = 0;
};

// Sentence tokens occurring >= min_count times plus every context-stream
// token get ids; labels are collected from the gold sequences in order of
// first occurrence. Throws DataError when sentences is empty.
Vocabulary build_vocab(const std::vector<LabeledSentence>& sentences,
                       const std::vector<std::vector<std::string>>& context_streams,
                       std::size_t min_count);

// Rebuilds a vocabulary from serialized token/label lists (checkpoint load).
Vocabulary restore_vocab(const std::vector<std::string>& corpus_tokens,
                         const std::vector<std::string>& labels);

}  // namespace ita
