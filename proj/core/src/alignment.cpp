#include "ita/alignment.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "ita/errors.hpp"
#include "ita/rng.hpp"

namespace ita {

ModeSet ModeSet::parse(const std::string& text) {
  ModeSet modes{false, false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::string lower;
    for (char c : part) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "all")
      modes = ModeSet{true, true, true};
    else if (lower == "la")
      modes.la = true;
    else if (lower == "ga")
      modes.ga = true;
    else if (lower == "oca")
      modes.oca = true;
    else if (!lower.empty())
      throw ConfigError("unknown alignment mode '" + part + "' (expected la, ga, oca or all)");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (!modes.any()) throw ConfigError("alignment mode set must not be empty");
  return modes;
}

std::string ModeSet::to_string() const {
  if (la && ga && oca) return "all";
  std::string out;
  auto append = [&out](const char* name) {
    if (!out.empty()) out += ",";
    out += name;
  };
  if (la) append("la");
  if (ga) append("ga");
  if (oca) append("oca");
  return out;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> linearize_local(const VisualContextRecord& record,
                                         const AlignmentConfig& config) {
  // Stable sort keeps the record order on confidence ties.
  std::vector<std::size_t> order(record.objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&record](std::size_t a, std::size_t b) {
    return record.objects[a].confidence > record.objects[b].confidence;
  });

  std::vector<std::string> out;
  for (std::size_t idx : order) {
    const DetectedObject& object = record.objects[idx];

    std::vector<std::size_t> attr_order;
    for (std::size_t i = 0; i < object.attributes.size(); ++i)
      if (object.attributes[i].confidence > config.attr_threshold) attr_order.push_back(i);
    std::stable_sort(attr_order.begin(), attr_order.end(), [&object](std::size_t a, std::size_t b) {
      return object.attributes[a].confidence > object.attributes[b].confidence;
    });
    if (attr_order.size() > config.max_attrs_per_object)
      attr_order.resize(config.max_attrs_per_object);

    for (std::size_t i : attr_order)
      for (auto& token : whitespace_tokens(object.attributes[i].name)) out.push_back(std::move(token));
    for (auto& token : whitespace_tokens(object.tag)) out.push_back(std::move(token));
  }
  return out;
}

std::vector<std::string> linearize_global(const VisualContextRecord& record,
                                          const AlignmentConfig& config) {
  std::size_t take = std::min(config.num_captions, record.captions.size());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) {
    std::vector<std::string> tokens = whitespace_tokens(record.captions[i].text);
    if (tokens.size() > config.max_caption_tokens) tokens.resize(config.max_caption_tokens);
    if (tokens.empty()) continue;
    if (!out.empty()) out.push_back(Vocabulary::kSepToken);
    for (auto& token : tokens) out.push_back(std::move(token));
  }
  return out;
}

std::vector<std::string> linearize_ocr(const VisualContextRecord& record) {
  return whitespace_tokens(record.ocr_text);
}

std::vector<std::string> linearize_all(const VisualContextRecord& record,
                                       const AlignmentConfig& config) {
  std::vector<std::string> out;
  auto append_segment = [&out](std::vector<std::string> segment) {
    if (segment.empty()) return;
    if (!out.empty()) out.push_back(Vocabulary::kSepToken);
    for (auto& token : segment) out.push_back(std::move(token));
  };
  if (config.modes.la) append_segment(linearize_local(record, config));
  if (config.modes.ga) append_segment(linearize_global(record, config));
  if (config.modes.oca) append_segment(linearize_ocr(record));
  return out;
}

CrossModalInput build_cross_modal_input(const LabeledSentence& sentence,
                                        const std::vector<std::string>& context_tokens,
                                        const AlignmentConfig& config) {
  const std::size_t n = sentence.tokens.size();
  if (n > config.max_total_length)
    throw DataError("sentence of " + std::to_string(n) + " tokens exceeds max_total_length " +
                    std::to_string(config.max_total_length) + "; refusing to truncate gold tokens");

  std::size_t keep = std::min(context_tokens.size(), config.max_total_length - n);
  CrossModalInput input;
  input.source_sentence = &sentence;
  input.tokens = sentence.tokens;
  input.tokens.insert(input.tokens.end(), context_tokens.begin(), context_tokens.begin() + keep);
  input.sentence_mask.assign(input.tokens.size(), false);
  for (std::size_t i = 0; i < n; ++i) input.sentence_mask[i] = true;
  return input;
}

std::vector<LabeledSentence> shuffle_pairing(std::vector<LabeledSentence> dataset,
                                             std::uint64_t seed) {
  std::vector<std::optional<std::string>> ids;
  ids.reserve(dataset.size());
  for (const auto& sentence : dataset) ids.push_back(sentence.image_id);
  Rng rng(seed);
  rng.shuffle(ids);
  for (std::size_t i = 0; i < dataset.size(); ++i) dataset[i].image_id = std::move(ids[i]);
  return dataset;
}

}  // namespace ita
