#include "ita/corpus.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ita/errors.hpp"

namespace ita {

namespace {

using nlohmann::json;

enum class TagKind { Outside, Begin, Inside, End, Single };

// Splits a BIOES label into kind and entity type. Returns false when the
// label is outside the alphabet.
bool split_label(const std::string& label, TagKind& kind, std::string& type) {
  if (label == "O") {
    kind = TagKind::Outside;
    type.clear();
    return true;
  }
  if (label.size() < 3 || label[1] != '-') return false;
  switch (label[0]) {
    case 'B': kind = TagKind::Begin; break;
    case 'I': kind = TagKind::Inside; break;
    case 'E': kind = TagKind::End; break;
    case 'S': kind = TagKind::Single; break;
    default: return false;
  }
  type = label.substr(2);
  return !type.empty();
}

}  // namespace

std::optional<BioesViolation> validate_bioes(const std::vector<std::string>& labels) {
  std::string open_type;  // nonempty while inside a B-...E run
  for (std::size_t i = 0; i < labels.size(); ++i) {
    TagKind kind;
    std::string type;
    if (!split_label(labels[i], kind, type))
      return BioesViolation{i, "unknown label '" + labels[i] + "'"};
    if (!open_type.empty()) {
      if (kind == TagKind::Inside || kind == TagKind::End) {
        if (type != open_type)
          return BioesViolation{i, "type mismatch: entity " + open_type + " continued as " + labels[i]};
        if (kind == TagKind::End) open_type.clear();
      } else {
        return BioesViolation{i, "entity " + open_type + " not closed: expected I-" + open_type +
                                     " or E-" + open_type + ", got " + labels[i]};
      }
    } else {
      switch (kind) {
        case TagKind::Outside:
        case TagKind::Single:
          break;
        case TagKind::Begin:
          open_type = type;
          break;
        case TagKind::Inside:
          return BioesViolation{i, "I-" + type + " without preceding B-" + type};
        case TagKind::End:
          return BioesViolation{i, "E-" + type + " without preceding B-" + type};
      }
    }
  }
  if (!open_type.empty())
    return BioesViolation{labels.size() - 1, "entity " + open_type + " not closed at end of sentence"};
  return std::nullopt;
}

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Recognizes "IMGID:<id>" and "# img_id = <id>" headers. Lines containing a
// tab are always token lines (tokens may start with '#').
bool parse_image_header(const std::string& line, std::string& id) {
  if (line.find('\t') != std::string::npos) return false;
  if (line.rfind("IMGID:", 0) == 0) {
    id = trim(line.substr(6));
    return true;
  }
  if (line.rfind("#", 0) == 0) {
    std::string body = trim(line.substr(1));
    if (body.rfind("img_id", 0) == 0) {
      body = trim(body.substr(6));
      if (!body.empty() && body[0] == '=') {
        id = trim(body.substr(1));
        return true;
      }
    }
  }
  return false;
}

}  // namespace

std::vector<LabeledSentence> parse_conll(std::istream& in) {
  std::vector<LabeledSentence> sentences;
  LabeledSentence current;
  std::optional<std::string> pending_image;
  std::string line;
  std::size_t line_no = 0;

  auto finish_sentence = [&]() {
    if (current.tokens.empty()) return;
    if (auto v = validate_bioes(current.labels)) {
      throw DataError("sentence " + std::to_string(sentences.size()) + ", token " +
                      std::to_string(v->index) + ": invalid BIOES sequence: " + v->reason);
    }
    current.image_id = pending_image;
    sentences.push_back(std::move(current));
    current = LabeledSentence{};
    pending_image.reset();
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      finish_sentence();
      continue;
    }
    std::string id;
    if (parse_image_header(line, id)) {
      if (!current.tokens.empty())
        throw DataError("line " + std::to_string(line_no) + ": image header inside a sentence");
      if (id.empty())
        throw DataError("line " + std::to_string(line_no) + ": image header with empty id");
      pending_image = id;
      continue;
    }
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw DataError("line " + std::to_string(line_no) + ": expected token<TAB>label, got '" + line + "'");
    }
    current.tokens.push_back(line.substr(0, tab));
    current.labels.push_back(line.substr(tab + 1));
  }
  finish_sentence();
  return sentences;
}

void serialize_conll(const std::vector<LabeledSentence>& sentences, std::ostream& out) {
  for (const auto& sentence : sentences) {
    if (sentence.image_id) out << "# img_id = " << *sentence.image_id << "\n";
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i)
      out << sentence.tokens[i] << "\t" << sentence.labels[i] << "\n";
    out << "\n";
  }
}

namespace {

const json& require_field(const json& record, const char* name, std::size_t line_no) {
  auto it = record.find(name);
  if (it == record.end())
    throw DataError("line " + std::to_string(line_no) + ": missing field \"" + name + "\"");
  return *it;
}

std::string require_string(const json& record, const char* name, std::size_t line_no) {
  const json& v = require_field(record, name, line_no);
  if (!v.is_string())
    throw DataError("line " + std::to_string(line_no) + ": field \"" + name + "\" must be a string");
  return v.get<std::string>();
}

double require_confidence(const json& record, const char* name, std::size_t line_no) {
  const json& v = require_field(record, name, line_no);
  if (!v.is_number())
    throw DataError("line " + std::to_string(line_no) + ": field \"" + name + "\" must be a number");
  double c = v.get<double>();
  if (c < 0.0 || c > 1.0)
    throw DataError("line " + std::to_string(line_no) + ": field \"" + name + "\" outside [0,1]");
  return c;
}

}  // namespace

ContextStore parse_context_records(std::istream& in) {
  ContextStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (trim(line).empty()) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!record.is_object())
      throw DataError("line " + std::to_string(line_no) + ": record must be a JSON object");

    VisualContextRecord ctx;
    ctx.image_id = require_string(record, "image_id", line_no);

    const json& objects = require_field(record, "objects", line_no);
    if (!objects.is_array())
      throw DataError("line " + std::to_string(line_no) + ": field \"objects\" must be an array");
    if (objects.size() > 100)
      throw DataError("line " + std::to_string(line_no) + ": more than 100 objects");
    for (const json& obj : objects) {
      DetectedObject o;
      o.tag = require_string(obj, "tag", line_no);
      o.confidence = require_confidence(obj, "confidence", line_no);
      const json& attrs = require_field(obj, "attributes", line_no);
      if (!attrs.is_array())
        throw DataError("line " + std::to_string(line_no) + ": field \"attributes\" must be an array");
      for (const json& attr : attrs) {
        Attribute a;
        a.name = require_string(attr, "name", line_no);
        a.confidence = require_confidence(attr, "confidence", line_no);
        o.attributes.push_back(std::move(a));
      }
      ctx.objects.push_back(std::move(o));
    }

    const json& captions = require_field(record, "captions", line_no);
    if (!captions.is_array())
      throw DataError("line " + std::to_string(line_no) + ": field \"captions\" must be an array");
    for (const json& cap : captions) {
      Caption c;
      c.text = require_string(cap, "text", line_no);
      const json& score = require_field(cap, "score", line_no);
      if (!score.is_number())
        throw DataError("line " + std::to_string(line_no) + ": field \"score\" must be a number");
      c.score = score.get<double>();
      ctx.captions.push_back(std::move(c));
    }
    // Keep the descending-score invariant; beam outputs are already ranked.
    std::stable_sort(ctx.captions.begin(), ctx.captions.end(),
                     [](const Caption& a, const Caption& b) { return a.score > b.score; });

    ctx.ocr_text = require_string(record, "ocr_text", line_no);

    auto [it, inserted] = store.records.try_emplace(ctx.image_id, ctx);
    if (!inserted) {
      it->second = std::move(ctx);
      ++store.duplicate_count;
    }
  }
  return store;
}

std::size_t Vocabulary::token_id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? unk_id_ : it->second;
}

const std::string& Vocabulary::token_string(std::size_t id) const { return id_to_token_.at(id); }

std::size_t Vocabulary::label_id(const std::string& label) const {
  auto it = label_to_id_.find(label);
  if (it == label_to_id_.end()) throw DataError("unknown label '" + label + "'");
  return it->second;
}

const std::string& Vocabulary::label_string(std::size_t id) const { return id_to_label_.at(id); }

std::vector<std::string> Vocabulary::corpus_tokens() const {
  // Reserved entries occupy the last three ids.
  return std::vector<std::string>(id_to_token_.begin(), id_to_token_.end() - 3);
}

namespace {

void append_reserved(Vocabulary& vocab, std::unordered_map<std::string, std::size_t>& token_to_id,
                     std::vector<std::string>& id_to_token, std::size_t& unk, std::size_t& pad,
                     std::size_t& sep) {
  unk = id_to_token.size();
  id_to_token.push_back("<unk>");
  token_to_id.try_emplace("<unk>", unk);
  pad = id_to_token.size();
  id_to_token.push_back("<pad>");
  token_to_id.try_emplace("<pad>", pad);
  sep = id_to_token.size();
  id_to_token.push_back(Vocabulary::kSepToken);
  token_to_id.try_emplace(Vocabulary::kSepToken, sep);
  (void)vocab;
}

}  // namespace

Vocabulary build_vocab(const std::vector<LabeledSentence>& sentences,
                       const std::vector<std::vector<std::string>>& context_streams,
                       std::size_t min_count) {
  if (sentences.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& sentence : sentences)
    for (const auto& token : sentence.tokens) ++counts[token];

  Vocabulary vocab;
  auto assign = [&vocab](const std::string& token) {
    if (token == Vocabulary::kSepToken) return;  // always the reserved SEP id
    if (vocab.token_to_id_.try_emplace(token, vocab.id_to_token_.size()).second)
      vocab.id_to_token_.push_back(token);
  };

  for (const auto& sentence : sentences) {
    for (const auto& token : sentence.tokens)
      if (counts[token] >= min_count) assign(token);
    for (const auto& label : sentence.labels) {
      if (vocab.label_to_id_.try_emplace(label, vocab.id_to_label_.size()).second)
        vocab.id_to_label_.push_back(label);
    }
  }
  for (const auto& stream : context_streams)
    for (const auto& token : stream) assign(token);

  append_reserved(vocab, vocab.token_to_id_, vocab.id_to_token_, vocab.unk_id_, vocab.pad_id_,
                  vocab.sep_id_);
  return vocab;
}

Vocabulary restore_vocab(const std::vector<std::string>& corpus_tokens,
                         const std::vector<std::string>& labels) {
  Vocabulary vocab;
  for (const auto& token : corpus_tokens) {
    if (vocab.token_to_id_.try_emplace(token, vocab.id_to_token_.size()).second)
      vocab.id_to_token_.push_back(token);
  }
  for (const auto& label : labels) {
    if (vocab.label_to_id_.try_emplace(label, vocab.id_to_label_.size()).second)
      vocab.id_to_label_.push_back(label);
  }
  append_reserved(vocab, vocab.token_to_id_, vocab.id_to_token_, vocab.unk_id_, vocab.pad_id_,
                  vocab.sep_id_);
  return vocab;
}

}  // namespace ita
