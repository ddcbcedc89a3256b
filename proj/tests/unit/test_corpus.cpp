#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ita/corpus.hpp"
#include "ita/errors.hpp"

using namespace ita;

namespace {

std::vector<LabeledSentence> parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_conll(in);
}

}  // namespace

TEST_CASE("parse_conll reads headers, tokens and blank-line boundaries") {
  const auto sents = parse_text(
      "# img_id = pic7\n"
      "John\tB-PER\n"
      "Smith\tE-PER\n"
      "\n"
      "IMGID:pic8\n"
      "Paris\tS-LOC\n"
      "\n"
      "plain\tO\n");
  REQUIRE(sents.size() == 3);
  CHECK(sents[0].image_id.value() == "pic7");
  CHECK(sents[0].tokens == std::vector<std::string>{"John", "Smith"});
  CHECK(sents[0].labels == std::vector<std::string>{"B-PER", "E-PER"});
  CHECK(sents[1].image_id.value() == "pic8");
  CHECK_FALSE(sents[2].image_id.has_value());
}

TEST_CASE("parse_conll round-trips through serialize_conll") {
  const std::string text =
      "# img_id = a1\n"
      "one\tS-ORG\n"
      "two\tO\n"
      "\n"
      "three\tO\n";
  const auto sents = parse_text(text);
  std::ostringstream out;
  serialize_conll(sents, out);
  const auto again = parse_text(out.str());
  REQUIRE(again.size() == sents.size());
  for (std::size_t i = 0; i < sents.size(); ++i) {
    CHECK(again[i].tokens == sents[i].tokens);
    CHECK(again[i].labels == sents[i].labels);
    CHECK(again[i].image_id == sents[i].image_id);
  }
}

TEST_CASE("parse_conll rejects malformed rows and bad label grammar") {
  CHECK_THROWS_AS(parse_text("token-without-tab\n"), DataError);
  CHECK_THROWS_AS(parse_text("x\tB-PER\n\n"), DataError);      // dangling B
  CHECK_THROWS_AS(parse_text("x\tI-PER\ny\tE-PER\n"), DataError);  // I without B
  CHECK_THROWS_AS(parse_text("x\tQ-PER\n"), DataError);        // unknown prefix
}

TEST_CASE("validate_bioes reports the offending index") {
  CHECK_FALSE(validate_bioes({"O", "S-LOC", "B-PER", "I-PER", "E-PER"}).has_value());
  const auto bad = validate_bioes({"B-PER", "E-LOC"});
  REQUIRE(bad.has_value());
  CHECK(bad->index == 1);
  CHECK_FALSE(validate_bioes({"B-PER", "E-PER", "S-PER"}).has_value());
  CHECK(validate_bioes({"E-PER"}).has_value());
  CHECK(validate_bioes({"B-PER", "O"}).has_value());
}

TEST_CASE("parse_context_records keeps the last duplicate and counts it") {
  std::istringstream in(
      R"({"image_id": "a", "objects": [], "captions": [], "ocr_text": "first"})"
      "\n"
      R"({"image_id": "b", "objects": [{"tag": "dog", "confidence": 0.5, "attributes": []}], "captions": [], "ocr_text": ""})"
      "\n"
      R"({"image_id": "a", "objects": [], "captions": [], "ocr_text": "second"})"
      "\n");
  const ContextStore store = parse_context_records(in);
  CHECK(store.records.size() == 2);
  CHECK(store.duplicate_count == 1);
  REQUIRE(store.find("a") != nullptr);
  CHECK(store.find("a")->ocr_text == "second");
  CHECK(store.find("missing") == nullptr);
}

TEST_CASE("parse_context_records sorts captions by descending score") {
  std::istringstream in(
      R"({"image_id": "c", "objects": [], "captions": [{"text": "low", "score": 0.2}, {"text": "high", "score": 0.9}, {"text": "mid", "score": 0.5}], "ocr_text": ""})"
      "\n");
  const ContextStore store = parse_context_records(in);
  const auto& caps = store.find("c")->captions;
  REQUIRE(caps.size() == 3);
  CHECK(caps[0].text == "high");
  CHECK(caps[1].text == "mid");
  CHECK(caps[2].text == "low");
}

TEST_CASE("parse_context_records rejects malformed lines") {
  std::istringstream bad_json("{not json\n");
  CHECK_THROWS_AS(parse_context_records(bad_json), DataError);
  std::istringstream missing_field(R"({"image_id": "x"})" "\n");
  CHECK_THROWS_AS(parse_context_records(missing_field), DataError);
}

TEST_CASE("build_vocab: ids in first-occurrence order, reserved tail, min_count") {
  std::vector<LabeledSentence> sents;
  sents.push_back({{"the", "dog", "the"}, {"O", "S-ANI", "O"}, std::nullopt});
  sents.push_back({{"a", "dog"}, {"O", "S-ANI"}, std::nullopt});

  const Vocabulary vocab = build_vocab(sents, {{"ctx", "dog"}}, 1);
  CHECK(vocab.token_id("the") == 0);
  CHECK(vocab.token_id("dog") == 1);
  CHECK(vocab.token_id("a") == 2);
  CHECK(vocab.token_id("ctx") == 3);
  CHECK(vocab.token_id("never-seen") == vocab.unk_id());
  CHECK(vocab.token_string(vocab.sep_id()) == Vocabulary::kSepToken);
  CHECK(vocab.token_id(Vocabulary::kSepToken) == vocab.sep_id());

  // Reserved entries sit after every corpus token.
  CHECK(vocab.unk_id() >= 4);
  CHECK(vocab.pad_id() >= 4);
  CHECK(vocab.sep_id() >= 4);

  CHECK(vocab.label_id("O") == 0);
  CHECK(vocab.label_id("S-ANI") == 1);
  CHECK(vocab.label_count() == 2);

  // min_count prunes rare sentence tokens but never context tokens.
  const Vocabulary pruned = build_vocab(sents, {{"ctx"}}, 2);
  CHECK(pruned.token_id("a") == pruned.unk_id());
  CHECK(pruned.token_id("the") != pruned.unk_id());
  CHECK(pruned.token_id("dog") != pruned.unk_id());
  CHECK(pruned.token_id("ctx") != pruned.unk_id());

  CHECK_THROWS_AS(build_vocab({}, {}, 1), DataError);
}

TEST_CASE("restore_vocab rebuilds the same mapping") {
  std::vector<LabeledSentence> sents;
  sents.push_back({{"x", "y"}, {"O", "S-T"}, std::nullopt});
  const Vocabulary vocab = build_vocab(sents, {{"z"}}, 1);
  const Vocabulary restored = restore_vocab(vocab.corpus_tokens(), vocab.labels());
  CHECK(restored.token_count() == vocab.token_count());
  CHECK(restored.token_id("x") == vocab.token_id("x"));
  CHECK(restored.token_id("z") == vocab.token_id("z"));
  CHECK(restored.unk_id() == vocab.unk_id());
  CHECK(restored.sep_id() == vocab.sep_id());
  CHECK(restored.label_id("S-T") == vocab.label_id("S-T"));
}
