#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "ita/alignment.hpp"
#include "ita/errors.hpp"
#include "ita/rng.hpp"

using namespace ita;

namespace {

VisualContextRecord record_with_objects(std::vector<DetectedObject> objects) {
  VisualContextRecord rec;
  rec.image_id = "r";
  rec.objects = std::move(objects);
  return rec;
}

}  // namespace

TEST_CASE("mode sets parse and print") {
  CHECK(ModeSet::parse("all") == ModeSet{true, true, true});
  CHECK(ModeSet::parse("la") == ModeSet{true, false, false});
  CHECK(ModeSet::parse("ga,oca") == ModeSet{false, true, true});
  CHECK(ModeSet::parse("oca,la") == ModeSet{true, false, true});
  CHECK_THROWS_AS(ModeSet::parse("bogus"), ConfigError);
  CHECK(ModeSet{true, true, true}.to_string() == "all");
  CHECK(ModeSet{false, true, false}.to_string() == "ga");
}

TEST_CASE("whitespace_tokens never yields empties") {
  CHECK(whitespace_tokens("  a   b\tc\n") == std::vector<std::string>{"a", "b", "c"});
  CHECK(whitespace_tokens("").empty());
  CHECK(whitespace_tokens("   ").empty());
}

TEST_CASE("local linearization: confidence order, threshold, attribute cap") {
  AlignmentConfig cfg;

  // Attributes above the threshold come before their object; objects sort by
  // descending detection confidence.
  const auto rec = record_with_objects({
      {"dog", 0.9, {{"brown", 0.5}, {"small", 0.05}}},
      {"ball", 0.8, {}},
  });
  CHECK(linearize_local(rec, cfg) ==
        std::vector<std::string>{"brown", "dog", "ball"});

  // Confidence exactly at the threshold is excluded.
  const auto edge = record_with_objects({{"cat", 0.7, {{"grey", 0.1}, {"fat", 0.10000001}}}});
  CHECK(linearize_local(edge, cfg) == std::vector<std::string>{"fat", "cat"});

  // Five equal-confidence attributes: keep the first three by record order.
  const auto tied = record_with_objects(
      {{"tree", 0.6, {{"a1", 0.9}, {"a2", 0.9}, {"a3", 0.9}, {"a4", 0.9}, {"a5", 0.9}}}});
  CHECK(linearize_local(tied, cfg) == std::vector<std::string>{"a1", "a2", "a3", "tree"});

  // Attributes sort by their own confidence, ties by record order.
  const auto mixed = record_with_objects({{"car", 0.5, {{"slow", 0.3}, {"red", 0.8}}}});
  CHECK(linearize_local(mixed, cfg) == std::vector<std::string>{"red", "slow", "car"});

  // Equal object confidences keep record order (stable).
  const auto stable = record_with_objects({{"first", 0.5, {}}, {"second", 0.5, {}}});
  CHECK(linearize_local(stable, cfg) == std::vector<std::string>{"first", "second"});

  // Multiword tags split on whitespace.
  const auto multi = record_with_objects({{"traffic light", 0.9, {}}});
  CHECK(linearize_local(multi, cfg) == std::vector<std::string>{"traffic", "light"});
}

TEST_CASE("raising the attribute threshold never lengthens the local view") {
  Rng rng(123);
  AlignmentConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    VisualContextRecord rec;
    rec.image_id = "t";
    const std::size_t objs = 1 + rng.next_below(4);
    for (std::size_t o = 0; o < objs; ++o) {
      DetectedObject obj;
      obj.tag = "o" + std::to_string(o);
      obj.confidence = rng.next_double();
      const std::size_t attrs = rng.next_below(6);
      for (std::size_t a = 0; a < attrs; ++a)
        obj.attributes.push_back({"a" + std::to_string(a), rng.next_double()});
      rec.objects.push_back(obj);
    }
    std::size_t previous = SIZE_MAX;
    for (double threshold : {0.0, 0.2, 0.5, 0.9}) {
      cfg.attr_threshold = threshold;
      const std::size_t len = linearize_local(rec, cfg).size();
      CHECK(len <= previous);
      previous = len;
    }
  }
}

TEST_CASE("global linearization joins top-k truncated captions with [X]") {
  AlignmentConfig cfg;
  VisualContextRecord rec;
  rec.image_id = "g";
  rec.captions = {{"a dog runs", 0.9}, {"a brown dog", 0.8}};
  CHECK(linearize_global(rec, cfg) ==
        std::vector<std::string>{"a", "dog", "runs", "[X]", "a", "brown", "dog"});

  // Only the top num_captions survive.
  cfg.num_captions = 1;
  CHECK(linearize_global(rec, cfg) == std::vector<std::string>{"a", "dog", "runs"});

  // Long captions are clipped to max_caption_tokens.
  cfg.num_captions = 5;
  cfg.max_caption_tokens = 2;
  CHECK(linearize_global(rec, cfg) ==
        std::vector<std::string>{"a", "dog", "[X]", "a", "brown"});

  VisualContextRecord empty;
  empty.image_id = "e";
  CHECK(linearize_global(empty, AlignmentConfig{}).empty());
}

TEST_CASE("ocr linearization is whitespace passthrough") {
  VisualContextRecord rec;
  rec.image_id = "o";
  rec.ocr_text = "  SALE  50% OFF ";
  CHECK(linearize_ocr(rec) == std::vector<std::string>{"SALE", "50%", "OFF"});
}

TEST_CASE("combined view elides empty segments together with separators") {
  AlignmentConfig cfg;
  VisualContextRecord rec;
  rec.image_id = "c";
  rec.objects = {{"dog", 0.9, {}}};
  rec.captions = {{"a dog", 0.8}};

  CHECK(linearize_all(rec, cfg) == std::vector<std::string>{"dog", "[X]", "a", "dog"});

  rec.ocr_text = "HI";
  CHECK(linearize_all(rec, cfg) ==
        std::vector<std::string>{"dog", "[X]", "a", "dog", "[X]", "HI"});

  cfg.modes = ModeSet{false, false, true};
  CHECK(linearize_all(rec, cfg) == std::vector<std::string>{"HI"});

  cfg.modes = ModeSet{true, false, true};
  CHECK(linearize_all(rec, cfg) == std::vector<std::string>{"dog", "[X]", "HI"});

  VisualContextRecord blank;
  blank.image_id = "b";
  CHECK(linearize_all(blank, AlignmentConfig{}).empty());
}

TEST_CASE("cross-modal input concatenates and truncates from the context tail") {
  AlignmentConfig cfg;
  LabeledSentence sent{{"John", "ran"}, {"S-PER", "O"}, std::nullopt};

  const CrossModalInput input = build_cross_modal_input(sent, {"ctx1", "ctx2"}, cfg);
  CHECK(input.tokens == std::vector<std::string>{"John", "ran", "ctx1", "ctx2"});
  CHECK(input.sentence_mask == std::vector<bool>{true, true, false, false});
  CHECK(input.sentence_length() == 2);
  CHECK(input.source_sentence == &sent);

  cfg.max_total_length = 3;
  const CrossModalInput clipped = build_cross_modal_input(sent, {"ctx1", "ctx2"}, cfg);
  CHECK(clipped.tokens == std::vector<std::string>{"John", "ran", "ctx1"});

  // A 250-token sentence with 20 context tokens and a 256 cap keeps 6.
  LabeledSentence longsent;
  for (int i = 0; i < 250; ++i) {
    longsent.tokens.push_back("t" + std::to_string(i));
    longsent.labels.push_back("O");
  }
  std::vector<std::string> context(20, "c");
  const CrossModalInput capped =
      build_cross_modal_input(longsent, context, AlignmentConfig{});
  CHECK(capped.tokens.size() == 256);
  CHECK(capped.sentence_length() == 250);

  // The sentence itself is never truncated.
  cfg.max_total_length = 1;
  CHECK_THROWS_AS(build_cross_modal_input(sent, {}, cfg), DataError);
}

TEST_CASE("shuffle_pairing permutes image ids without changing their multiset") {
  std::vector<LabeledSentence> data;
  for (int i = 0; i < 40; ++i) {
    LabeledSentence s{{"w"}, {"O"}, "img" + std::to_string(i)};
    data.push_back(s);
  }
  const std::vector<LabeledSentence> shuffled = shuffle_pairing(data, 5);

  auto ids = [](const std::vector<LabeledSentence>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.image_id.value_or(""));
    return out;
  };
  std::vector<std::string> before = ids(data), after = ids(shuffled);
  CHECK(before != after);  // 40 elements: identity permutation is (astronomically) unlikely
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);

  // Tokens and labels stay put.
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(shuffled[i].tokens == data[i].tokens);

  // Seeded: same seed, same permutation.
  const std::vector<LabeledSentence> again = shuffle_pairing(data, 5);
  CHECK(ids(again) == ids(shuffled));
}
