#include "ita/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ita/errors.hpp"

namespace ita {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json alignment_to_json(const AlignmentConfig& a) {
  return ordered_json{{"attr_threshold", a.attr_threshold},
                      {"max_attrs_per_object", a.max_attrs_per_object},
                      {"num_captions", a.num_captions},
                      {"max_caption_tokens", a.max_caption_tokens},
                      {"modes", a.modes.to_string()},
                      {"max_total_length", a.max_total_length}};
}

AlignmentConfig alignment_from_json(const ordered_json& j) {
  AlignmentConfig a;
  a.attr_threshold = j.at("attr_threshold").get<double>();
  a.max_attrs_per_object = j.at("max_attrs_per_object").get<std::size_t>();
  a.num_captions = j.at("num_captions").get<std::size_t>();
  a.max_caption_tokens = j.at("max_caption_tokens").get<std::size_t>();
  a.modes = ModeSet::parse(j.at("modes").get<std::string>());
  a.max_total_length = j.at("max_total_length").get<std::size_t>();
  return a;
}

ordered_json encoder_to_json(const EncoderConfig& e) {
  return ordered_json{{"vocab_size", e.vocab_size}, {"label_count", e.label_count},
                      {"d_model", e.d_model},       {"d_ff", e.d_ff},
                      {"layers", e.layers},         {"heads", e.heads},
                      {"max_positions", e.max_positions}, {"ln_eps", e.ln_eps}};
}

EncoderConfig encoder_from_json(const ordered_json& j) {
  EncoderConfig e;
  e.vocab_size = j.at("vocab_size").get<std::size_t>();
  e.label_count = j.at("label_count").get<std::size_t>();
  e.d_model = j.at("d_model").get<std::size_t>();
  e.d_ff = j.at("d_ff").get<std::size_t>();
  e.layers = j.at("layers").get<std::size_t>();
  e.heads = j.at("heads").get<std::size_t>();
  e.max_positions = j.at("max_positions").get<std::size_t>();
  e.ln_eps = j.at("ln_eps").get<double>();
  return e;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ordered_json doc;
  doc["format_version"] = ckpt.version;
  doc["encoder"] = encoder_to_json(ckpt.encoder);
  doc["alignment"] = alignment_to_json(ckpt.alignment);
  doc["vocabulary"] = ckpt.vocab.corpus_tokens();
  doc["labels"] = ckpt.vocab.labels();
  ordered_json tensors = ordered_json::object();
  for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
    const NamedTensor& t = ckpt.params.item(i);
    tensors[t.name] = ordered_json{{"shape", {t.value.rows(), t.value.cols()}},
                                   {"data", t.value.values()}};
  }
  doc["tensors"] = std::move(tensors);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out << doc.dump() << '\n';
    if (!out) throw DataError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot move checkpoint into place at '" + path + "': " + ec.message());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  ordered_json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    Checkpoint ckpt;
    ckpt.version = doc.at("format_version").get<std::string>();
    if (ckpt.version != kCheckpointVersion)
      throw DataError("checkpoint format '" + ckpt.version + "' is not supported; this build reads '" +
                      kCheckpointVersion + "'");
    ckpt.encoder = encoder_from_json(doc.at("encoder"));
    ckpt.alignment = alignment_from_json(doc.at("alignment"));
    ckpt.vocab = restore_vocab(doc.at("vocabulary").get<std::vector<std::string>>(),
                               doc.at("labels").get<std::vector<std::string>>());
    register_parameters(ckpt.encoder, ckpt.params);
    const ordered_json& tensors = doc.at("tensors");
    for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
      NamedTensor& t = ckpt.params.item(i);
      const auto it = tensors.find(t.name);
      if (it == tensors.end()) throw DataError("checkpoint is missing tensor '" + t.name + "'");
      const auto shape = it->at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != t.value.rows() || shape[1] != t.value.cols())
        throw DataError("tensor '" + t.name + "' has an unexpected shape");
      auto data = it->at("data").get<std::vector<double>>();
      if (data.size() != t.value.size())
        throw DataError("tensor '" + t.name + "' has an unexpected element count");
      t.value.values() = std::move(data);
    }
    if (ckpt.vocab.token_count() != ckpt.encoder.vocab_size ||
        ckpt.vocab.label_count() != ckpt.encoder.label_count)
      throw DataError("checkpoint vocabulary does not match the declared dimensions");
    if (!ckpt.params.all_finite()) throw DataError("checkpoint contains non-finite values");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' is malformed: " + e.what());
  }
}

}  // namespace ita
