#include "macbig/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "macbig/io.hpp"

namespace macbig {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>((v >> 8) & 0xff);
  out += static_cast<char>((v >> 16) & 0xff);
  out += static_cast<char>((v >> 24) & 0xff);
}

void put_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32_le(out, bits);
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = get_u32_le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

nlohmann::json hp_json(const HyperParams& hp) {
  nlohmann::json j;
  j["max_sentences"] = hp.max_sentences;
  j["max_tokens"] = hp.max_tokens;
  j["embed_dim"] = hp.embed_dim;
  j["kernel_sizes"] = hp.kernel_sizes;
  j["conv_filters"] = hp.conv_filters;
  j["gru_hidden"] = hp.gru_hidden;
  j["attention_dim"] = hp.attention_dim;
  j["classes"] = hp.classes;
  j["dropout_rate"] = hp.dropout_rate;
  return j;
}

HyperParams hp_from_json(const nlohmann::json& j) {
  HyperParams hp;
  try {
    hp.max_sentences = j.at("max_sentences").get<std::size_t>();
    hp.max_tokens = j.at("max_tokens").get<std::size_t>();
    hp.embed_dim = j.at("embed_dim").get<std::size_t>();
    hp.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
    hp.conv_filters = j.at("conv_filters").get<std::size_t>();
    hp.gru_hidden = j.at("gru_hidden").get<std::size_t>();
    hp.attention_dim = j.at("attention_dim").get<std::size_t>();
    hp.classes = j.at("classes").get<std::size_t>();
    hp.dropout_rate = j.at("dropout_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          std::string("bad hyperparameters: ") + e.what());
  }
  return hp;
}

}  // namespace

void save_checkpoint(const std::string& path, const MacbigParams& params,
                     const Vocabulary& vocab) {
  if (params.vocab() != vocab.size())
    throw CheckpointError(
        CheckpointError::Code::inconsistent_manifest,
        "vocabulary size does not match the embedding table");

  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["hyperparams"] = hp_json(params.hp);
  manifest["vocab_words"] = vocab.words;

  nlohmann::json tensors = nlohmann::json::array();
  std::string blob;
  std::size_t offset = 0;
  for_each_tensor(params, [&](const std::string& name, const Tensor& t, bool) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    tensors.push_back(e);
    for (real v : t.data) put_f32_le(blob, static_cast<float>(v));
    offset += t.numel() * 4;
  });
  manifest["tensors"] = tensors;

  std::string mtext = manifest.dump();
  std::string out;
  out.append(kCheckpointMagic, 8);
  put_u32_le(out, static_cast<std::uint32_t>(mtext.size()));
  out += mtext;
  out += blob;
  write_text_file(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::string raw;
  try {
    raw = read_text_file(path);
  } catch (const DataError& e) {
    throw CheckpointError(CheckpointError::Code::truncated, e.what());
  }
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());

  if (raw.size() < 12)
    throw CheckpointError(CheckpointError::Code::truncated,
                          "file shorter than the header");
  if (std::memcmp(raw.data(), kCheckpointMagic, 8) != 0)
    throw CheckpointError(CheckpointError::Code::bad_magic,
                          "missing checkpoint magic");
  const std::uint32_t mlen = get_u32_le(p + 8);
  if (raw.size() < 12 + static_cast<std::size_t>(mlen))
    throw CheckpointError(CheckpointError::Code::truncated,
                          "manifest extends past end of file");

  nlohmann::json manifest =
      nlohmann::json::parse(raw.substr(12, mlen), nullptr, false);
  if (manifest.is_discarded())
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          "manifest is not valid JSON");
  if (manifest.value("format", 0) != 1)
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          "unsupported format version");

  LoadedCheckpoint out;
  HyperParams hp = hp_from_json(manifest.at("hyperparams"));
  try {
    out.vocab = Vocabulary();
    for (const auto& w :
         manifest.at("vocab_words").get<std::vector<std::string>>()) {
      out.vocab.index[w] =
          static_cast<std::int32_t>(out.vocab.words.size() + 2);
      out.vocab.words.push_back(w);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          std::string("bad vocabulary: ") + e.what());
  }

  try {
    out.params = zero_params(hp, out.vocab.size());
  } catch (const ShapeError& e) {
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          e.what());
  }

  if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          "missing tensor table");
  const auto& tensors = manifest["tensors"];

  const std::size_t blob_base = 12 + mlen;
  std::size_t expect_offset = 0;
  std::size_t ti = 0;
  std::string err;
  for_each_tensor(out.params, [&](const std::string& name, Tensor& t, bool) {
    if (!err.empty()) return;
    if (ti >= tensors.size()) {
      err = "tensor table ends early at " + name;
      return;
    }
    const auto& e = tensors[ti++];
    if (e.value("name", "") != name) {
      err = "tensor " + std::to_string(ti - 1) + " should be " + name;
      return;
    }
    std::vector<std::size_t> shape =
        e.value("shape", std::vector<std::size_t>{});
    if (shape != t.shape) {
      err = "tensor " + name + " has an unexpected shape";
      return;
    }
    if (e.value("offset", std::size_t(0)) != expect_offset) {
      err = "tensor " + name + " offset is inconsistent";
      return;
    }
    const std::size_t bytes = t.numel() * 4;
    if (blob_base + expect_offset + bytes > raw.size())
      throw CheckpointError(CheckpointError::Code::truncated,
                            "tensor data for " + name +
                                " extends past end of file");
    const unsigned char* src = p + blob_base + expect_offset;
    for (std::size_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<real>(get_f32_le(src + i * 4));
    expect_offset += bytes;
  });
  if (!err.empty())
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest, err);
  if (ti != tensors.size())
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          "tensor table has extra entries");
  if (blob_base + expect_offset != raw.size())
    throw CheckpointError(CheckpointError::Code::inconsistent_manifest,
                          "file size does not match the tensor table");
  return out;
}

}  // namespace macbig
