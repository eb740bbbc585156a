#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "macbig/checkpoint.hpp"
#include "macbig/gradcheck_suite.hpp"
#include "macbig/io.hpp"
#include "macbig/rng.hpp"

using namespace macbig;

namespace {

std::string scratch(const std::string& name) {
  std::string dir = std::string(MACBIG_SCRATCH_DIR) + "/checkpoint";
  ensure_dir(dir);
  return dir + "/" + name;
}

Vocabulary tiny_vocab() {
  Vocabulary v;
  for (std::size_t i = 0; i + 2 < kTinyVocab; ++i) {
    std::string w = "w" + std::to_string(i);
    v.index[w] = static_cast<std::int32_t>(i + 2);
    v.words.push_back(w);
  }
  return v;
}

std::string saved_file(const std::string& name) {
  Rng rng(99);
  MacbigParams p = build_params(tiny_hyperparams(), kTinyVocab, rng);
  Vocabulary v = tiny_vocab();
  std::string path = scratch(name);
  save_checkpoint(path, p, v);
  return path;
}

struct RawCheckpoint {
  nlohmann::json manifest;
  std::string blob;
};

RawCheckpoint split_file(const std::string& raw) {
  REQUIRE(raw.size() >= 12);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  std::uint32_t mlen = static_cast<std::uint32_t>(p[8]) |
                       (static_cast<std::uint32_t>(p[9]) << 8) |
                       (static_cast<std::uint32_t>(p[10]) << 16) |
                       (static_cast<std::uint32_t>(p[11]) << 24);
  RawCheckpoint rc;
  rc.manifest = nlohmann::json::parse(raw.substr(12, mlen));
  rc.blob = raw.substr(12 + static_cast<std::size_t>(mlen));
  return rc;
}

std::string join_file(const RawCheckpoint& rc) {
  std::string m = rc.manifest.dump();
  std::string out(kCheckpointMagic, 8);
  std::uint32_t mlen = static_cast<std::uint32_t>(m.size());
  out += static_cast<char>(mlen & 0xff);
  out += static_cast<char>((mlen >> 8) & 0xff);
  out += static_cast<char>((mlen >> 16) & 0xff);
  out += static_cast<char>((mlen >> 24) & 0xff);
  out += m;
  out += rc.blob;
  return out;
}

CheckpointError::Code load_code(const std::string& path) {
  try {
    load_checkpoint(path);
  } catch (const CheckpointError& e) {
    return e.code;
  }
  REQUIRE_MESSAGE(false, ("expected a checkpoint error for " + path).c_str());
  return CheckpointError::Code::bad_magic;
}

}  // namespace

TEST_CASE("checkpoint save, load, save is byte-identical") {
  std::string a_path = saved_file("round_a.bin");
  std::string a = read_text_file(a_path);

  LoadedCheckpoint lc = load_checkpoint(a_path);
  CHECK(lc.vocab.words == tiny_vocab().words);
  CHECK(lc.vocab.index.at("w0") == 2);
  CHECK(lc.params.hp.max_tokens == tiny_hyperparams().max_tokens);
  CHECK(lc.params.vocab() == kTinyVocab);

  std::string b_path = scratch("round_b.bin");
  save_checkpoint(b_path, lc.params, lc.vocab);
  CHECK(read_text_file(b_path) == a);

  // stored values survive the float32 encoding
  Rng rng(99);
  MacbigParams original = build_params(tiny_hyperparams(), kTinyVocab, rng);
  std::vector<double> want = flatten_params(original);
  std::vector<double> got = flatten_params(lc.params);
  REQUIRE(want.size() == got.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(static_cast<float>(want[i]) == static_cast<float>(got[i]));
}

TEST_CASE("corrupted magic reports bad_magic") {
  std::string path = saved_file("magic.bin");
  std::string raw = read_text_file(path);
  raw[0] = 'X';
  write_text_file(path, raw);
  CHECK(load_code(path) == CheckpointError::Code::bad_magic);
}

TEST_CASE("truncated files report truncated") {
  std::string path = saved_file("trunc.bin");
  std::string raw = read_text_file(path);

  std::string cut = scratch("trunc_cut.bin");

  // inside the tensor blob
  write_text_file(cut, raw.substr(0, raw.size() - 5));
  CHECK(load_code(cut) == CheckpointError::Code::truncated);

  // inside the manifest
  write_text_file(cut, raw.substr(0, 20));
  CHECK(load_code(cut) == CheckpointError::Code::truncated);

  // shorter than the fixed header
  write_text_file(cut, raw.substr(0, 6));
  CHECK(load_code(cut) == CheckpointError::Code::truncated);

  write_text_file(cut, "");
  CHECK(load_code(cut) == CheckpointError::Code::truncated);

  CHECK(load_code(scratch("never_written.bin")) ==
        CheckpointError::Code::truncated);
}

TEST_CASE("manifest tampering reports inconsistent_manifest") {
  std::string raw = read_text_file(saved_file("tamper.bin"));
  std::string path = scratch("tampered.bin");

  auto expect_inconsistent = [&](const RawCheckpoint& rc) {
    write_text_file(path, join_file(rc));
    CHECK(load_code(path) == CheckpointError::Code::inconsistent_manifest);
  };

  RawCheckpoint rc = split_file(raw);
  rc.manifest["format"] = 2;
  expect_inconsistent(rc);

  rc = split_file(raw);
  rc.manifest["tensors"][0]["name"] = "bogus";
  expect_inconsistent(rc);

  rc = split_file(raw);
  rc.manifest["tensors"][1]["shape"][0] =
      rc.manifest["tensors"][1]["shape"][0].get<std::size_t>() + 1;
  expect_inconsistent(rc);

  rc = split_file(raw);
  rc.manifest["tensors"][2]["offset"] =
      rc.manifest["tensors"][2]["offset"].get<std::size_t>() + 4;
  expect_inconsistent(rc);

  rc = split_file(raw);
  rc.manifest["tensors"].erase(rc.manifest["tensors"].size() - 1);
  expect_inconsistent(rc);

  rc = split_file(raw);
  nlohmann::json extra;
  extra["name"] = "extra";
  extra["shape"] = nlohmann::json::array({1});
  extra["offset"] = 0;
  rc.manifest["tensors"].push_back(extra);
  expect_inconsistent(rc);

  rc = split_file(raw);
  rc.manifest["hyperparams"].erase("gru_hidden");
  expect_inconsistent(rc);

  rc = split_file(raw);
  rc.blob.append(4, '\0');
  expect_inconsistent(rc);

  // manifest bytes that no longer parse
  std::string broken = raw;
  broken[12] = 'X';
  write_text_file(path, broken);
  CHECK(load_code(path) == CheckpointError::Code::inconsistent_manifest);
}

TEST_CASE("saving rejects a vocabulary that does not match the embedding") {
  Rng rng(7);
  MacbigParams p = build_params(tiny_hyperparams(), kTinyVocab, rng);
  Vocabulary small;
  small.index["one"] = 2;
  small.words.push_back("one");
  CHECK_THROWS_AS(save_checkpoint(scratch("mismatch.bin"), p, small),
                  CheckpointError);
}
