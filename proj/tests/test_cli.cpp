#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "macbig/io.hpp"

using namespace macbig;

namespace {

struct RunResult {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
  std::string cmd = "\"" + std::string(MACBIG_CLI_PATH) + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scratch(const std::string& name) {
  std::string dir = std::string(MACBIG_SCRATCH_DIR) + "/cli";
  ensure_dir(dir);
  return dir + "/" + name;
}

std::string data_file() {
  return std::string(MACBIG_DATA_DIR) + "/synthetic32.jsonl";
}

// small geometry so the smoke runs finish quickly
std::string tiny_config() {
  static const std::string path = [] {
    std::string p = scratch("tiny.config");
    write_text_file(p,
                    "max_sentences=7\n"
                    "max_tokens=8\n"
                    "embed_dim=6\n"
                    "conv_filters=4\n"
                    "kernel_sizes=2,3\n"
                    "gru_hidden=3\n"
                    "attention_dim=4\n"
                    "epochs=2\n"
                    "batch_size=8\n"
                    "folds=1\n"
                    "train_frac=0.7\n"
                    "val_frac=0.15\n"
                    "test_frac=0.15\n"
                    "seed=5\n");
    return p;
  }();
  return path;
}

bool exists(const std::string& path) {
  return std::filesystem::exists(path);
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("cli usage errors exit with code 1") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("bogus-subcommand").code == 1);
  CHECK(run_cli("train --no-such-flag").code == 1);
  CHECK(run_cli("train --data x.jsonl --epochs abc").code == 1);
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("train --help").code == 0);

  std::string bad = scratch("bad.config");
  write_text_file(bad, "bogus_key=1\n");
  RunResult r = run_cli("train --data " + data_file() + " --config " + bad);
  CHECK(r.code == 1);
  CHECK(r.out.find("bogus_key") != std::string::npos);

  write_text_file(bad, "lr=not_a_number\n");
  CHECK(run_cli("train --data " + data_file() + " --config " + bad).code == 1);
}

TEST_CASE("cli data errors exit with code 2") {
  CHECK(run_cli("train --data " + scratch("absent.jsonl")).code == 2);
  CHECK(run_cli("evaluate --model " + scratch("absent.bin") + " --data " +
                data_file())
            .code == 2);

  std::string junk = scratch("junk.bin");
  write_text_file(junk, "not a checkpoint");
  CHECK(run_cli("predict --model " + junk + " --text hello").code == 2);

  std::string malformed = scratch("malformed.jsonl");
  write_text_file(malformed, "{\"text\":\"x\"}\n");
  RunResult r = run_cli("train --data " + malformed);
  CHECK(r.code == 2);
  CHECK(r.out.find("line 1") != std::string::npos);
}

TEST_CASE("cli parameter table prints the layer summary") {
  RunResult r = run_cli("params");
  CHECK(r.code == 0);
  CHECK(r.out.find("embedding") != std::string::npos);
  CHECK(r.out.find("2,478,871") != std::string::npos);
}

TEST_CASE("cli preprocess writes the corpus artifacts") {
  std::string out = scratch("prep_out");
  RunResult r = run_cli("preprocess --input " + data_file() + " --out " + out);
  CHECK(r.code == 0);
  CHECK(r.out.find("records: 32") != std::string::npos);
  CHECK(r.out.find("class negative: 11") != std::string::npos);
  CHECK(r.out.find("class neutral: 11") != std::string::npos);
  CHECK(r.out.find("class positive: 10") != std::string::npos);
  CHECK(r.out.find("empty after cleaning: 0") != std::string::npos);
  CHECK(r.out.find("vocabulary size:") != std::string::npos);

  CHECK(exists(out + "/vocab.txt"));
  CHECK(exists(out + "/summary.txt"));
  CHECK(exists(out + "/config.effective"));
  std::string tokenized = read_text_file(out + "/tokenized.jsonl");
  CHECK(count_lines(tokenized) == 32);
  nlohmann::json first = nlohmann::json::parse(
      tokenized.substr(0, tokenized.find('\n')));
  CHECK(first["index"] == 0);
  CHECK(first.contains("tokens"));
}

TEST_CASE("cli train smoke run produces fold outputs and reports") {
  std::string out = scratch("train_out");
  RunResult r = run_cli("train --data " + data_file() + " --config " +
                        tiny_config() + " --out " + out);
  CAPTURE(r.out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Accuracy") != std::string::npos);
  CHECK(r.out.find("fold 1:") != std::string::npos);

  CHECK(exists(out + "/config.effective"));
  CHECK(exists(out + "/vocab.txt"));
  CHECK(exists(out + "/report.txt"));
  CHECK(exists(out + "/fold_1/checkpoint.bin"));
  CHECK(exists(out + "/fold_1/report.txt"));
  CHECK(exists(out + "/fold_1/report.json"));
  CHECK(!exists(out + "/TRAINING_FAILED.txt"));

  // header plus one row per epoch
  std::string history = read_text_file(out + "/fold_1/history.csv");
  CHECK(count_lines(history) == 3);
  CHECK(history.rfind("epoch,", 0) == 0);

  nlohmann::json rep = nlohmann::json::parse(read_text_file(out + "/report.json"));
  CHECK(rep["folds"] == 1);
  REQUIRE(rep["per_fold"].size() == 1);
  CHECK(rep["mean"].contains("accuracy"));
  CHECK(rep["mean"].contains("macro_auc"));

  SUBCASE("evaluate reuses the checkpoint") {
    std::string eout = scratch("eval_out");
    RunResult e = run_cli("evaluate --model " + out +
                          "/fold_1/checkpoint.bin --data " + data_file() +
                          " --out " + eout);
    CAPTURE(e.out);
    REQUIRE(e.code == 0);
    CHECK(e.out.find("accuracy:") != std::string::npos);
    CHECK(exists(eout + "/report.txt"));
    CHECK(exists(eout + "/report.json"));
    std::string preds = read_text_file(eout + "/predictions.jsonl");
    REQUIRE(count_lines(preds) == 32);
    nlohmann::json p0 =
        nlohmann::json::parse(preds.substr(0, preds.find('\n')));
    CHECK(p0.contains("id"));
    CHECK(p0.contains("true"));
    CHECK(p0.contains("predicted"));
    REQUIRE(p0["probabilities"].size() == 3);
  }

  SUBCASE("predict prints a label and the class probabilities") {
    RunResult p = run_cli("predict --model " + out +
                          "/fold_1/checkpoint.bin --text \"superb delight\"");
    CAPTURE(p.out);
    REQUIRE(p.code == 0);
    CHECK(p.out.find("label: ") != std::string::npos);
    CHECK(p.out.find("probabilities:") != std::string::npos);
    CHECK(p.out.find("positive=") != std::string::npos);
  }

  SUBCASE("attention export writes parseable json and html") {
    std::string aj = scratch("att.json");
    std::string ah = scratch("att.html");
    RunResult a = run_cli("attention --model " + out +
                          "/fold_1/checkpoint.bin --text \"grim wreck day. "
                          "pure misery again.\" --out-json " +
                          aj + " --out-html " + ah);
    CAPTURE(a.out);
    REQUIRE(a.code == 0);
    CHECK(a.out.find("predicted: ") != std::string::npos);

    nlohmann::json j = nlohmann::json::parse(read_text_file(aj));
    CHECK(j.contains("text"));
    CHECK(j.contains("predicted"));
    CHECK(j.contains("sentence_weights"));
    REQUIRE(j["sentences"].size() >= 1);
    CHECK(j["sentences"][0].contains("tokens"));
    CHECK(j["sentences"][0].contains("word_weights"));

    std::string html = read_text_file(ah);
    CHECK(html.find("<html") != std::string::npos);
  }
}

TEST_CASE("cli train reruns are byte-identical for one seed") {
  std::string out1 = scratch("det_a");
  std::string out2 = scratch("det_b");
  std::string common = " --data " + data_file() + " --config " +
                       tiny_config() + " --out ";
  REQUIRE(run_cli("train" + common + out1).code == 0);
  REQUIRE(run_cli("train" + common + out2).code == 0);
  CHECK(read_text_file(out1 + "/fold_1/history.csv") ==
        read_text_file(out2 + "/fold_1/history.csv"));
  CHECK(read_text_file(out1 + "/fold_1/checkpoint.bin") ==
        read_text_file(out2 + "/fold_1/checkpoint.bin"));
}

TEST_CASE("cli flags override config file values") {
  std::string cfgp = scratch("precedence.config");
  write_text_file(cfgp, read_text_file(tiny_config()) + "lr=0.01\nseed=9\nepochs=0\n");

  std::string out = scratch("prec_out");
  RunResult r = run_cli("train --data " + data_file() + " --config " + cfgp +
                        " --out " + out);
  CAPTURE(r.out);
  REQUIRE(r.code == 0);
  std::string eff = read_text_file(out + "/config.effective");
  CHECK(eff.find("lr=0.01\n") != std::string::npos);
  CHECK(eff.find("seed=9\n") != std::string::npos);

  std::string out2 = scratch("prec_out2");
  RunResult r2 = run_cli("train --data " + data_file() + " --config " + cfgp +
                         " --seed 3 --out " + out2);
  CAPTURE(r2.out);
  REQUIRE(r2.code == 0);
  std::string eff2 = read_text_file(out2 + "/config.effective");
  CHECK(eff2.find("lr=0.01\n") != std::string::npos);
  CHECK(eff2.find("seed=3\n") != std::string::npos);
}

TEST_CASE("cli train keeps a failure marker when a later stage fails") {
  std::string single = scratch("single_class.jsonl");
  std::string body;
  for (int i = 0; i < 6; ++i)
    body += "{\"text\":\"lovely cheer number" + std::to_string(i) +
            "\",\"label\":\"positive\"}\n";
  write_text_file(single, body);

  std::string out = scratch("fail_out");
  RunResult r = run_cli("train --data " + single + " --config " +
                        tiny_config() + " --out " + out);
  CHECK(r.code == 2);
  CHECK(exists(out + "/TRAINING_FAILED.txt"));
}
