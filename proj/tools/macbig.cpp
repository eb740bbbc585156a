// Command-line front end: preprocess, train, evaluate, predict, attention,
// gradcheck, params. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "macbig/attention_export.hpp"
#include "macbig/checkpoint.hpp"
#include "macbig/config.hpp"
#include "macbig/gemm.hpp"
#include "macbig/gradcheck_suite.hpp"
#include "macbig/io.hpp"
#include "macbig/model.hpp"
#include "macbig/train.hpp"

namespace {

using namespace macbig;
using nlohmann::json;

std::vector<std::string> class_names_for(std::size_t k) {
  std::vector<std::string> names;
  if (k == kClassNames.size()) {
    for (const char* n : kClassNames) names.emplace_back(n);
  } else {
    for (std::size_t c = 0; c < k; ++c)
      names.push_back("class_" + std::to_string(c));
  }
  return names;
}

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

// Flags shared by the data-bearing subcommands. Values only land in the
// CliConfig when the flag was actually given, so the precedence is
// defaults < config file < command line.
struct CommonFlags {
  std::string config, data, glove, out, model, stopwords, abbreviations, lemma;
  std::uint64_t seed = 0;
  std::size_t folds = 0, epochs = 0, batch_size = 0, vocab_size = 0;
  double lr = 0, l2 = 0, dropout = 0, train_frac = 0, val_frac = 0,
         test_frac = 0;
  CLI::App* sub = nullptr;

  void add_config(CLI::App* s) {
    sub = s;
    s->add_option("--config", config, "key=value configuration file");
    s->add_option("--stopwords", stopwords, "stopword list, one per line");
    s->add_option("--abbreviations", abbreviations,
                  "abbreviation list, one per line");
    s->add_option("--lemma-exceptions", lemma,
                  "lemmatizer exceptions, 'word lemma' per line");
  }
  void add_train(CLI::App* s) {
    s->add_option("--seed", seed, "master RNG seed");
    s->add_option("--folds", folds, "cross-validation folds");
    s->add_option("--epochs", epochs, "training epochs");
    s->add_option("--batch-size", batch_size, "minibatch size");
    s->add_option("--lr", lr, "Adam learning rate");
    s->add_option("--l2", l2, "L2 penalty weight");
    s->add_option("--dropout", dropout, "dropout rate before the classifier");
    s->add_option("--train-frac", train_frac, "training split fraction");
    s->add_option("--val-frac", val_frac, "validation split fraction");
    s->add_option("--test-frac", test_frac, "test split fraction");
  }

  std::size_t given(const char* name) const {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o ? o->count() : 0;
  }

  CliConfig resolve() const {
    CliConfig c;
    if (given("--config")) apply_config_file(c, config);
    if (given("--data")) c.data = data;
    if (given("--glove")) c.glove = glove;
    if (given("--out")) c.out = out;
    if (given("--model")) c.checkpoint = model;
    if (given("--stopwords")) c.stopwords_path = stopwords;
    if (given("--abbreviations")) c.abbreviations_path = abbreviations;
    if (given("--lemma-exceptions")) c.lemma_path = lemma;
    if (given("--seed")) c.tc.seed = seed;
    if (given("--folds")) c.tc.folds = folds;
    if (given("--epochs")) c.tc.epochs = epochs;
    if (given("--batch-size")) c.tc.batch_size = batch_size;
    if (given("--lr")) c.tc.lr = lr;
    if (given("--l2")) c.tc.l2 = l2;
    if (given("--dropout")) c.hp.dropout_rate = dropout;
    if (given("--train-frac")) c.tc.train_frac = train_frac;
    if (given("--val-frac")) c.tc.val_frac = val_frac;
    if (given("--test-frac")) c.tc.test_frac = test_frac;
    if (given("--vocab-size")) c.vocab_size = vocab_size;
    return c;
  }
};

struct Corpus {
  std::vector<RawRecord> records;
  std::vector<TokenizedDoc> docs;  // parallel to records
  Vocabulary vocab;
};

// Loads the JSONL records, builds (or adopts) a vocabulary and vectorizes
// every record against it.
Corpus load_corpus(const CliConfig& cfg, const CleaningConfig& cc,
                   const HyperParams& hp, const Vocabulary* fixed_vocab) {
  if (cfg.data.empty()) throw UsageError("--data is required");
  Corpus co;
  co.records = load_jsonl(cfg.data);
  if (fixed_vocab) {
    co.vocab = *fixed_vocab;
  } else {
    std::vector<std::vector<std::string>> corpus;
    for (const RawRecord& r : co.records)
      for (auto& sent : clean_document(r.text, cc))
        corpus.push_back(std::move(sent));
    co.vocab = build_vocab(corpus, cfg.vocab_size);
  }
  co.docs.reserve(co.records.size());
  for (const RawRecord& r : co.records)
    co.docs.push_back(vectorize(r.text, r.label, co.vocab, hp, cc));
  return co;
}

SampleList all_samples(const Corpus& co) {
  SampleList s;
  s.reserve(co.docs.size());
  for (const TokenizedDoc& d : co.docs) s.push_back({&d.grid, d.label});
  return s;
}

void write_report_files(const std::string& dir, const EvalReport& rep) {
  write_text_file(dir + "/report.txt", report_text(rep));
  write_text_file(dir + "/report.json", report_json(rep));
  for (std::size_t c = 0; c < rep.roc.size(); ++c) {
    if (rep.roc[c].points.empty()) continue;
    std::string name = c < rep.class_names.size() ? rep.class_names[c]
                                                  : std::to_string(c);
    write_text_file(dir + "/roc_" + name + ".csv", roc_csv(rep.roc[c]));
  }
}

int cmd_preprocess(const CliConfig& cfg) {
  CleaningConfig cc = cleaning_from(cfg);
  Corpus co = load_corpus(cfg, cc, cfg.hp, nullptr);

  std::vector<std::size_t> per_class(cfg.hp.classes, 0);
  std::size_t empty_count = 0, filled = 0, oov = 0;
  json lines = json::array();
  for (std::size_t i = 0; i < co.docs.size(); ++i) {
    const TokenizedDoc& d = co.docs[i];
    if (d.label >= 0 && static_cast<std::size_t>(d.label) <
                            static_cast<std::size_t>(cfg.hp.classes))
      ++per_class[static_cast<std::size_t>(d.label)];
    if (d.empty) ++empty_count;
    for (const auto& row : d.grid)
      for (std::int32_t t : row) {
        if (t == Vocabulary::kPad) continue;
        ++filled;
        if (t == Vocabulary::kOov) ++oov;
      }
    json rec;
    rec["index"] = i;
    rec["label"] = d.label;
    rec["empty"] = d.empty;
    rec["tokens"] = d.tokens;
    lines.push_back(std::move(rec));
  }

  ensure_dir(cfg.out);
  write_text_file(cfg.out + "/vocab.txt", vocab_text(co.vocab));
  std::string jsonl;
  for (const json& rec : lines) {
    jsonl += rec.dump();
    jsonl += '\n';
  }
  write_text_file(cfg.out + "/tokenized.jsonl", jsonl);

  const std::vector<std::string> names = class_names_for(cfg.hp.classes);
  std::string summary;
  summary += "records: " + std::to_string(co.records.size()) + "\n";
  for (std::size_t c = 0; c < names.size(); ++c)
    summary +=
        "class " + names[c] + ": " + std::to_string(per_class[c]) + "\n";
  summary += "empty after cleaning: " + std::to_string(empty_count) + "\n";
  double rate = filled ? static_cast<double>(oov) / static_cast<double>(filled)
                       : 0.0;
  summary += "oov rate: " + fmt(rate) + "\n";
  summary += "vocabulary size: " + std::to_string(co.vocab.size()) + "\n";
  write_text_file(cfg.out + "/summary.txt", summary);
  write_text_file(cfg.out + "/config.effective", effective_config(cfg));
  std::cout << summary;
  return 0;
}

int cmd_train(const CliConfig& cfg) {
  CleaningConfig cc = cleaning_from(cfg);
  Corpus co = load_corpus(cfg, cc, cfg.hp, nullptr);

  // Records that clean to nothing carry no tokens to learn from.
  SampleList samples;
  std::size_t dropped = 0;
  for (const TokenizedDoc& d : co.docs) {
    if (d.empty) {
      ++dropped;
      continue;
    }
    samples.push_back({&d.grid, d.label});
  }
  if (dropped)
    std::cerr << "warning: dropped " << dropped
              << " record(s) that cleaned to empty\n";
  if (samples.empty()) throw DataError("no usable records in " + cfg.data);

  Tensor pretrained;
  bool have_glove = false;
  if (!cfg.glove.empty()) {
    Rng erng = Rng(cfg.tc.seed).child(3);
    EmbeddingLoadStats stats;
    pretrained =
        load_embeddings(cfg.glove, co.vocab, cfg.hp.embed_dim, erng, &stats);
    have_glove = true;
    std::cout << "embeddings: " << stats.found << " from file, "
              << stats.missing << " randomly initialized\n";
  }

  ensure_dir(cfg.out);
  write_text_file(cfg.out + "/config.effective", effective_config(cfg));
  write_text_file(cfg.out + "/vocab.txt", vocab_text(co.vocab));

  const std::vector<std::string> names = class_names_for(cfg.hp.classes);
  const Vocabulary& vocab = co.vocab;
  FoldCallback save_fold = [&](std::size_t f, const FoldOutcome& fo) {
    std::string dir = cfg.out + "/fold_" + std::to_string(f + 1);
    ensure_dir(dir);
    save_checkpoint(dir + "/checkpoint.bin", fo.result.best_params, vocab);
    write_text_file(dir + "/history.csv", history_csv(fo.result.history));
    write_report_files(dir, fo.report);
  };

  CvOutcome cv;
  try {
    cv = cross_validate(samples, cfg.hp, co.vocab.size(), cfg.tc, names,
                        have_glove ? &pretrained : nullptr, &std::cout,
                        save_fold);
  } catch (const std::exception& e) {
    write_text_file(cfg.out + "/TRAINING_FAILED.txt",
                    std::string(e.what()) + "\n");
    std::cerr << "training failed; completed fold outputs were kept in "
              << cfg.out << "\n";
    throw;
  }

  std::string rep;
  rep += "cross-validation means over " + std::to_string(cv.folds.size()) +
         " fold(s)\n";
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-10s %-10s %-10s %-10s\n", "Accuracy",
                "Precision", "Recall", "F1 score");
  rep += buf;
  std::snprintf(buf, sizeof(buf), "%-10.4f %-10.4f %-10.4f %-10.4f\n",
                cv.mean_accuracy, cv.mean_macro_precision, cv.mean_macro_recall,
                cv.mean_macro_f1);
  rep += buf;
  std::snprintf(buf, sizeof(buf), "macro AUC: %.4f\n", cv.mean_macro_auc);
  rep += buf;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const EvalReport& r = cv.folds[f].report;
    std::snprintf(buf, sizeof(buf),
                  "fold %zu: accuracy %.4f precision %.4f recall %.4f f1 "
                  "%.4f auc %.4f (best epoch %zu)\n",
                  f + 1, r.cls.accuracy, r.cls.macro_precision,
                  r.cls.macro_recall, r.cls.macro_f1, r.macro_auc,
                  cv.folds[f].result.best_epoch);
    rep += buf;
  }
  write_text_file(cfg.out + "/report.txt", rep);

  json jrep;
  jrep["folds"] = cv.folds.size();
  jrep["mean"] = {{"accuracy", cv.mean_accuracy},
                  {"precision", cv.mean_macro_precision},
                  {"recall", cv.mean_macro_recall},
                  {"f1", cv.mean_macro_f1},
                  {"macro_auc", cv.mean_macro_auc}};
  json per_fold = json::array();
  for (const FoldOutcome& fo : cv.folds) {
    per_fold.push_back({{"accuracy", fo.report.cls.accuracy},
                        {"precision", fo.report.cls.macro_precision},
                        {"recall", fo.report.cls.macro_recall},
                        {"f1", fo.report.cls.macro_f1},
                        {"macro_auc", fo.report.macro_auc},
                        {"best_epoch", fo.result.best_epoch}});
  }
  jrep["per_fold"] = std::move(per_fold);
  write_text_file(cfg.out + "/report.json", jrep.dump(2) + "\n");

  std::cout << rep;
  return 0;
}

int cmd_evaluate(const CliConfig& cfg) {
  if (cfg.checkpoint.empty()) throw UsageError("--model is required");
  LoadedCheckpoint lc = load_checkpoint(cfg.checkpoint);
  CleaningConfig cc = cleaning_from(cfg);
  Corpus co = load_corpus(cfg, cc, lc.params.hp, &lc.vocab);

  const std::vector<std::string> names = class_names_for(lc.params.hp.classes);
  std::vector<PredRecord> preds;
  EvalReport rep =
      evaluate_samples(all_samples(co), lc.params, names, &preds);

  std::cout << report_text(rep);
  ensure_dir(cfg.out);
  write_report_files(cfg.out, rep);
  std::string jsonl;
  for (const PredRecord& pr : preds) {
    json rec;
    rec["id"] = pr.index;
    rec["true"] = pr.truth;
    rec["predicted"] = pr.pred;
    rec["probabilities"] = pr.probs;
    jsonl += rec.dump();
    jsonl += '\n';
  }
  write_text_file(cfg.out + "/predictions.jsonl", jsonl);
  write_text_file(cfg.out + "/config.effective", effective_config(cfg));
  return 0;
}

// Shared by predict and attention: clean one text and run a traced forward.
AttentionTrace trace_text(const CliConfig& cfg, const std::string& text,
                          LoadedCheckpoint& lc, TokenizedDoc& td) {
  if (cfg.checkpoint.empty()) throw UsageError("--model is required");
  lc = load_checkpoint(cfg.checkpoint);
  CleaningConfig cc = cleaning_from(cfg);
  td = vectorize(text, -1, lc.vocab, lc.params.hp, cc);
  if (td.empty)
    std::cerr << "warning: text cleaned to empty; predicting on padding "
                 "only\n";
  AttentionTrace trace;
  model_forward<real>(td.grid, lc.params, false, nullptr, nullptr, &trace);
  return trace;
}

int cmd_predict(const CliConfig& cfg, const std::string& text) {
  LoadedCheckpoint lc;
  TokenizedDoc td;
  AttentionTrace trace = trace_text(cfg, text, lc, td);
  const std::vector<std::string> names = class_names_for(lc.params.hp.classes);
  std::cout << "label: " << names[static_cast<std::size_t>(trace.predicted)]
            << "\n";
  std::cout << "probabilities:";
  for (std::size_t c = 0; c < trace.probs.size(); ++c)
    std::cout << " " << names[c] << "="
              << fmt(static_cast<double>(trace.probs[c]));
  std::cout << "\n";
  return 0;
}

int cmd_attention(const CliConfig& cfg, const std::string& text,
                  const std::string& out_json, const std::string& out_html) {
  LoadedCheckpoint lc;
  TokenizedDoc td;
  AttentionTrace trace = trace_text(cfg, text, lc, td);
  write_text_file(out_json, attention_json(td, trace, text));
  if (!out_html.empty())
    write_text_file(out_html, attention_html(td, trace, text, lc.params.hp));
  const std::vector<std::string> names = class_names_for(lc.params.hp.classes);
  std::cout << "predicted: " << names[static_cast<std::size_t>(trace.predicted)]
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  macbig::gemm_init();
  CLI::App app{"hierarchical attention sentiment classifier"};
  app.require_subcommand(1);

  CommonFlags pf, tf, ef, prf, af;

  CLI::App* sp = app.add_subcommand(
      "preprocess", "clean a JSONL corpus, build the vocabulary");
  sp->add_option("--input,--data", pf.data, "input JSONL file")->required();
  sp->add_option("--vocab-size", pf.vocab_size,
                 "vocabulary size including pad and oov");
  sp->add_option("--out", pf.out, "output directory");
  pf.add_config(sp);

  CLI::App* st =
      app.add_subcommand("train", "cross-validated training run");
  st->add_option("--data", tf.data, "training JSONL file")->required();
  st->add_option("--glove", tf.glove, "pretrained embedding text file");
  st->add_option("--out", tf.out, "output directory");
  st->add_option("--vocab-size", tf.vocab_size,
                 "vocabulary size including pad and oov");
  tf.add_config(st);
  tf.add_train(st);

  CLI::App* se =
      app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  se->add_option("--model", ef.model, "checkpoint file")->required();
  se->add_option("--data", ef.data, "evaluation JSONL file")->required();
  se->add_option("--out", ef.out, "output directory");
  ef.add_config(se);

  std::string pr_text;
  CLI::App* spr = app.add_subcommand("predict", "classify one text");
  spr->add_option("--model", prf.model, "checkpoint file")->required();
  spr->add_option("--text", pr_text, "raw input text")->required();
  prf.add_config(spr);

  std::string at_text, at_json, at_html;
  CLI::App* sa =
      app.add_subcommand("attention", "export attention weights for one text");
  sa->add_option("--model", af.model, "checkpoint file")->required();
  sa->add_option("--text", at_text, "raw input text")->required();
  sa->add_option("--out-json", at_json, "attention JSON output path")
      ->required();
  sa->add_option("--out-html", at_html, "attention HTML heatmap path");
  af.add_config(sa);

  bool quick = false;
  CLI::App* sg =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  sg->add_flag("--quick", quick, "single seed per layer, runs in seconds");

  std::size_t params_vocab = 18352;
  CLI::App* spa = app.add_subcommand(
      "params", "print the layer/parameter table against published counts");
  spa->add_option("--vocab-size", params_vocab,
                  "vocabulary size including pad and oov");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sp->parsed()) return cmd_preprocess(pf.resolve());
    if (st->parsed()) return cmd_train(tf.resolve());
    if (se->parsed()) return cmd_evaluate(ef.resolve());
    if (spr->parsed()) return cmd_predict(prf.resolve(), pr_text);
    if (sa->parsed())
      return cmd_attention(af.resolve(), at_text, at_json, at_html);
    if (sg->parsed())
      return run_gradcheck_suite(quick, std::cout) ? 0 : 3;
    if (spa->parsed()) {
      std::cout << macbig::format_param_report(
          macbig::parameter_report(macbig::HyperParams{}, params_vocab));
      return 0;
    }
  } catch (const macbig::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const macbig::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const macbig::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
