#include "macbig/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "macbig/io.hpp"
#include "macbig/util.hpp"

namespace macbig {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw UsageError("config key '" + key + "': expected a number, got '" + v +
                     "'");
  return x;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  double x = parse_double(key, v);
  if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x)))
    throw UsageError("config key '" + key +
                     "': expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  unsigned long long x = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw UsageError("config key '" + key +
                     "': expected a non-negative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& v) {
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw UsageError("config key '" + key + "': empty list entry in '" + v +
                       "'");
    out.push_back(parse_size(key, item));
  }
  if (out.empty())
    throw UsageError("config key '" + key + "': expected a comma list");
  return out;
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_size_list(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(xs[i]);
  }
  return s;
}

}  // namespace

void apply_config_kv(CliConfig& c, const std::string& key,
                     const std::string& value) {
  if (key == "max_sentences")
    c.hp.max_sentences = parse_size(key, value);
  else if (key == "max_tokens")
    c.hp.max_tokens = parse_size(key, value);
  else if (key == "embed_dim")
    c.hp.embed_dim = parse_size(key, value);
  else if (key == "conv_filters")
    c.hp.conv_filters = parse_size(key, value);
  else if (key == "kernel_sizes")
    c.hp.kernel_sizes = parse_size_list(key, value);
  else if (key == "gru_hidden")
    c.hp.gru_hidden = parse_size(key, value);
  else if (key == "attention_dim")
    c.hp.attention_dim = parse_size(key, value);
  else if (key == "classes")
    c.hp.classes = parse_size(key, value);
  else if (key == "dropout")
    c.hp.dropout_rate = parse_double(key, value);
  else if (key == "lr")
    c.tc.lr = parse_double(key, value);
  else if (key == "beta1")
    c.tc.beta1 = parse_double(key, value);
  else if (key == "beta2")
    c.tc.beta2 = parse_double(key, value);
  else if (key == "epsilon")
    c.tc.epsilon = parse_double(key, value);
  else if (key == "l2")
    c.tc.l2 = parse_double(key, value);
  else if (key == "batch_size")
    c.tc.batch_size = parse_size(key, value);
  else if (key == "epochs")
    c.tc.epochs = parse_size(key, value);
  else if (key == "folds")
    c.tc.folds = parse_size(key, value);
  else if (key == "train_frac")
    c.tc.train_frac = parse_double(key, value);
  else if (key == "val_frac")
    c.tc.val_frac = parse_double(key, value);
  else if (key == "test_frac")
    c.tc.test_frac = parse_double(key, value);
  else if (key == "seed")
    c.tc.seed = parse_u64(key, value);
  else if (key == "vocab_size")
    c.vocab_size = parse_size(key, value);
  else if (key == "data")
    c.data = value;
  else if (key == "glove")
    c.glove = value;
  else if (key == "out")
    c.out = value;
  else if (key == "checkpoint")
    c.checkpoint = value;
  else if (key == "stopwords")
    c.stopwords_path = value;
  else if (key == "abbreviations")
    c.abbreviations_path = value;
  else if (key == "lemma_exceptions")
    c.lemma_path = value;
  else
    throw UsageError("unknown config key '" + key + "'");
}

void apply_config_file(CliConfig& c, const std::string& path) {
  std::string text = read_text_file(path);
  std::istringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    try {
      apply_config_kv(c, key, value);
    } catch (const UsageError& e) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string effective_config(const CliConfig& c) {
  std::map<std::string, std::string> kv;
  kv["max_sentences"] = std::to_string(c.hp.max_sentences);
  kv["max_tokens"] = std::to_string(c.hp.max_tokens);
  kv["embed_dim"] = std::to_string(c.hp.embed_dim);
  kv["conv_filters"] = std::to_string(c.hp.conv_filters);
  kv["kernel_sizes"] = fmt_size_list(c.hp.kernel_sizes);
  kv["gru_hidden"] = std::to_string(c.hp.gru_hidden);
  kv["attention_dim"] = std::to_string(c.hp.attention_dim);
  kv["classes"] = std::to_string(c.hp.classes);
  kv["dropout"] = fmt_double(c.hp.dropout_rate);
  kv["lr"] = fmt_double(c.tc.lr);
  kv["beta1"] = fmt_double(c.tc.beta1);
  kv["beta2"] = fmt_double(c.tc.beta2);
  kv["epsilon"] = fmt_double(c.tc.epsilon);
  kv["l2"] = fmt_double(c.tc.l2);
  kv["batch_size"] = std::to_string(c.tc.batch_size);
  kv["epochs"] = std::to_string(c.tc.epochs);
  kv["folds"] = std::to_string(c.tc.folds);
  kv["train_frac"] = fmt_double(c.tc.train_frac);
  kv["val_frac"] = fmt_double(c.tc.val_frac);
  kv["test_frac"] = fmt_double(c.tc.test_frac);
  kv["seed"] = std::to_string(c.tc.seed);
  kv["vocab_size"] = std::to_string(c.vocab_size);
  if (!c.data.empty()) kv["data"] = c.data;
  if (!c.glove.empty()) kv["glove"] = c.glove;
  if (!c.out.empty()) kv["out"] = c.out;
  if (!c.checkpoint.empty()) kv["checkpoint"] = c.checkpoint;
  if (!c.stopwords_path.empty()) kv["stopwords"] = c.stopwords_path;
  if (!c.abbreviations_path.empty()) kv["abbreviations"] = c.abbreviations_path;
  if (!c.lemma_path.empty()) kv["lemma_exceptions"] = c.lemma_path;
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

CleaningConfig cleaning_from(const CliConfig& c) {
  CleaningConfig cc = default_cleaning();
  if (!c.stopwords_path.empty()) cc.stopwords = load_word_list(c.stopwords_path);
  if (!c.abbreviations_path.empty())
    cc.abbreviations = load_word_list(c.abbreviations_path);
  if (!c.lemma_path.empty()) {
    cc.lemma_exceptions.clear();
    std::string text = read_text_file(c.lemma_path);
    std::istringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      std::istringstream ls(t);
      std::string from, to, extra;
      if (!(ls >> from >> to) || (ls >> extra))
        throw DataError(c.lemma_path + ":" + std::to_string(lineno) +
                        ": expected two words per line");
      std::transform(from.begin(), from.end(), from.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      std::transform(to.begin(), to.end(), to.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      cc.lemma_exceptions[from] = to;
    }
  }
  return cc;
}

}  // namespace macbig
