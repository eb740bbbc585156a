#ifndef MACBIG_CONFIG_HPP
#define MACBIG_CONFIG_HPP

#include <string>

#include "macbig/model.hpp"
#include "macbig/optim.hpp"
#include "macbig/textprep.hpp"

namespace macbig {

// One bag of settings shared by every subcommand; a key=value file ('#'
// comments) can set any of them, explicit command-line flags win afterwards.
struct CliConfig {
  HyperParams hp;
  TrainConfig tc;
  std::size_t vocab_size = 18352;
  std::string data;
  std::string glove;
  std::string out = "out";
  std::string checkpoint;
  std::string stopwords_path;
  std::string abbreviations_path;
  std::string lemma_path;
};

// Throws UsageError on unknown keys or unparseable values.
void apply_config_kv(CliConfig& c, const std::string& key,
                     const std::string& value);
void apply_config_file(CliConfig& c, const std::string& path);

// Sorted key=value dump of every setting; written into output directories.
std::string effective_config(const CliConfig& c);

// Stopword/abbreviation/lemma-exception files if given, defaults otherwise.
CleaningConfig cleaning_from(const CliConfig& c);

}  // namespace macbig

#endif
