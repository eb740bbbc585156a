#ifndef MACBIG_TEXTPREP_HPP
#define MACBIG_TEXTPREP_HPP

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "macbig/model.hpp"
#include "macbig/rng.hpp"
#include "macbig/tensor.hpp"

namespace macbig {

inline constexpr std::array<const char*, 3> kClassNames{"negative", "neutral",
                                                        "positive"};

struct CleaningConfig {
  std::set<std::string> stopwords;
  std::set<std::string> abbreviations;  // suppress sentence breaks after these
  std::unordered_map<std::string, std::string> lemma_exceptions;
};

const std::set<std::string>& default_stopwords();
const std::set<std::string>& default_abbreviations();
CleaningConfig default_cleaning();

// Stage 1, applied to raw text, in order: drop URL tokens (any http/www
// fragment), drop a leading retweet marker and its handle, drop @mentions,
// drop non-ASCII bytes, drop tokens carrying a literal "nan", replace the
// remaining special characters with spaces, collapse whitespace, lowercase.
// Output alphabet is [a-z0-9# ] and the function is idempotent.
std::string clean_stage1(const std::string& text);

// Same passes but sentence terminators (. ! ?) survive so the sentence
// splitter can run afterwards; the terminators are stripped per sentence.
std::string clean_stage1_keep_breaks(const std::string& text);

// Split on . ! ? runs followed by whitespace or end of text. A lone period
// after a known abbreviation does not end a sentence. Terminators stay
// attached; blank sentences are dropped.
std::vector<std::string> split_sentences(const std::string& text,
                                         const std::set<std::string>& abbrevs);

std::vector<std::string> tokenize_ws(const std::string& text);

// Rule lemmatizer for plurals and -ed/-ing forms; exceptions win first.
std::string lemmatize(
    const std::string& word,
    const std::unordered_map<std::string, std::string>& exceptions);

// Porter (1980) suffix stripper. Words of length <= 2 pass through.
std::string porter_stem(const std::string& word);

// Stage 2, per token, in order: stopword removal, hashtag removal,
// punctuation stripping, lemmatization, stemming; empty results dropped.
std::vector<std::string> clean_stage2(const std::vector<std::string>& tokens,
                                      const CleaningConfig& cfg);

// Full per-sentence token lists for one raw text (no length truncation).
std::vector<std::vector<std::string>> clean_document(
    const std::string& text, const CleaningConfig& cfg);

struct Vocabulary {
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kOov = 1;

  std::vector<std::string> words;  // words[i] has index i + 2
  std::unordered_map<std::string, std::int32_t> index;

  std::size_t size() const { return words.size() + 2; }
  std::int32_t lookup(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? kOov : it->second;
  }
};

// Keep the most frequent words (ties broken lexicographically) up to
// max_size total entries including the pad and oov slots.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs,
                       std::size_t max_size);

std::string vocab_text(const Vocabulary& v);
Vocabulary parse_vocab_text(const std::string& text);

struct TokenizedDoc {
  TokenGrid grid;  // [max_sentences][max_tokens], pad rows trail
  std::vector<std::vector<std::string>> tokens;  // kept tokens per sentence
  int label = -1;
  bool empty = true;  // nothing survived cleaning
};

// Raw text to a fixed [max_sentences x max_tokens] index grid. Sentences that
// clean to nothing are skipped, the first max_sentences survivors are kept,
// each truncated to its first max_tokens tokens.
TokenizedDoc vectorize(const std::string& text, int label,
                       const Vocabulary& vocab, const HyperParams& hp,
                       const CleaningConfig& cfg);

struct RawRecord {
  std::string text;
  int label = -1;
  std::string country;
  std::string date;
};

// One JSON object per line: required "text" and "label" ("negative",
// "neutral", "positive" or -1/0/1), optional "country" and "date". Errors
// carry the 1-based line number.
std::vector<RawRecord> load_jsonl(const std::string& path);

int parse_label(const std::string& name);

struct EmbeddingLoadStats {
  std::size_t found = 0;
  std::size_t missing = 0;  // vocabulary words absent from the file
  std::vector<std::uint8_t> from_file;  // per embedding row
};

// Text format: word followed by embed_dim floats per line. Rows for words in
// the file are copied, the rest draw uniform(-0.05, 0.05) in row order, and
// the pad row stays zero.
Tensor load_embeddings(const std::string& path, const Vocabulary& vocab,
                       std::size_t embed_dim, Rng& rng,
                       EmbeddingLoadStats* stats = nullptr);

// One entry per line, '#' comments allowed; for stopword/abbreviation files.
std::set<std::string> load_word_list(const std::string& path);

}  // namespace macbig

#endif
