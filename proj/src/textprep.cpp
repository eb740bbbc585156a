#include "macbig/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "macbig/io.hpp"

namespace macbig {

namespace {

bool is_space_b(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_alnum_ascii(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

// the character class that survives stage 1; '#' stays so stage 2 can see
// hashtag tokens
bool frag_char(unsigned char c) { return is_alnum_ascii(c) || c == '#'; }

char lower_ascii(unsigned char c) {
  return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                              : static_cast<char>(c);
}

std::string to_lower(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out += lower_ascii(c);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space_b(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space_b(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Maximal runs of [a-z0-9#] (lowercased). Matching on fragments instead of
// whole tokens keeps stage 1 idempotent: anything the symbol pass would
// expose as a standalone token is already visible as a fragment here.
std::vector<std::string> fragments_lower(const std::string& tok) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : tok) {
    if (frag_char(c)) {
      cur += lower_ascii(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool has_url_fragment(const std::string& tok) {
  for (const std::string& f : fragments_lower(tok))
    if (f.rfind("http", 0) == 0 || f.rfind("www", 0) == 0) return true;
  return false;
}

bool has_nan_fragment(const std::string& tok) {
  for (const std::string& f : fragments_lower(tok))
    if (f == "nan") return true;
  return false;
}

std::string stage1_impl(const std::string& text, bool keep_breaks) {
  std::vector<std::string> toks = tokenize_ws(text);

  std::erase_if(toks, has_url_fragment);

  if (toks.size() >= 2 && !toks[1].empty() && toks[1][0] == '@') {
    std::vector<std::string> f = fragments_lower(toks[0]);
    if (f.size() == 1 && f[0] == "rt") toks.erase(toks.begin(), toks.begin() + 2);
  }

  std::erase_if(toks, [](const std::string& t) {
    return !t.empty() && t[0] == '@';
  });

  for (std::string& t : toks) {
    std::string kept;
    for (unsigned char c : t)
      if (c < 0x80) kept += static_cast<char>(c);
    t = std::move(kept);
  }

  std::erase_if(toks, has_nan_fragment);

  std::string joined;
  for (const std::string& t : toks) {
    if (!joined.empty()) joined += ' ';
    for (unsigned char c : t) {
      bool keep = frag_char(c) ||
                  (keep_breaks && (c == '.' || c == '!' || c == '?'));
      joined += keep ? static_cast<char>(c) : ' ';
    }
  }

  std::string out;
  for (unsigned char c : joined) {
    if (is_space_b(c)) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    } else {
      out += lower_ascii(c);
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

std::string clean_stage1(const std::string& text) {
  return stage1_impl(text, false);
}

std::string clean_stage1_keep_breaks(const std::string& text) {
  return stage1_impl(text, true);
}

std::vector<std::string> tokenize_ws(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_space_b(c)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += static_cast<char>(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> split_sentences(
    const std::string& text, const std::set<std::string>& abbrevs) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t start = 0, i = 0;
  auto flush = [&](std::size_t endpos) {
    std::string s = trim(text.substr(start, endpos - start));
    if (!s.empty()) out.push_back(s);
    start = endpos;
  };
  auto is_term = [&](std::size_t k) {
    return text[k] == '.' || text[k] == '!' || text[k] == '?';
  };
  while (i < n) {
    if (!is_term(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_term(j)) ++j;
    bool boundary = j >= n || is_space_b(static_cast<unsigned char>(text[j]));
    if (boundary && j - i == 1 && text[i] == '.') {
      // a lone period after a known abbreviation does not split
      std::size_t b = i;
      while (b > start && !is_space_b(static_cast<unsigned char>(text[b - 1])))
        --b;
      std::string prev = to_lower(text.substr(b, i - b));
      if (!prev.empty() && abbrevs.count(prev)) boundary = false;
    }
    if (boundary) flush(j);
    i = j;
  }
  if (start < n) flush(n);
  return out;
}

std::string lemmatize(
    const std::string& word,
    const std::unordered_map<std::string, std::string>& exceptions) {
  auto it = exceptions.find(word);
  if (it != exceptions.end()) return it->second;

  const std::size_t n = word.size();
  auto ends = [&](const char* suf) {
    std::size_t m = std::char_traits<char>::length(suf);
    return n >= m && word.compare(n - m, m, suf) == 0;
  };
  // letters commonly doubled before -ed/-ing ("hopped", "running"); 'l' and
  // sibilants stay doubled ("falling", "hissing")
  auto undouble = [](std::string s) {
    static const std::string set = "bdgkmnprt";
    if (s.size() >= 3 && s[s.size() - 1] == s[s.size() - 2] &&
        set.find(s.back()) != std::string::npos)
      s.pop_back();
    return s;
  };

  if (ends("ies") && n > 4) return word.substr(0, n - 3) + "y";
  if (ends("sses")) return word.substr(0, n - 2);
  if (ends("xes") || ends("zes") || ends("ches") || ends("shes") ||
      ends("sses"))
    return word.substr(0, n - 2);
  if (ends("eed")) return word.substr(0, n - 1);
  if (ends("ied") && n >= 5) return word.substr(0, n - 3) + "y";
  if (ends("ing") && n >= 5) {
    std::string stem = word.substr(0, n - 3);
    if (stem.size() < 3) return word;
    return undouble(std::move(stem));
  }
  if (ends("ed") && n >= 4) {
    std::string stem = word.substr(0, n - 2);
    if (stem.size() < 2) return word;
    return undouble(std::move(stem));
  }
  if (ends("s") && !ends("ss") && !ends("us") && !ends("is") && n >= 4)
    return word.substr(0, n - 1);
  return word;
}

// ---------- Porter stemmer ----------

namespace {

bool p_cons(const std::string& w, std::size_t i) {
  char c = w[i];
  if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
  if (c == 'y') return i == 0 ? true : !p_cons(w, i - 1);
  return true;
}

// number of vowel-to-consonant transitions in [C](VC)^m[V]
int p_measure(const std::string& w) {
  std::size_t i = 0, n = w.size();
  int m = 0;
  while (i < n && p_cons(w, i)) ++i;
  while (i < n) {
    while (i < n && !p_cons(w, i)) ++i;
    if (i >= n) break;
    ++m;
    while (i < n && p_cons(w, i)) ++i;
  }
  return m;
}

bool p_has_vowel(const std::string& w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!p_cons(w, i)) return true;
  return false;
}

bool p_double_cons(const std::string& w) {
  std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && p_cons(w, n - 1);
}

// consonant-vowel-consonant ending where the last consonant is not w, x, y
bool p_cvc(const std::string& w) {
  std::size_t n = w.size();
  if (n < 3) return false;
  if (!p_cons(w, n - 3) || p_cons(w, n - 2) || !p_cons(w, n - 1)) return false;
  char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool p_ends(const std::string& w, const char* suf) {
  std::size_t m = std::char_traits<char>::length(suf);
  return w.size() >= m && w.compare(w.size() - m, m, suf) == 0;
}

// Longest-first suffix table; the first match consumes the step whether or
// not the measure condition lets it fire.
struct PRule {
  const char* suf;
  const char* repl;
};

bool p_apply_table(std::string& w, const PRule* rules, std::size_t count,
                   int min_m) {
  for (std::size_t r = 0; r < count; ++r) {
    if (!p_ends(w, rules[r].suf)) continue;
    std::size_t sl = std::char_traits<char>::length(rules[r].suf);
    std::string stem = w.substr(0, w.size() - sl);
    if (p_measure(stem) > min_m) w = stem + rules[r].repl;
    return true;
  }
  return false;
}

}  // namespace

std::string porter_stem(const std::string& word) {
  if (word.size() <= 2) return word;
  for (unsigned char c : word)
    if (c < 'a' || c > 'z') return word;  // stemming is for plain words

  std::string w = word;

  // step 1a
  if (p_ends(w, "sses")) {
    w.erase(w.size() - 2);
  } else if (p_ends(w, "ies")) {
    w.erase(w.size() - 2);
  } else if (!p_ends(w, "ss") && p_ends(w, "s")) {
    w.pop_back();
  }

  // step 1b
  bool cleanup = false;
  if (p_ends(w, "eed")) {
    if (p_measure(w.substr(0, w.size() - 3)) > 0) w.pop_back();
  } else if (p_ends(w, "ed") && p_has_vowel(w.substr(0, w.size() - 2))) {
    w.erase(w.size() - 2);
    cleanup = true;
  } else if (p_ends(w, "ing") && p_has_vowel(w.substr(0, w.size() - 3))) {
    w.erase(w.size() - 3);
    cleanup = true;
  }
  if (cleanup) {
    if (p_ends(w, "at") || p_ends(w, "bl") || p_ends(w, "iz")) {
      w += 'e';
    } else if (p_double_cons(w) && !p_ends(w, "l") && !p_ends(w, "s") &&
               !p_ends(w, "z")) {
      w.pop_back();
    } else if (p_measure(w) == 1 && p_cvc(w)) {
      w += 'e';
    }
  }

  // step 1c
  if (p_ends(w, "y") && p_has_vowel(w.substr(0, w.size() - 1)))
    w.back() = 'i';

  // step 2 (m > 0)
  static const PRule step2[] = {
      {"ational", "ate"}, {"ization", "ize"}, {"iveness", "ive"},
      {"fulness", "ful"}, {"ousness", "ous"}, {"tional", "tion"},
      {"biliti", "ble"},  {"entli", "ent"},   {"ousli", "ous"},
      {"ation", "ate"},   {"alism", "al"},    {"aliti", "al"},
      {"iviti", "ive"},   {"enci", "ence"},   {"anci", "ance"},
      {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},
      {"ator", "ate"},    {"eli", "e"},
  };
  p_apply_table(w, step2, std::size(step2), 0);

  // step 3 (m > 0)
  static const PRule step3[] = {
      {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
      {"ical", "ic"},  {"ness", ""},  {"ful", ""},
  };
  p_apply_table(w, step3, std::size(step3), 0);

  // step 4 (m > 1); "ion" additionally needs a stem ending in s or t
  {
    static const PRule step4[] = {
        {"ement", ""}, {"ance", ""}, {"ence", ""}, {"able", ""},
        {"ible", ""},  {"ment", ""}, {"ant", ""},  {"ent", ""},
        {"ism", ""},   {"ate", ""},  {"iti", ""},  {"ous", ""},
        {"ive", ""},   {"ize", ""},  {"ion", ""},  {"al", ""},
        {"er", ""},    {"ic", ""},   {"ou", ""},
    };
    for (const PRule& r : step4) {
      if (!p_ends(w, r.suf)) continue;
      std::size_t sl = std::char_traits<char>::length(r.suf);
      std::string stem = w.substr(0, w.size() - sl);
      bool ok = p_measure(stem) > 1;
      if (ok && std::string(r.suf) == "ion")
        ok = !stem.empty() && (stem.back() == 's' || stem.back() == 't');
      if (ok) w = stem;
      break;
    }
  }

  // step 5a
  if (p_ends(w, "e")) {
    std::string stem = w.substr(0, w.size() - 1);
    int m = p_measure(stem);
    if (m > 1 || (m == 1 && !p_cvc(stem))) w = stem;
  }
  // step 5b
  if (p_measure(w) > 1 && p_double_cons(w) && w.back() == 'l') w.pop_back();

  return w;
}

std::vector<std::string> clean_stage2(const std::vector<std::string>& tokens,
                                      const CleaningConfig& cfg) {
  std::vector<std::string> out;
  for (const std::string& tok : tokens) {
    if (cfg.stopwords.count(tok)) continue;
    if (!tok.empty() && tok[0] == '#') continue;
    std::string stripped;
    for (unsigned char c : tok)
      if (is_alnum_ascii(c)) stripped += lower_ascii(c);
    if (stripped.empty()) continue;
    std::string stem = porter_stem(lemmatize(stripped, cfg.lemma_exceptions));
    if (!stem.empty()) out.push_back(std::move(stem));
  }
  return out;
}

std::vector<std::vector<std::string>> clean_document(
    const std::string& text, const CleaningConfig& cfg) {
  std::string s1 = clean_stage1_keep_breaks(text);
  std::vector<std::vector<std::string>> out;
  for (const std::string& sent : split_sentences(s1, cfg.abbreviations)) {
    std::vector<std::string> toks = clean_stage2(tokenize_ws(sent), cfg);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs,
                       std::size_t max_size) {
  if (max_size < 3)
    throw UsageError("vocabulary size must be at least 3 (pad, oov, a word)");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& doc : docs)
    for (const std::string& w : doc) ++counts[w];
  if (counts.empty()) throw DataError("empty corpus, no vocabulary to build");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(),
                                                            counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  const std::size_t keep = std::min(ranked.size(), max_size - 2);
  for (std::size_t i = 0; i < keep; ++i) {
    v.index[ranked[i].first] = static_cast<std::int32_t>(i + 2);
    v.words.push_back(ranked[i].first);
  }
  return v;
}

std::string vocab_text(const Vocabulary& v) {
  std::string out;
  for (const std::string& w : v.words) {
    out += w;
    out += '\n';
  }
  return out;
}

Vocabulary parse_vocab_text(const std::string& text) {
  Vocabulary v;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (v.index.count(line))
      throw DataError("vocabulary line " + std::to_string(line_no) +
                      ": duplicate word '" + line + "'");
    v.index[line] = static_cast<std::int32_t>(v.words.size() + 2);
    v.words.push_back(line);
  }
  return v;
}

TokenizedDoc vectorize(const std::string& text, int label,
                       const Vocabulary& vocab, const HyperParams& hp,
                       const CleaningConfig& cfg) {
  validate_hyperparams(hp);
  TokenizedDoc d;
  d.label = label;
  d.grid.assign(hp.max_sentences,
                std::vector<std::int32_t>(hp.max_tokens, Vocabulary::kPad));

  std::string s1 = clean_stage1_keep_breaks(text);
  std::size_t row = 0;
  for (const std::string& sent : split_sentences(s1, cfg.abbreviations)) {
    if (row >= hp.max_sentences) break;
    std::vector<std::string> toks = clean_stage2(tokenize_ws(sent), cfg);
    if (toks.empty()) continue;  // dropped, keeps pad rows trailing
    if (toks.size() > hp.max_tokens) toks.resize(hp.max_tokens);
    for (std::size_t t = 0; t < toks.size(); ++t)
      d.grid[row][t] = vocab.lookup(toks[t]);
    d.tokens.push_back(std::move(toks));
    ++row;
  }
  d.empty = row == 0;
  return d;
}

int parse_label(const std::string& name) {
  for (std::size_t c = 0; c < kClassNames.size(); ++c)
    if (name == kClassNames[c]) return static_cast<int>(c);
  if (name == "-1") return 0;
  if (name == "0") return 1;
  if (name == "1") return 2;
  throw DataError("unknown label '" + name + "'");
}

std::vector<RawRecord> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(t, nullptr, false);
    if (j.is_discarded())
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON");
    if (!j.is_object())
      throw DataError("line " + std::to_string(line_no) +
                      ": expected a JSON object");
    RawRecord r;
    if (!j.contains("text") || !j["text"].is_string())
      throw DataError("line " + std::to_string(line_no) +
                      ": missing string field 'text'");
    r.text = j["text"].get<std::string>();
    if (!j.contains("label"))
      throw DataError("line " + std::to_string(line_no) +
                      ": missing field 'label'");
    try {
      if (j["label"].is_string()) {
        r.label = parse_label(j["label"].get<std::string>());
      } else if (j["label"].is_number_integer()) {
        r.label = parse_label(std::to_string(j["label"].get<long long>()));
      } else {
        throw DataError("label must be a string or integer");
      }
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("country") && j["country"].is_string())
      r.country = j["country"].get<std::string>();
    if (j.contains("date") && j["date"].is_string())
      r.date = j["date"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

Tensor load_embeddings(const std::string& path, const Vocabulary& vocab,
                       std::size_t embed_dim, Rng& rng,
                       EmbeddingLoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const std::size_t V = vocab.size();
  Tensor E({V, embed_dim});
  std::vector<std::uint8_t> filled(V, 0);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> parts = tokenize_ws(line);
    if (parts.size() != embed_dim + 1)
      throw DataError("embedding line " + std::to_string(line_no) +
                      ": expected a word and " + std::to_string(embed_dim) +
                      " floats, got " + std::to_string(parts.size() - 1));
    auto it = vocab.index.find(parts[0]);
    if (it == vocab.index.end()) continue;
    std::size_t row = static_cast<std::size_t>(it->second);
    if (filled[row]) continue;  // first occurrence wins
    for (std::size_t d = 0; d < embed_dim; ++d) {
      const std::string& f = parts[d + 1];
      char* endp = nullptr;
      double v = std::strtod(f.c_str(), &endp);
      if (endp != f.c_str() + f.size())
        throw DataError("embedding line " + std::to_string(line_no) +
                        ": unparseable float '" + f + "'");
      E.at2(row, d) = static_cast<real>(v);
    }
    filled[row] = 1;
  }

  // remaining rows draw in index order; pad row 0 stays zero
  for (std::size_t r = 1; r < V; ++r) {
    if (filled[r]) continue;
    for (std::size_t d = 0; d < embed_dim; ++d)
      E.at2(r, d) = static_cast<real>(rng.uniform(-0.05, 0.05));
  }
  for (std::size_t d = 0; d < embed_dim; ++d) E.at2(0, d) = real(0);

  if (stats) {
    stats->from_file.assign(filled.begin(), filled.end());
    stats->found = 0;
    for (std::size_t r = 1; r < V; ++r)
      if (filled[r]) ++stats->found;
    stats->missing = V - 1 - stats->found;
  }
  return E;
}

std::set<std::string> load_word_list(const std::string& path) {
  std::set<std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.insert(to_lower(t));
  }
  return out;
}

namespace {

const char* const kStopwords[] = {
    "a",        "about",   "above",    "after",   "again",      "against",
    "all",      "am",      "an",       "and",     "any",        "are",
    "aren",     "as",      "at",       "be",      "because",    "been",
    "before",   "being",   "below",    "between", "both",       "but",
    "by",       "can",     "cannot",   "could",   "couldn",     "d",
    "did",      "didn",    "do",       "does",    "doesn",      "doing",
    "don",      "down",    "during",   "each",    "few",        "for",
    "from",     "further", "had",      "hadn",    "has",        "hasn",
    "have",     "haven",   "having",   "he",      "her",        "here",
    "hers",     "herself", "him",      "himself", "his",        "how",
    "i",        "if",      "in",       "into",    "is",         "isn",
    "it",       "its",     "itself",   "just",    "ll",         "m",
    "ma",       "me",      "mightn",   "more",    "most",       "mustn",
    "my",       "myself",  "needn",    "no",      "nor",        "not",
    "now",      "o",       "of",       "off",     "on",         "once",
    "only",     "or",      "other",    "our",     "ours",       "ourselves",
    "out",      "over",    "own",      "re",      "s",          "same",
    "shan",     "she",     "should",   "shouldn", "so",         "some",
    "such",     "t",       "than",     "that",    "the",        "their",
    "theirs",   "them",    "themselves", "then",  "there",      "these",
    "they",     "this",    "those",    "through", "to",         "too",
    "under",    "until",   "up",       "ve",      "very",       "was",
    "wasn",     "we",      "were",     "weren",   "what",       "when",
    "where",    "which",   "while",    "who",     "whom",       "why",
    "will",     "with",    "won",      "would",   "wouldn",     "y",
    "you",      "your",    "yours",    "yourself", "yourselves",
};

const char* const kAbbreviations[] = {
    "mr", "mrs", "ms", "dr",  "prof", "sr",  "jr",  "st",
    "vs", "etc", "e.g", "i.e", "u.s",  "u.k", "fig", "approx",
};

}  // namespace

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> s(std::begin(kStopwords),
                                       std::end(kStopwords));
  return s;
}

const std::set<std::string>& default_abbreviations() {
  static const std::set<std::string> s(std::begin(kAbbreviations),
                                       std::end(kAbbreviations));
  return s;
}

CleaningConfig default_cleaning() {
  CleaningConfig cfg;
  cfg.stopwords = default_stopwords();
  cfg.abbreviations = default_abbreviations();
  return cfg;
}

}  // namespace macbig
