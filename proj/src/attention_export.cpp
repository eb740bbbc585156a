#include "macbig/attention_export.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace macbig {

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* class_rgb(int cls) {
  switch (cls) {
    case 0: return "59,130,246";   // negative: blue
    case 2: return "239,68,68";    // positive: red
    default: return "107,114,128"; // neutral: gray
  }
}

std::string class_name(int cls) {
  if (cls >= 0 && cls < static_cast<int>(kClassNames.size()))
    return kClassNames[static_cast<std::size_t>(cls)];
  return "class_" + std::to_string(cls);
}

// display normalization: x -> (x - min) / (max - min), flat vectors -> 0.5
std::vector<double> minmax_scale(const std::vector<real>& w) {
  std::vector<double> out(w.size(), 0.5);
  if (w.empty()) return out;
  double lo = w[0], hi = w[0];
  for (real v : w) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (hi > lo)
    for (std::size_t i = 0; i < w.size(); ++i)
      out[i] = (static_cast<double>(w[i]) - lo) / (hi - lo);
  return out;
}

}  // namespace

std::string attention_json(const TokenizedDoc& doc, const AttentionTrace& trace,
                           const std::string& original_text) {
  nlohmann::json j;
  j["text"] = original_text;
  j["predicted"] = class_name(trace.predicted);
  j["predicted_index"] = trace.predicted;
  j["probabilities"] = trace.probs;
  j["logits"] = trace.logits;
  j["sentence_weights"] = trace.sentence_weights;
  nlohmann::json sentences = nlohmann::json::array();
  for (std::size_t s = 0; s < doc.tokens.size(); ++s) {
    nlohmann::json js;
    js["tokens"] = doc.tokens[s];
    js["word_weights"] = s < trace.word_weights.size()
                             ? trace.word_weights[s]
                             : std::vector<real>{};
    sentences.push_back(js);
  }
  j["sentences"] = sentences;
  j["empty_input"] = doc.empty;
  return j.dump(2) + "\n";
}

std::string attention_html(const TokenizedDoc& doc, const AttentionTrace& trace,
                           const std::string& original_text,
                           const HyperParams& hp) {
  const char* rgb = class_rgb(trace.predicted);
  char buf[256];

  std::string out =
      "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>attention heatmap</title>\n<style>\n"
      "body { font-family: sans-serif; margin: 2em; max-width: 60em; }\n"
      ".sent { margin: 0.6em 0; padding: 0.4em 0.6em; border-left: 6px solid; "
      "border-radius: 3px; }\n"
      ".tok { padding: 0.1em 0.25em; margin: 0 0.05em; border-radius: 3px; "
      "display: inline-block; }\n"
      ".meta { color: #555; font-size: 0.9em; }\n"
      "</style>\n</head>\n<body>\n";

  out += "<h2>prediction: " + html_escape(class_name(trace.predicted)) +
         "</h2>\n<p class=\"meta\">";
  for (std::size_t c = 0; c < trace.probs.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%s%s %.4f", c ? " &middot; " : "",
                  html_escape(class_name(static_cast<int>(c))).c_str(),
                  static_cast<double>(trace.probs[c]));
    out += buf;
  }
  out += "</p>\n<p class=\"meta\">input: " + html_escape(original_text) +
         "</p>\n";

  if (doc.empty)
    out += "<p><em>nothing survived cleaning; the prediction comes from an "
           "all-padding document.</em></p>\n";

  std::vector<double> sw;
  for (real v : trace.sentence_weights) sw.push_back(static_cast<double>(v));
  LevelChain wch = word_chain(hp);
  LevelChain sch = sentence_chain(hp);

  for (std::size_t s = 0; s < doc.tokens.size(); ++s) {
    // sentence s occupies row s of the grid; its weight lives at the pooled
    // sentence-level position s * out_steps / max_sentences
    std::size_t spos = s * sch.out_steps / hp.max_sentences;
    double sweight =
        spos < sw.size() ? sw[spos] : 0.0;
    std::snprintf(buf, sizeof(buf),
                  "<div class=\"sent\" style=\"border-color: rgba(%s,%.3f)\">\n",
                  rgb, 0.15 + 0.85 * sweight);
    out += buf;

    static const std::vector<real> kNoWeights;
    const std::vector<real>& ww =
        s < trace.word_weights.size() ? trace.word_weights[s] : kNoWeights;
    std::vector<double> scaled = minmax_scale(ww);
    for (std::size_t t = 0; t < doc.tokens[s].size(); ++t) {
      std::size_t pos = t * wch.out_steps / hp.max_tokens;
      double disp = pos < scaled.size() ? scaled[pos] : 0.0;
      double raw = pos < ww.size() ? static_cast<double>(ww[pos]) : 0.0;
      std::snprintf(buf, sizeof(buf),
                    "<span class=\"tok\" style=\"background: rgba(%s,%.3f)\" "
                    "title=\"weight %.6f\">",
                    rgb, 0.8 * disp, raw);
      out += buf;
      out += html_escape(doc.tokens[s][t]);
      out += "</span>\n";
    }
    std::snprintf(buf, sizeof(buf),
                  "<div class=\"meta\">sentence weight %.6f</div>\n</div>\n",
                  sweight);
    out += buf;
  }
  out += "</body>\n</html>\n";
  return out;
}

}  // namespace macbig
