#ifndef MACBIG_ATTENTION_EXPORT_HPP
#define MACBIG_ATTENTION_EXPORT_HPP

#include <string>

#include "macbig/model.hpp"
#include "macbig/textprep.hpp"

namespace macbig {

// Raw trace as JSON: prediction, probabilities, logits, sentence weights and
// per-sentence token lists with the word-level weight vectors.
std::string attention_json(const TokenizedDoc& doc, const AttentionTrace& trace,
                           const std::string& original_text);

// Standalone HTML heatmap. Weights are min-max normalized per sentence for
// display only (raw values stay in the JSON and in title tooltips); token t
// maps onto pooled attention position t * steps / max_tokens. Highlight hue
// follows the predicted class.
std::string attention_html(const TokenizedDoc& doc, const AttentionTrace& trace,
                           const std::string& original_text,
                           const HyperParams& hp);

}  // namespace macbig

#endif
