#ifndef MACBIG_MODEL_HPP
#define MACBIG_MODEL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "macbig/layers.hpp"
#include "macbig/rng.hpp"
#include "macbig/tensor.hpp"
#include "macbig/util.hpp"

// Two-level document classifier: token embeddings feed a word-level encoder
// (parallel 1-d convs -> maxpool -> concat -> maxpool -> BiGRU ->
// time-distributed dense -> attention) producing one vector per sentence;
// the same encoder shape runs again over the sentence vectors, and the
// attended document vector goes through dropout into a softmax head.

namespace macbig {

struct HyperParams {
  std::size_t max_sentences = 15;
  std::size_t max_tokens = 200;
  std::size_t embed_dim = 100;
  std::size_t conv_filters = 128;
  std::vector<std::size_t> kernel_sizes{3, 4, 5};
  std::size_t gru_hidden = 100;
  std::size_t attention_dim = 100;
  std::size_t classes = 3;
  double dropout_rate = 0.5;

  bool operator==(const HyperParams&) const = default;
};

// Row counts along one encoder level fed with `steps` input rows.
struct LevelChain {
  std::vector<std::size_t> conv_rows;  // per kernel: steps - k + 1
  std::vector<std::size_t> pool_rows;  // per kernel: conv_rows / 3
  std::size_t concat_rows = 0;         // sum of pool_rows
  std::size_t out_steps = 0;           // concat_rows / 3
};

inline LevelChain level_chain(std::size_t steps,
                              const std::vector<std::size_t>& kernels,
                              const char* level_name) {
  LevelChain ch;
  for (std::size_t k : kernels) {
    if (k == 0 || steps < k)
      throw ShapeError(std::string(level_name) +
                       " level: sequence shorter than kernel " +
                       std::to_string(k));
    std::size_t cr = steps - k + 1;
    if (cr < kPoolWindow)
      throw ShapeError(std::string(level_name) + " level: conv output for k=" +
                       std::to_string(k) + " shorter than pooling window");
    ch.conv_rows.push_back(cr);
    ch.pool_rows.push_back(cr / kPoolWindow);
    ch.concat_rows += cr / kPoolWindow;
  }
  if (ch.concat_rows < kPoolWindow)
    throw ShapeError(std::string(level_name) +
                     " level: concatenated features shorter than pooling "
                     "window");
  ch.out_steps = ch.concat_rows / kPoolWindow;
  return ch;
}

inline void validate_hyperparams(const HyperParams& hp) {
  if (hp.classes < 2) throw ShapeError("need at least two classes");
  if (hp.kernel_sizes.empty()) throw ShapeError("no kernel sizes given");
  if (hp.embed_dim == 0 || hp.conv_filters == 0 || hp.gru_hidden == 0 ||
      hp.attention_dim == 0 || hp.max_sentences == 0 || hp.max_tokens == 0)
    throw ShapeError("hyperparameters must be positive");
  if (hp.dropout_rate < 0.0 || hp.dropout_rate >= 1.0)
    throw UsageError("dropout rate must be in [0, 1)");
  level_chain(hp.max_tokens, hp.kernel_sizes, "word");
  level_chain(hp.max_sentences, hp.kernel_sizes, "sentence");
}

inline LevelChain word_chain(const HyperParams& hp) {
  return level_chain(hp.max_tokens, hp.kernel_sizes, "word");
}
inline LevelChain sentence_chain(const HyperParams& hp) {
  return level_chain(hp.max_sentences, hp.kernel_sizes, "sentence");
}

template <class T>
struct LevelParamsT {
  std::vector<Conv1dLayerT<T>> convs;
  GruCellT<T> fwd, bwd;
  DenseLayerT<T> td;
  AttentionLayerT<T> att;
};

template <class T>
struct MacbigParamsT {
  HyperParams hp;
  TensorT<T> embedding;  // [vocab, embed_dim]; row 0 is the pad row
  LevelParamsT<T> word, sent;
  DenseLayerT<T> out;
  std::size_t vocab() const { return embedding.shape[0]; }
};

using MacbigParams = MacbigParamsT<real>;

namespace detail {

template <class T>
void alloc_level(LevelParamsT<T>& L, const HyperParams& hp, std::size_t cin) {
  std::size_t F = hp.conv_filters, H = hp.gru_hidden, D = hp.attention_dim;
  L.convs.clear();
  for (std::size_t k : hp.kernel_sizes) {
    Conv1dLayerT<T> c;
    c.W = TensorT<T>({k, cin, F});
    c.b = TensorT<T>({F});
    L.convs.push_back(std::move(c));
  }
  auto alloc_cell = [&](GruCellT<T>& g) {
    g.Wz = TensorT<T>({F, H});
    g.Wr = TensorT<T>({F, H});
    g.Wh = TensorT<T>({F, H});
    g.Uz = TensorT<T>({H, H});
    g.Ur = TensorT<T>({H, H});
    g.Uh = TensorT<T>({H, H});
    g.bz = TensorT<T>({H});
    g.br = TensorT<T>({H});
    g.bh = TensorT<T>({H});
  };
  alloc_cell(L.fwd);
  alloc_cell(L.bwd);
  L.td.W = TensorT<T>({2 * H, D});
  L.td.b = TensorT<T>({D});
  L.td.act = Activation::relu;
  L.att.W = TensorT<T>({D, D});
  L.att.b = TensorT<T>({D});
  L.att.ctx = TensorT<T>({D});
}

template <class T>
void init_level(LevelParamsT<T>& L, const HyperParams& hp, std::size_t cin,
                Rng& rng) {
  std::size_t F = hp.conv_filters, H = hp.gru_hidden, D = hp.attention_dim;
  for (auto& c : L.convs) {
    std::size_t k = c.kernel();
    c.W = init_uniform<T>({k, cin, F}, rng, k * cin, k * F);
  }
  auto init_cell = [&](GruCellT<T>& g) {
    g.Wz = init_uniform<T>({F, H}, rng, F, H);
    g.Wr = init_uniform<T>({F, H}, rng, F, H);
    g.Wh = init_uniform<T>({F, H}, rng, F, H);
    g.Uz = init_uniform<T>({H, H}, rng, H, H);
    g.Ur = init_uniform<T>({H, H}, rng, H, H);
    g.Uh = init_uniform<T>({H, H}, rng, H, H);
  };
  init_cell(L.fwd);
  init_cell(L.bwd);
  L.td.W = init_uniform<T>({2 * H, D}, rng, 2 * H, D);
  L.att.W = init_uniform<T>({D, D}, rng, D, D);
  L.att.ctx = init_uniform<T>({D}, rng, D, D);
}

}  // namespace detail

// All tensors zero; used for gradient holders and as the checkpoint skeleton.
template <class T = real>
MacbigParamsT<T> zero_params(const HyperParams& hp, std::size_t vocab_size) {
  validate_hyperparams(hp);
  if (vocab_size < 2) throw ShapeError("vocabulary must hold pad and oov");
  MacbigParamsT<T> p;
  p.hp = hp;
  p.embedding = TensorT<T>({vocab_size, hp.embed_dim});
  detail::alloc_level(p.word, hp, hp.embed_dim);
  detail::alloc_level(p.sent, hp, hp.attention_dim);
  p.out.W = TensorT<T>({hp.attention_dim, hp.classes});
  p.out.b = TensorT<T>({hp.classes});
  p.out.act = Activation::softmax;
  return p;
}

// Glorot-uniform weights, zero biases, embedding rows U(-0.05, 0.05) with the
// pad row zeroed. Draw order is fixed (embedding, word level, sentence level,
// head), so one seed pins every weight.
template <class T = real>
MacbigParamsT<T> build_params(const HyperParams& hp, std::size_t vocab_size,
                              Rng& rng) {
  MacbigParamsT<T> p = zero_params<T>(hp, vocab_size);
  p.embedding =
      init_uniform_range<T>({vocab_size, hp.embed_dim}, rng, -0.05, 0.05);
  for (std::size_t j = 0; j < hp.embed_dim; ++j) p.embedding.at2(0, j) = T(0);
  detail::init_level(p.word, hp, hp.embed_dim, rng);
  detail::init_level(p.sent, hp, hp.attention_dim, rng);
  p.out.W = init_uniform<T>({hp.attention_dim, hp.classes}, rng,
                            hp.attention_dim, hp.classes);
  return p;
}

// Fixed-order visitation of every parameter tensor. The `regularized` flag
// marks tensors included in the L2 penalty: conv kernels, GRU input and
// recurrent weights, dense weights, attention projection weights. Biases,
// attention context vectors and the embedding matrix are excluded.
template <class P, class F>
void for_each_tensor_impl(P& p, F&& f) {
  f("embedding", p.embedding, false);
  auto level = [&](const std::string& ln, auto& L) {
    for (auto& c : L.convs) {
      std::string base = ln + ".conv" + std::to_string(c.kernel());
      f(base + ".W", c.W, true);
      f(base + ".b", c.b, false);
    }
    auto cell = [&](const std::string& cn, auto& g) {
      f(cn + ".Wz", g.Wz, true);
      f(cn + ".Wr", g.Wr, true);
      f(cn + ".Wh", g.Wh, true);
      f(cn + ".Uz", g.Uz, true);
      f(cn + ".Ur", g.Ur, true);
      f(cn + ".Uh", g.Uh, true);
      f(cn + ".bz", g.bz, false);
      f(cn + ".br", g.br, false);
      f(cn + ".bh", g.bh, false);
    };
    cell(ln + ".gru_f", L.fwd);
    cell(ln + ".gru_b", L.bwd);
    f(ln + ".td.W", L.td.W, true);
    f(ln + ".td.b", L.td.b, false);
    f(ln + ".att.W", L.att.W, true);
    f(ln + ".att.b", L.att.b, false);
    f(ln + ".att.ctx", L.att.ctx, false);
  };
  level("word", p.word);
  level("sent", p.sent);
  f("out.W", p.out.W, true);
  f("out.b", p.out.b, false);
}

template <class T, class F>
void for_each_tensor(MacbigParamsT<T>& p, F&& f) {
  for_each_tensor_impl(p, std::forward<F>(f));
}
template <class T, class F>
void for_each_tensor(const MacbigParamsT<T>& p, F&& f) {
  for_each_tensor_impl(p, std::forward<F>(f));
}

template <class T>
std::vector<double> flatten_params(
    const MacbigParamsT<T>& p,
    std::vector<std::pair<std::string, std::size_t>>* spans = nullptr) {
  std::vector<double> flat;
  for_each_tensor(p, [&](const std::string& name, const TensorT<T>& t, bool) {
    if (spans) spans->push_back({name, t.numel()});
    for (T v : t.data) flat.push_back(static_cast<double>(v));
  });
  return flat;
}

template <class T>
void assign_params(const std::vector<double>& flat, MacbigParamsT<T>& p) {
  std::size_t at = 0;
  for_each_tensor(p, [&](const std::string&, TensorT<T>& t, bool) {
    for (auto& v : t.data) v = static_cast<T>(flat[at++]);
  });
  if (at != flat.size())
    throw ShapeError("assign_params: flat size does not match model");
}

// ---------- encoder level ----------

template <class T>
struct EncoderCacheT {
  std::vector<Conv1dCacheT<T>> conv;
  std::vector<std::vector<std::uint32_t>> p1_idx;
  std::vector<std::size_t> conv_rows, p1_rows;
  std::vector<std::uint32_t> p2_idx;
  std::size_t concat_rows = 0;
  TensorT<T> pooled;   // BiGRU input
  TensorT<T> gru_out;  // dense input
  TensorT<T> td_out;   // attention input
  BiGruCacheT<T> gru;
  DenseCacheT<T> td;
  AttentionCacheT<T> att;
};

template <class T>
std::pair<TensorT<T>, TensorT<T>> encode_level(const TensorT<T>& x,
                                               const LevelParamsT<T>& L,
                                               EncoderCacheT<T>* cc) {
  std::size_t nk = L.convs.size();
  if (cc) {
    cc->conv.resize(nk);
    cc->p1_idx.resize(nk);
    cc->conv_rows.clear();
    cc->p1_rows.clear();
  }
  std::vector<TensorT<T>> parts;
  parts.reserve(nk);
  for (std::size_t i = 0; i < nk; ++i) {
    TensorT<T> co =
        conv1d_relu_forward(x, L.convs[i], cc ? &cc->conv[i] : nullptr);
    TensorT<T> po = maxpool1d3_forward(co, cc ? &cc->p1_idx[i] : nullptr);
    if (cc) {
      cc->conv_rows.push_back(co.rows());
      cc->p1_rows.push_back(po.rows());
    }
    parts.push_back(std::move(po));
  }
  std::vector<const TensorT<T>*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  TensorT<T> cat = concat_time(ptrs);
  TensorT<T> pooled = maxpool1d3_forward(cat, cc ? &cc->p2_idx : nullptr);
  if (cc) cc->concat_rows = cat.rows();
  TensorT<T> gru_out =
      bigru_forward(pooled, L.fwd, L.bwd, cc ? &cc->gru : nullptr);
  TensorT<T> td_out = dense_forward(gru_out, L.td, cc ? &cc->td : nullptr);
  auto [ctx, w] = attention_forward(td_out, L.att, cc ? &cc->att : nullptr);
  if (cc) {
    cc->pooled = std::move(pooled);
    cc->gru_out = std::move(gru_out);
    cc->td_out = std::move(td_out);
  }
  return {std::move(ctx), std::move(w)};
}

template <class T>
TensorT<T> encode_level_backward(const TensorT<T>& dctx, const TensorT<T>& x,
                                 const EncoderCacheT<T>& cc,
                                 const LevelParamsT<T>& L,
                                 LevelParamsT<T>& grad) {
  TensorT<T> d_td =
      attention_backward(dctx, cc.td_out, cc.att, L.att, grad.att);
  TensorT<T> d_gru = dense_backward(d_td, cc.gru_out, cc.td, L.td, grad.td);
  TensorT<T> d_pooled = bigru_backward(d_gru, cc.pooled, cc.gru, L.fwd, L.bwd,
                                       grad.fwd, grad.bwd);
  TensorT<T> d_cat = maxpool1d3_backward(d_pooled, cc.p2_idx, cc.concat_rows);
  std::vector<TensorT<T>> parts = split_time(d_cat, cc.p1_rows);
  TensorT<T> dx(x.shape);
  for (std::size_t i = 0; i < L.convs.size(); ++i) {
    TensorT<T> d_co =
        maxpool1d3_backward(parts[i], cc.p1_idx[i], cc.conv_rows[i]);
    TensorT<T> dxi = conv1d_relu_backward(d_co, x, cc.conv[i], L.convs[i],
                                          grad.convs[i]);
    for (std::size_t j = 0; j < dx.numel(); ++j) dx.data[j] += dxi.data[j];
  }
  return dx;
}

// ---------- whole model ----------

using TokenGrid = std::vector<std::vector<std::int32_t>>;

// Numeric side of a prediction explanation; token strings are attached by the
// preprocessing pipeline, which knows them.
struct AttentionTrace {
  std::vector<std::vector<real>> word_weights;  // per sentence row
  std::vector<real> sentence_weights;
  std::vector<real> logits, probs;
  int predicted = -1;
};

template <class T>
struct DocCacheT {
  std::vector<TensorT<T>> enc_x;          // distinct sentence inputs [T, d]
  std::vector<EncoderCacheT<T>> enc;      // their encoder caches
  std::vector<std::size_t> enc_row;       // representative doc row per entry
  std::vector<int> row_enc;               // doc row -> distinct entry
  TensorT<T> svecs;                       // [S, D]
  EncoderCacheT<T> doc_enc;
  TensorT<T> doc_vec, drop_mask, dropped;  // [D]
  DenseCacheT<T> head;
  TensorT<T> probs;  // [classes]
  int target = -1;
};

namespace detail {

template <class T>
TensorT<T> embed_rows(const std::vector<std::int32_t>& tokens,
                      const TensorT<T>& E) {
  TensorT<T> out({tokens.size(), E.shape[1]});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::int32_t idx = tokens[t];
    if (idx < 0 || static_cast<std::size_t>(idx) >= E.shape[0])
      throw ShapeError("token index " + std::to_string(idx) +
                       " outside vocabulary of " +
                       std::to_string(E.shape[0]));
    std::copy(E.row(idx), E.row(idx) + E.shape[1], out.row(t));
  }
  return out;
}

inline bool all_pad(const std::vector<std::int32_t>& tokens) {
  for (auto v : tokens)
    if (v != 0) return false;
  return true;
}

}  // namespace detail

inline void check_doc(const TokenGrid& doc, const HyperParams& hp) {
  if (doc.size() != hp.max_sentences)
    throw ShapeError("document must have exactly " +
                     std::to_string(hp.max_sentences) + " sentence rows");
  for (const auto& row : doc)
    if (row.size() != hp.max_tokens)
      throw ShapeError("sentence rows must have exactly " +
                       std::to_string(hp.max_tokens) + " token slots");
}

// Identical all-pad rows are encoded once and reused; this is pure reuse of
// an identical computation, every row still contributes its full value.
template <class T>
TensorT<T> model_forward(const TokenGrid& doc, const MacbigParamsT<T>& p,
                         bool training, Rng* drop_rng,
                         DocCacheT<T>* cache = nullptr,
                         AttentionTrace* trace = nullptr) {
  check_doc(doc, p.hp);
  std::size_t S = p.hp.max_sentences, D = p.hp.attention_dim;
  std::vector<TensorT<T>> enc_x;
  std::vector<EncoderCacheT<T>> enc_caches;
  std::vector<std::size_t> enc_row;
  std::vector<int> row_enc(S, -1);
  TensorT<T> svecs({S, D});
  std::vector<TensorT<T>> enc_weights;
  int pad_entry = -1;
  std::size_t n_entries = 0;
  for (std::size_t s = 0; s < S; ++s) {
    bool pad = detail::all_pad(doc[s]);
    if (pad && pad_entry >= 0) {
      row_enc[s] = pad_entry;
      const T* src = svecs.row(enc_row[pad_entry]);
      std::copy(src, src + D, svecs.row(s));
      continue;
    }
    TensorT<T> emb = detail::embed_rows(doc[s], p.embedding);
    EncoderCacheT<T> cc;
    auto [ctx, w] = encode_level(emb, p.word, cache ? &cc : nullptr);
    row_enc[s] = static_cast<int>(n_entries++);
    if (pad) pad_entry = row_enc[s];
    enc_row.push_back(s);
    enc_weights.push_back(std::move(w));
    if (cache) {
      enc_x.push_back(std::move(emb));
      enc_caches.push_back(std::move(cc));
    }
    std::copy(ctx.data.begin(), ctx.data.end(), svecs.row(s));
  }
  EncoderCacheT<T> doc_cc;
  auto [doc_vec, sweights] =
      encode_level(svecs, p.sent, cache ? &doc_cc : nullptr);
  TensorT<T> mask;
  TensorT<T> dropped = dropout_forward(doc_vec, p.hp.dropout_rate, training,
                                       drop_rng, cache ? &mask : nullptr);
  DenseCacheT<T> head;
  TensorT<T> probs = dense_forward(dropped, p.out, &head);
  if (trace) {
    trace->word_weights.clear();
    for (std::size_t s = 0; s < S; ++s) {
      const auto& w = enc_weights[row_enc[s]];
      std::vector<real> wv(w.numel());
      for (std::size_t i = 0; i < w.numel(); ++i)
        wv[i] = static_cast<real>(w[i]);
      trace->word_weights.push_back(std::move(wv));
    }
    trace->sentence_weights.assign(sweights.data.begin(),
                                   sweights.data.end());
    trace->logits.assign(head.pre.data.begin(), head.pre.data.end());
    trace->probs.assign(probs.data.begin(), probs.data.end());
    int best = 0;
    for (std::size_t c = 1; c < probs.numel(); ++c)
      if (probs[c] > probs[best]) best = static_cast<int>(c);
    trace->predicted = best;
  }
  if (cache) {
    cache->enc_x = std::move(enc_x);
    cache->enc = std::move(enc_caches);
    cache->enc_row = std::move(enc_row);
    cache->row_enc = std::move(row_enc);
    cache->svecs = std::move(svecs);
    cache->doc_enc = std::move(doc_cc);
    cache->doc_vec = std::move(doc_vec);
    cache->drop_mask = std::move(mask);
    cache->dropped = std::move(dropped);
    cache->head = std::move(head);
    cache->probs = probs;
  }
  return probs;
}

// Accumulates d(sample cross-entropy)/d(theta) into `grad` (unscaled; batch
// averaging and the L2 term are applied by the batch driver). Uses the fused
// softmax + cross-entropy gradient probs - onehot.
template <class T>
void model_backward(const TokenGrid& doc, const DocCacheT<T>& c,
                    const MacbigParamsT<T>& p, int target,
                    MacbigParamsT<T>& grad) {
  std::size_t S = p.hp.max_sentences, D = p.hp.attention_dim;
  TensorT<T> dlogits({p.hp.classes});
  for (std::size_t k = 0; k < p.hp.classes; ++k)
    dlogits[k] = c.probs[k] - (static_cast<int>(k) == target ? T(1) : T(0));
  TensorT<T> ddropped = dense_backward_pre(dlogits, c.dropped, p.out, grad.out);
  TensorT<T> ddoc = dropout_backward(ddropped, c.drop_mask);
  TensorT<T> dsvecs =
      encode_level_backward(ddoc, c.svecs, c.doc_enc, p.sent, grad.sent);
  std::size_t n_enc = c.enc.size();
  std::vector<TensorT<T>> dctx(n_enc, TensorT<T>({D}));
  for (std::size_t s = 0; s < S; ++s) {
    T* acc = dctx[c.row_enc[s]].data.data();
    const T* src = dsvecs.row(s);
    for (std::size_t j = 0; j < D; ++j) acc[j] += src[j];
  }
  for (std::size_t e = 0; e < n_enc; ++e) {
    TensorT<T> demb = encode_level_backward(dctx[e], c.enc_x[e], c.enc[e],
                                            p.word, grad.word);
    const auto& tokens = doc[c.enc_row[e]];
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      std::int32_t idx = tokens[t];
      if (idx == 0) continue;  // pad embedding stays zero
      T* erow = grad.embedding.row(idx);
      const T* drow = demb.row(t);
      for (std::size_t j = 0; j < p.hp.embed_dim; ++j) erow[j] += drow[j];
    }
  }
}

// Sentence in, sentence vector and word attention weights out.
template <class T>
std::pair<TensorT<T>, TensorT<T>> encode_sentence(
    const std::vector<std::int32_t>& tokens, const MacbigParamsT<T>& p) {
  if (tokens.size() != p.hp.max_tokens)
    throw ShapeError("sentence must have exactly " +
                     std::to_string(p.hp.max_tokens) + " token slots");
  TensorT<T> emb = detail::embed_rows(tokens, p.embedding);
  return encode_level(emb, p.word, static_cast<EncoderCacheT<T>*>(nullptr));
}

// Inference probabilities and argmax label (ties -> lowest class index).
template <class T>
std::pair<TensorT<T>, int> predict(const TokenGrid& doc,
                                   const MacbigParamsT<T>& p) {
  TensorT<T> probs = model_forward(doc, p, false, nullptr);
  int best = 0;
  for (std::size_t c = 1; c < probs.numel(); ++c)
    if (probs[c] > probs[best]) best = static_cast<int>(c);
  return {std::move(probs), best};
}

// ---------- parameter accounting ----------

struct ParamRow {
  std::string name;
  std::string output_shape;
  std::size_t count = 0;
  long long reference = -1;  // published table value; -1 if not applicable
  std::string note;
};

struct ParamReport {
  std::vector<ParamRow> rows;
  std::size_t total = 0;
  std::size_t word_encoder_total = 0;
};

ParamReport parameter_report(const HyperParams& hp, std::size_t vocab_size);
std::string format_param_report(const ParamReport& rep);

}  // namespace macbig

#endif
