#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "simaml/bytes.hpp"
#include "simaml/corpus.hpp"
#include "simaml/errors.hpp"
#include "simaml/rng.hpp"
#include "simaml/tensor.hpp"

namespace simaml {

struct Seq2SeqConfig {
    enum class Arch { lstm, transformer };
    Arch arch = Arch::lstm;
    int hidden = 256;
    int embed = 0;           // 0 = same as hidden
    int encoder_layers = 2;  // bidirectional LSTM layers
    int decoder_layers = 1;
    int tf_layers = 2;
    int tf_heads = 4;
    int tf_ff = 1024;
    double dropout = 0.1;
    double init_range = 0.1;  // uniform(-r, r) weight init
    int max_decode_len = 128;

    int embed_dim() const { return embed > 0 ? embed : hidden; }

    // small-model profile for laptop-scale experiments
    static Seq2SeqConfig desk() {
        Seq2SeqConfig c;
        c.hidden = 64;
        c.tf_ff = 256;
        return c;
    }

    void validate() const {
        if (hidden <= 0) throw ConfigError("hidden must be positive");
        if (encoder_layers < 1 || decoder_layers < 1) throw ConfigError("need at least one layer each side");
        if (arch == Arch::transformer && hidden % tf_heads != 0) {
            throw ConfigError("hidden must be divisible by the head count");
        }
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    }
};

// Named parameter collection; ordered so iteration (updates, clipping,
// serialization) is deterministic.
struct ModelParams {
    std::map<std::string, Tensor> tensors;

    Tensor& at(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }

    const Tensor& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }

    std::vector<Tensor> all() const {
        std::vector<Tensor> out;
        out.reserve(tensors.size());
        for (const auto& [name, t] : tensors) out.push_back(t);
        return out;
    }

    // Fresh gradient-tracking leaves sharing nothing with this instance.
    ModelParams clone_leaves() const {
        ModelParams out;
        for (const auto& [name, t] : tensors) out.tensors.emplace(name, Tensor::leaf(t.value(), true));
        return out;
    }
};

// Pre-encoded batch; sequences stay unpadded, padding is applied per step.
struct Batch {
    std::vector<std::vector<int>> src;
    std::vector<std::vector<int>> tgt;

    std::size_t size() const { return src.size(); }

    std::size_t max_src_len() const {
        std::size_t m = 0;
        for (const auto& s : src) m = std::max(m, s.size());
        return m;
    }

    std::size_t max_tgt_len() const {
        std::size_t m = 0;
        for (const auto& t : tgt) m = std::max(m, t.size());
        return m;
    }
};

inline Batch make_batch(const Corpus& corpus, std::span<const std::size_t> example_ids) {
    Batch b;
    for (std::size_t id : example_ids) {
        const Example& e = corpus.examples.at(id);
        b.src.push_back(corpus.source_vocab.encode(e.source, /*allow_unk=*/true));
        // targets must be fully in-vocabulary; there is no unk on the output side
        b.tgt.push_back(corpus.target_vocab.encode(e.target, /*allow_unk=*/false));
    }
    return b;
}

inline Batch make_batch(const Corpus& corpus, const std::vector<std::size_t>& ids) {
    return make_batch(corpus, std::span<const std::size_t>(ids));
}

namespace s2s {

inline Matrix uniform_init(Rng& rng, Eigen::Index r, Eigen::Index c, double range) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = range > 0.0 ? rng.uniform(-range, range) : 0.0;
    return m;
}

// mask-gated update: rows past their sequence end keep the old state, which
// emulates packed sequences on right-padded batches
inline Tensor gate_rows(const Tensor& fresh, const Tensor& stale, const Tensor& mask_col, Eigen::Index width) {
    Tensor m = bcast_cols(mask_col, width);
    return add(mul(m, fresh), mul(add_scalar(neg(m), 1.0), stale));
}

struct LstmState {
    Tensor h;
    Tensor c;
};

inline LstmState lstm_step(const Tensor& x, const LstmState& state, const Tensor& wx, const Tensor& wh,
                           const Tensor& bias, int hidden) {
    Tensor gates = add_rowvec(add(matmul(x, wx), matmul(state.h, wh)), bias);
    Tensor i = sigmoid_t(slice_cols(gates, 0, hidden));
    Tensor f = sigmoid_t(slice_cols(gates, hidden, hidden));
    Tensor g = tanh_t(slice_cols(gates, 2 * hidden, hidden));
    Tensor o = sigmoid_t(slice_cols(gates, 3 * hidden, hidden));
    Tensor c_new = add(mul(f, state.c), mul(i, g));
    Tensor h_new = mul(o, tanh_t(c_new));
    return {h_new, c_new};
}

// inverted dropout as a constant mask
inline Tensor maybe_dropout(const Tensor& x, double p, Rng* rng) {
    if (rng == nullptr || p <= 0.0) return x;
    Matrix mask(x.rows(), x.cols());
    const double keep = 1.0 - p;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    return mul(x, Tensor::constant(std::move(mask)));
}

struct EncoderOut {
    std::vector<Tensor> memory;     // S entries of B x 2h
    std::vector<Tensor> step_mask;  // S entries of B x 1 (1 = valid)
    Tensor attn_bias;               // B x S, 0 on valid positions, -1e9 on padding
    LstmState init;                 // decoder start state, B x h
};

inline std::vector<int> ids_at(const std::vector<std::vector<int>>& seqs, std::size_t t) {
    std::vector<int> ids(seqs.size(), Vocab::kPad);
    for (std::size_t b = 0; b < seqs.size(); ++b) {
        if (t < seqs[b].size()) ids[b] = seqs[b][t];
    }
    return ids;
}

inline EncoderOut encode_lstm(const ModelParams& params, const Seq2SeqConfig& cfg, const Batch& batch, Rng* dropout_rng) {
    const int h = cfg.hidden;
    const auto B = static_cast<Eigen::Index>(batch.size());
    const std::size_t S = batch.max_src_len();

    EncoderOut out;
    Matrix bias = Matrix::Zero(B, static_cast<Eigen::Index>(S));
    for (std::size_t t = 0; t < S; ++t) {
        Matrix m(B, 1);
        for (std::size_t b = 0; b < batch.size(); ++b) m(static_cast<Eigen::Index>(b), 0) = t < batch.src[b].size() ? 1.0 : 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (t >= batch.src[b].size()) bias(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t)) = -1e9;
        }
        out.step_mask.push_back(Tensor::constant(std::move(m)));
    }
    out.attn_bias = Tensor::constant(std::move(bias));

    std::vector<Tensor> layer_in;
    for (std::size_t t = 0; t < S; ++t) {
        Tensor emb = gather_rows(params.at("src_embed"), ids_at(batch.src, t));
        layer_in.push_back(maybe_dropout(emb, cfg.dropout, dropout_rng));
    }

    LstmState fw_last, bw_last;
    for (int layer = 0; layer < cfg.encoder_layers; ++layer) {
        std::string prefix = "enc.l" + std::to_string(layer) + ".";
        std::vector<Tensor> fw(S), bw(S);
        LstmState fs{Tensor::zeros(B, h), Tensor::zeros(B, h)};
        for (std::size_t t = 0; t < S; ++t) {
            LstmState next = lstm_step(layer_in[t], fs, params.at(prefix + "fw.wx"), params.at(prefix + "fw.wh"),
                                       params.at(prefix + "fw.b"), h);
            fs.h = gate_rows(next.h, fs.h, out.step_mask[t], h);
            fs.c = gate_rows(next.c, fs.c, out.step_mask[t], h);
            fw[t] = fs.h;
        }
        LstmState bs{Tensor::zeros(B, h), Tensor::zeros(B, h)};
        for (std::size_t i = S; i-- > 0;) {
            LstmState next = lstm_step(layer_in[i], bs, params.at(prefix + "bw.wx"), params.at(prefix + "bw.wh"),
                                       params.at(prefix + "bw.b"), h);
            bs.h = gate_rows(next.h, bs.h, out.step_mask[i], h);
            bs.c = gate_rows(next.c, bs.c, out.step_mask[i], h);
            bw[i] = bs.h;
        }
        std::vector<Tensor> merged(S);
        for (std::size_t t = 0; t < S; ++t) merged[t] = concat_cols({fw[t], bw[t]});
        layer_in = std::move(merged);
        fw_last = fs;
        bw_last = bs;
    }

    out.memory = std::move(layer_in);
    Tensor hcat = concat_cols({fw_last.h, bw_last.h});
    Tensor ccat = concat_cols({fw_last.c, bw_last.c});
    out.init.h = tanh_t(add_rowvec(matmul(hcat, params.at("bridge.h.w")), params.at("bridge.h.b")));
    out.init.c = tanh_t(add_rowvec(matmul(ccat, params.at("bridge.c.w")), params.at("bridge.c.b")));
    return out;
}

// Luong general attention over the encoder memory.
inline Tensor attention_context(const ModelParams& params, const Tensor& h_dec, const EncoderOut& enc) {
    Tensor q = matmul(h_dec, params.at("att.w"));  // B x 2h
    std::vector<Tensor> scores;
    scores.reserve(enc.memory.size());
    for (const auto& m : enc.memory) scores.push_back(row_sum(mul(q, m)));
    Tensor logits = add(concat_cols(scores), enc.attn_bias);
    Tensor alpha = softmax_rows(logits);  // B x S
    Tensor context;
    for (std::size_t s = 0; s < enc.memory.size(); ++s) {
        Tensor weighted = mul(bcast_cols(slice_cols(alpha, static_cast<Eigen::Index>(s), 1), enc.memory[s].cols()),
                              enc.memory[s]);
        context = s == 0 ? weighted : add(context, weighted);
    }
    return context;
}

struct DecoderStepOut {
    Tensor logits;    // B x V
    Tensor attn_vec;  // B x h, fed back into the next step
    std::vector<LstmState> state;
};

inline DecoderStepOut decode_step_lstm(const ModelParams& params, const Seq2SeqConfig& cfg,
                                       const std::vector<int>& in_ids, const Tensor& attn_prev,
                                       const std::vector<LstmState>& state, const EncoderOut& enc, Rng* dropout_rng) {
    const int h = cfg.hidden;
    Tensor emb = maybe_dropout(gather_rows(params.at("tgt_embed"), in_ids), cfg.dropout, dropout_rng);
    Tensor x = concat_cols({emb, attn_prev});  // input feeding
    std::vector<LstmState> next;
    next.reserve(state.size());
    for (int layer = 0; layer < cfg.decoder_layers; ++layer) {
        std::string prefix = "dec.l" + std::to_string(layer) + ".";
        LstmState ns = lstm_step(x, state[static_cast<std::size_t>(layer)], params.at(prefix + "wx"),
                                 params.at(prefix + "wh"), params.at(prefix + "b"), h);
        next.push_back(ns);
        x = ns.h;
    }
    Tensor context = attention_context(params, next.back().h, enc);
    Tensor attn_vec = tanh_t(add_rowvec(matmul(concat_cols({next.back().h, context}), params.at("comb.w")),
                                        params.at("comb.b")));
    attn_vec = maybe_dropout(attn_vec, cfg.dropout, dropout_rng);
    Tensor logits = add_rowvec(matmul(attn_vec, params.at("out.w")), params.at("out.b"));
    return {logits, attn_vec, std::move(next)};
}

}  // namespace s2s

namespace tf {

// Sinusoidal positional encodings, precomputed as a constant.
inline Matrix positional_encoding(Eigen::Index positions, Eigen::Index dim) {
    Matrix pe(positions, dim);
    for (Eigen::Index pos = 0; pos < positions; ++pos) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(dim));
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    const auto d = x.cols();
    const double inv_d = 1.0 / static_cast<double>(d);
    Tensor mu = mul_scalar(row_sum(x), inv_d);
    Tensor xc = sub(x, bcast_cols(mu, d));
    Tensor var = mul_scalar(row_sum(mul(xc, xc)), inv_d);
    Tensor xn = div(xc, bcast_cols(sqrt_t(add_scalar(var, 1e-5)), d));
    return add_rowvec(mul(xn, bcast_rows(gamma, x.rows())), beta);
}

// Multi-head attention for a single example (rows = positions). mask_bias is
// an additive constant (0 or -1e9), or undefined for unmasked attention.
inline Tensor mha(const ModelParams& p, const std::string& prefix, const Tensor& q_in, const Tensor& kv_in,
                  const Tensor& mask_bias, int heads) {
    Tensor q = matmul(q_in, p.at(prefix + "wq"));
    Tensor k = matmul(kv_in, p.at(prefix + "wk"));
    Tensor v = matmul(kv_in, p.at(prefix + "wv"));
    const auto d = q.cols();
    const auto dh = d / heads;
    std::vector<Tensor> ctx;
    ctx.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = mul_scalar(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
        if (mask_bias.defined()) scores = add(scores, mask_bias);
        ctx.push_back(matmul(softmax_rows(scores), vh));
    }
    return matmul(concat_cols(ctx), p.at(prefix + "wo"));
}

inline Tensor feed_forward(const ModelParams& p, const std::string& prefix, const Tensor& x) {
    Tensor h = add_rowvec(matmul(x, p.at(prefix + "ff1")), p.at(prefix + "ff1b"));
    // smooth gate keeps the whole stack twice differentiable
    h = mul(h, sigmoid_t(mul_scalar(h, 1.702)));
    return add_rowvec(matmul(h, p.at(prefix + "ff2")), p.at(prefix + "ff2b"));
}

// Pre-norm encoder stack over one example's source ids.
inline Tensor encode_one(const ModelParams& p, const Seq2SeqConfig& cfg, const std::vector<int>& src, Rng* rng) {
    Tensor x = gather_rows(p.at("src_embed"), src);
    x = mul_scalar(x, std::sqrt(static_cast<double>(cfg.embed_dim())));
    x = add(x, Tensor::constant(positional_encoding(x.rows(), x.cols())));
    x = s2s::maybe_dropout(x, cfg.dropout, rng);
    Tensor none;
    for (int l = 0; l < cfg.tf_layers; ++l) {
        std::string pre = "tf.enc.l" + std::to_string(l) + ".";
        Tensor n1 = layer_norm(x, p.at(pre + "ln1.g"), p.at(pre + "ln1.b"));
        Tensor a = mha(p, pre, n1, n1, none, cfg.tf_heads);
        x = add(x, s2s::maybe_dropout(a, cfg.dropout, rng));
        Tensor f = feed_forward(p, pre, layer_norm(x, p.at(pre + "ln2.g"), p.at(pre + "ln2.b")));
        x = add(x, s2s::maybe_dropout(f, cfg.dropout, rng));
    }
    return layer_norm(x, p.at("tf.enc_ln.g"), p.at("tf.enc_ln.b"));
}

inline Matrix causal_bias(Eigen::Index n) {
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = -1e9;
    return m;
}

// Decoder stack over the full teacher-forced input; returns logits per step.
inline Tensor decode_logits_one(const ModelParams& p, const Seq2SeqConfig& cfg, const Tensor& memory,
                                const std::vector<int>& dec_in, Rng* rng) {
    Tensor x = gather_rows(p.at("tgt_embed"), dec_in);
    x = mul_scalar(x, std::sqrt(static_cast<double>(cfg.embed_dim())));
    x = add(x, Tensor::constant(positional_encoding(x.rows(), x.cols())));
    x = s2s::maybe_dropout(x, cfg.dropout, rng);
    Tensor causal = Tensor::constant(causal_bias(x.rows()));
    Tensor none;
    for (int l = 0; l < cfg.tf_layers; ++l) {
        std::string pre = "tf.dec.l" + std::to_string(l) + ".";
        Tensor norm1 = layer_norm(x, p.at(pre + "ln1.g"), p.at(pre + "ln1.b"));
        x = add(x, s2s::maybe_dropout(mha(p, pre + "self.", norm1, norm1, causal, cfg.tf_heads), cfg.dropout, rng));
        Tensor norm2 = layer_norm(x, p.at(pre + "ln2.g"), p.at(pre + "ln2.b"));
        x = add(x, s2s::maybe_dropout(mha(p, pre + "cross.", norm2, memory, none, cfg.tf_heads), cfg.dropout, rng));
        Tensor norm3 = layer_norm(x, p.at(pre + "ln3.g"), p.at(pre + "ln3.b"));
        x = add(x, s2s::maybe_dropout(feed_forward(p, pre, norm3), cfg.dropout, rng));
    }
    x = layer_norm(x, p.at("tf.dec_ln.g"), p.at("tf.dec_ln.b"));
    return add_rowvec(matmul(x, p.at("out.w")), p.at("out.b"));
}

inline Tensor nll_loss_tf(const ModelParams& p, const Seq2SeqConfig& cfg, const Batch& batch, Rng* rng) {
    const auto V = static_cast<Eigen::Index>(p.at("out.b").cols());
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        Tensor memory = encode_one(p, cfg, batch.src[b], rng);
        const auto& tgt = batch.tgt[b];
        std::vector<int> dec_in;
        dec_in.push_back(Vocab::kBos);
        dec_in.insert(dec_in.end(), tgt.begin(), tgt.end());
        Tensor logits = decode_logits_one(p, cfg, memory, dec_in, rng);
        Matrix pick = Matrix::Zero(logits.rows(), V);
        for (std::size_t t = 0; t <= tgt.size(); ++t) {
            pick(static_cast<Eigen::Index>(t), t == tgt.size() ? Vocab::kEos : tgt[t]) = 1.0;
        }
        total = sub(total, sum_all(mul(log_softmax_rows(logits), Tensor::constant(std::move(pick)))));
    }
    return mul_scalar(total, 1.0 / static_cast<double>(batch.size()));
}

inline std::vector<std::string> decode_greedy_tf(const ModelParams& p, const Seq2SeqConfig& cfg,
                                                 const std::vector<int>& src, const Vocab& tgt_vocab, int max_len) {
    autodiff::NoGradGuard guard;
    Tensor memory = encode_one(p, cfg, src, nullptr);
    std::vector<int> dec_in = {Vocab::kBos};
    std::vector<std::string> out;
    for (int t = 0; t < max_len; ++t) {
        Tensor logits = decode_logits_one(p, cfg, memory, dec_in, nullptr);
        Eigen::Index best;
        logits.value().row(logits.rows() - 1).maxCoeff(&best);
        if (best == Vocab::kEos) break;
        out.push_back(tgt_vocab.token(static_cast<int>(best)));
        dec_in.push_back(static_cast<int>(best));
    }
    return out;
}

}  // namespace tf

inline ModelParams init_params(const Seq2SeqConfig& cfg, int src_vocab_size, int tgt_vocab_size, std::uint64_t seed);

// Mean over the batch of per-sequence negative log-likelihood under teacher
// forcing; padding positions contribute nothing. Differentiable w.r.t. every
// parameter reached by the batch.
inline Tensor nll_loss(const ModelParams& params, const Seq2SeqConfig& cfg, const Batch& batch,
                       Rng* dropout_rng = nullptr) {
    cfg.validate();
    if (batch.size() == 0) throw ConfigError("nll_loss on an empty batch");
    if (cfg.arch == Seq2SeqConfig::Arch::transformer) return tf::nll_loss_tf(params, cfg, batch, dropout_rng);
    const auto B = static_cast<Eigen::Index>(batch.size());
    const int h = cfg.hidden;
    const std::size_t steps = batch.max_tgt_len() + 1;  // every row emits eos
    const auto V = static_cast<Eigen::Index>(params.at("out.b").cols());

    s2s::EncoderOut enc = s2s::encode_lstm(params, cfg, batch, dropout_rng);
    std::vector<s2s::LstmState> state(static_cast<std::size_t>(cfg.decoder_layers), {enc.init.h, enc.init.c});
    Tensor attn_prev = Tensor::zeros(B, h);

    Tensor total = Tensor::scalar(0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<int> in_ids(batch.size(), Vocab::kPad);
        Matrix pick = Matrix::Zero(B, V);
        bool any = false;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto& tgt = batch.tgt[b];
            if (t > tgt.size()) continue;  // row already finished
            in_ids[b] = t == 0 ? Vocab::kBos : tgt[t - 1];
            int gold = t == tgt.size() ? Vocab::kEos : tgt[t];
            pick(static_cast<Eigen::Index>(b), gold) = 1.0;
            any = true;
        }
        if (!any) break;
        s2s::DecoderStepOut step = s2s::decode_step_lstm(params, cfg, in_ids, attn_prev, state, enc, dropout_rng);
        Tensor logp = log_softmax_rows(step.logits);
        total = sub(total, sum_all(mul(logp, Tensor::constant(std::move(pick)))));
        attn_prev = step.attn_vec;
        state = std::move(step.state);
    }
    return mul_scalar(total, 1.0 / static_cast<double>(B));
}

// Deterministic argmax decoding; stops at eos or max_len.
inline std::vector<std::string> decode_greedy(const ModelParams& params, const Seq2SeqConfig& cfg,
                                              const std::vector<std::string>& source, const Vocab& src_vocab,
                                              const Vocab& tgt_vocab, int max_len) {
    cfg.validate();
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
    if (cfg.arch == Seq2SeqConfig::Arch::transformer) {
        return tf::decode_greedy_tf(params, cfg, src_vocab.encode(source, true), tgt_vocab, max_len);
    }
    autodiff::NoGradGuard guard;

    Batch b;
    b.src.push_back(src_vocab.encode(source, /*allow_unk=*/true));
    b.tgt.push_back({});
    s2s::EncoderOut enc = s2s::encode_lstm(params, cfg, b, nullptr);
    std::vector<s2s::LstmState> state(static_cast<std::size_t>(cfg.decoder_layers), {enc.init.h, enc.init.c});
    Tensor attn_prev = Tensor::zeros(1, cfg.hidden);

    std::vector<std::string> out;
    int prev = Vocab::kBos;
    for (int t = 0; t < max_len; ++t) {
        s2s::DecoderStepOut step = s2s::decode_step_lstm(params, cfg, {prev}, attn_prev, state, enc, nullptr);
        Eigen::Index best;
        step.logits.value().row(0).maxCoeff(&best);
        if (best == Vocab::kEos) break;
        out.push_back(tgt_vocab.token(static_cast<int>(best)));
        prev = static_cast<int>(best);
        attn_prev = step.attn_vec;
        state = std::move(step.state);
    }
    return out;
}

inline ModelParams init_params(const Seq2SeqConfig& cfg, int src_vocab_size, int tgt_vocab_size, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const int h = cfg.hidden, e = cfg.embed_dim();
    ModelParams p;
    auto put = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
        p.tensors.emplace(name, Tensor::leaf(s2s::uniform_init(rng, r, c, cfg.init_range), true));
    };
    auto put_const = [&](const std::string& name, Eigen::Index r, Eigen::Index c, double value) {
        p.tensors.emplace(name, Tensor::leaf(Matrix::Constant(r, c, value), true));
    };
    put("src_embed", src_vocab_size, e);
    put("tgt_embed", tgt_vocab_size, e);
    if (cfg.arch == Seq2SeqConfig::Arch::transformer) {
        auto put_ln = [&](const std::string& name) {
            put_const(name + ".g", 1, e, 1.0);
            put_const(name + ".b", 1, e, 0.0);
        };
        auto put_attn = [&](const std::string& pre) {
            put(pre + "wq", e, e);
            put(pre + "wk", e, e);
            put(pre + "wv", e, e);
            put(pre + "wo", e, e);
        };
        auto put_ff = [&](const std::string& pre) {
            put(pre + "ff1", e, cfg.tf_ff);
            put(pre + "ff1b", 1, cfg.tf_ff);
            put(pre + "ff2", cfg.tf_ff, e);
            put(pre + "ff2b", 1, e);
        };
        for (int l = 0; l < cfg.tf_layers; ++l) {
            std::string enc = "tf.enc.l" + std::to_string(l) + ".";
            put_attn(enc);
            put_ff(enc);
            put_ln(enc + "ln1");
            put_ln(enc + "ln2");
            std::string dec = "tf.dec.l" + std::to_string(l) + ".";
            put_attn(dec + "self.");
            put_attn(dec + "cross.");
            put_ff(dec);
            put_ln(dec + "ln1");
            put_ln(dec + "ln2");
            put_ln(dec + "ln3");
        }
        put_ln("tf.enc_ln");
        put_ln("tf.dec_ln");
        put("out.w", e, tgt_vocab_size);
        put("out.b", 1, tgt_vocab_size);
        return p;
    }
    for (int layer = 0; layer < cfg.encoder_layers; ++layer) {
        int in_dim = layer == 0 ? e : 2 * h;
        for (const char* dir : {"fw", "bw"}) {
            std::string prefix = "enc.l" + std::to_string(layer) + "." + dir + ".";
            put(prefix + "wx", in_dim, 4 * h);
            put(prefix + "wh", h, 4 * h);
            put(prefix + "b", 1, 4 * h);
        }
    }
    put("bridge.h.w", 2 * h, h);
    put("bridge.h.b", 1, h);
    put("bridge.c.w", 2 * h, h);
    put("bridge.c.b", 1, h);
    for (int layer = 0; layer < cfg.decoder_layers; ++layer) {
        std::string prefix = "dec.l" + std::to_string(layer) + ".";
        int in_dim = layer == 0 ? e + h : h;
        put(prefix + "wx", in_dim, 4 * h);
        put(prefix + "wh", h, 4 * h);
        put(prefix + "b", 1, 4 * h);
    }
    put("att.w", h, 2 * h);
    put("comb.w", 3 * h, h);
    put("comb.b", 1, h);
    put("out.w", h, tgt_vocab_size);
    put("out.b", 1, tgt_vocab_size);
    return p;
}

inline constexpr char kCheckpointMagic[8] = {'S', '2', 'S', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Named-tensor container: magic | version u32 | count u32 | per tensor
// (name_len u32, name bytes, rows u32, cols u32, row-major f64 payload).
inline void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put_u32(out, static_cast<std::uint32_t>(t.rows()));
        detail::put_u32(out, static_cast<std::uint32_t>(t.cols()));
        const Matrix& m = t.value();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_f64(out, m(i, j));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write checkpoint: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ConfigError("failed writing checkpoint: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open checkpoint: " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::ByteReader r(std::move(data), path);
    std::string magic = r.raw(sizeof(kCheckpointMagic));
    if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw FormatError("not a checkpoint file (bad magic): " + path);
    }
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    }
    std::uint32_t count = r.u32();
    ModelParams p;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = r.raw(r.u32());
        auto rows = static_cast<Eigen::Index>(r.u32());
        auto cols = static_cast<Eigen::Index>(r.u32());
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.f64();
        p.tensors.emplace(std::move(name), Tensor::leaf(std::move(m), true));
    }
    if (!r.exhausted()) throw FormatError("trailing bytes after checkpoint payload: " + path);
    return p;
}

}  // namespace simaml
