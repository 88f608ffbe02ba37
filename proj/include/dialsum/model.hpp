#pragma once

// The summarization model: a two-level BiGRU encoder over the flattened
// dialogue, a GRU decoder with hierarchical attention whose word-level scores
// are rescaled by their utterance's score, a copy mechanism over the extended
// vocabulary, and optional position embeddings tying utterance positions to
// summary token positions.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialsum/autodiff.hpp"
#include "dialsum/corpus.hpp"
#include "dialsum/tensor.hpp"

namespace dialsum {
namespace model {

using ad::Graph;
using ad::Node;
using ad::ParameterStore;
using corpus::SourceEncoding;
using corpus::Vocabulary;

inline std::size_t position_embedding_width(std::size_t feature_vocab) {
    return static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(feature_vocab), 0.7)));
}

struct ModelConfig {
    std::size_t d_e = 300;  // token embedding size
    std::size_t d = 300;    // hidden size; d/2 per BiGRU direction
    std::optional<std::size_t> d_up;  // utterance-position embedding width
    std::optional<std::size_t> d_sp;  // summary-position embedding width
    double dropout = 0.2;
    std::size_t max_utt_positions = 100;
    std::size_t max_sum_positions = 120;
    bool use_sufm_embedding = true;
    bool use_copy = true;

    std::size_t utt_pos_width() const {
        return d_up ? *d_up : position_embedding_width(max_utt_positions);
    }
    std::size_t sum_pos_width() const {
        return d_sp ? *d_sp : position_embedding_width(max_sum_positions);
    }
    bool has_utt_pos() const { return use_sufm_embedding && utt_pos_width() > 0; }
    bool has_sum_pos() const { return use_sufm_embedding && sum_pos_width() > 0; }

    void validate() const {
        if (d == 0 || d % 2 != 0) throw std::invalid_argument("ModelConfig: d must be even");
        if (d_e == 0) throw std::invalid_argument("ModelConfig: d_e must be positive");
        if (dropout < 0.0 || dropout >= 1.0) {
            throw std::invalid_argument("ModelConfig: dropout must lie in [0, 1)");
        }
        if (max_utt_positions == 0 || max_sum_positions == 0) {
            throw std::invalid_argument("ModelConfig: position limits must be positive");
        }
    }
};

// --- pretrained word vectors -------------------------------------------------

// One line per token: the token followed by its embedding values.
using WordVectors = std::unordered_map<std::string, std::vector<double>>;

inline WordVectors load_word_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read word-vector file " + path);
    WordVectors out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        std::vector<double> vec;
        double v;
        while (ss >> v) vec.push_back(v);
        if (!tok.empty() && !vec.empty()) out[tok] = std::move(vec);
    }
    return out;
}

// --- parameter layout and initialization -------------------------------------

// Enumerates every trainable tensor of a model as (name, shape), in the
// canonical order. Shared by initialization and checkpoint validation.
template <typename Fn>
void for_each_parameter(const ModelConfig& config, std::size_t vocab_size, Fn&& fn) {
    const std::size_t half = config.d / 2;
    const std::size_t word_in = config.d_e + (config.has_utt_pos() ? config.utt_pos_width() : 0);
    const std::size_t dec_in = config.d_e + (config.has_sum_pos() ? config.sum_pos_width() : 0);
    using Shape = std::vector<std::size_t>;

    fn("embed.token", Shape{vocab_size, config.d_e});
    if (config.has_utt_pos()) {
        fn("embed.utt_pos", Shape{config.max_utt_positions, config.utt_pos_width()});
    }
    if (config.has_sum_pos()) {
        fn("embed.sum_pos", Shape{config.max_sum_positions, config.sum_pos_width()});
    }

    auto gru = [&](const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim) {
        for (const char* name : ad::kGruParamNames) {
            bool is_bias = name[0] == 'b';
            bool is_input = name[2] == 'i';
            Shape shape = is_bias ? Shape{hidden_dim}
                                  : Shape{hidden_dim, is_input ? input_dim : hidden_dim};
            fn(prefix + "." + name, shape);
        }
    };
    gru("enc.word.fwd", word_in, half);
    gru("enc.word.bwd", word_in, half);
    gru("enc.utt.fwd", config.d, half);
    gru("enc.utt.bwd", config.d, half);
    gru("dec.gru", dec_in, config.d);

    for (const char* level : {"attn.utt", "attn.word"}) {
        std::string p(level);
        fn(p + ".w1", Shape{config.d, config.d});
        fn(p + ".w2", Shape{config.d, config.d});
        fn(p + ".b", Shape{config.d});
        fn(p + ".v", Shape{config.d});
    }
    fn("merge.w", Shape{config.d, 3 * config.d});
    fn("merge.b", Shape{config.d});
    fn("gate.w", Shape{config.d});
    fn("gate.b", Shape{1});
    fn("out.w", Shape{vocab_size, config.d});
    fn("out.b", Shape{vocab_size});
}

// Every tensor draws from its own stream keyed by (seed, name), so adding or
// removing optional parameters never perturbs the values of the others. All
// draws are uniform in [-0.1, 0.1]; pretrained vectors then overwrite the
// embedding rows they cover.
inline ParameterStore init_parameters(const ModelConfig& config, const Vocabulary& vocab,
                                      std::uint64_t seed,
                                      const WordVectors* pretrained = nullptr) {
    config.validate();
    ParameterStore store;
    for_each_parameter(config, vocab.size(),
                       [&](const std::string& name, const std::vector<std::size_t>& shape) {
                           Tensor t(shape);
                           Rng rng(seed ^ fnv1a(name));
                           for (double& v : t.data) v = rng.uniform(-0.1, 0.1);
                           store.add(name, std::move(t));
                       });

    if (pretrained) {
        Tensor& emb = store.at("embed.token").value;
        for (std::size_t id = 0; id < vocab.size(); ++id) {
            auto it = pretrained->find(vocab.token_of(id));
            if (it == pretrained->end()) continue;
            if (it->second.size() != config.d_e) {
                throw std::invalid_argument("pretrained vector width " +
                                            std::to_string(it->second.size()) +
                                            " does not match d_e " + std::to_string(config.d_e));
            }
            for (std::size_t j = 0; j < config.d_e; ++j) emb.at(id, j) = it->second[j];
        }
    }
    return store;
}

// --- dropout ---------------------------------------------------------------------

// Inverted dropout: surviving activations are scaled by 1/keep at train time;
// eval mode is the identity. Mask draws come from the caller's seeded RNG.
inline Node* dropout(Graph& g, Node* x, double ratio, Rng* rng, bool training) {
    if (!training || ratio <= 0.0) return x;
    if (!rng) throw std::invalid_argument("dropout: training mode requires an RNG");
    const double keep = 1.0 - ratio;
    Tensor mask(x->val().shape);
    for (double& m : mask.data) m = rng->next_double() < keep ? 1.0 / keep : 0.0;
    return g.mul(x, g.constant(std::move(mask)));
}

// --- encoder -----------------------------------------------------------------------

struct EncoderNodes {
    Node* word_states = nullptr;       // L_x x d
    Node* utterance_states = nullptr;  // L_Xtilde x d
    Node* global_state = nullptr;      // d
};

namespace detail {

inline std::vector<Node*> run_gru(Graph& g, const std::vector<Node*>& inputs, Node* h0,
                                  const ad::GruParams& params, bool reverse) {
    std::vector<Node*> states(inputs.size());
    Node* h = h0;
    if (!reverse) {
        for (std::size_t j = 0; j < inputs.size(); ++j) {
            h = ad::gru_cell(g, inputs[j], h, params);
            states[j] = h;
        }
    } else {
        for (std::size_t j = inputs.size(); j-- > 0;) {
            h = ad::gru_cell(g, inputs[j], h, params);
            states[j] = h;
        }
    }
    return states;
}

}  // namespace detail

// Hierarchical encoding: word-level BiGRU over the flat sequence, average
// pooling per utterance (separator included) with dropout, utterance-level
// BiGRU, and the global state [fwd at last utterance; bwd at first].
inline EncoderNodes encode(Graph& g, ParameterStore& store, const ModelConfig& config,
                           const SourceEncoding& src, Rng* rng = nullptr,
                           bool training = false) {
    if (src.length() == 0) throw std::invalid_argument("encode: empty source");
    Node* token_table = g.param(store, "embed.token");
    Node* pos_table = config.has_utt_pos() ? g.param(store, "embed.utt_pos") : nullptr;

    std::vector<Node*> inputs(src.length());
    for (std::size_t j = 0; j < src.length(); ++j) {
        Node* e = g.embed_row(token_table, static_cast<std::size_t>(src.token_ids[j]));
        if (pos_table) {
            // utterance indices are 1-based; overflow clamps to the last row
            std::size_t pos = std::min(src.utt_index[j], config.max_utt_positions) - 1;
            e = g.concat({e, g.embed_row(pos_table, pos)});
        }
        inputs[j] = e;
    }

    Node* h0 = g.constant(Tensor({config.d / 2}));
    auto fwd = detail::run_gru(g, inputs, h0, ad::bind_gru(g, store, "enc.word.fwd"), false);
    auto bwd = detail::run_gru(g, inputs, h0, ad::bind_gru(g, store, "enc.word.bwd"), true);
    std::vector<Node*> word_states(src.length());
    for (std::size_t j = 0; j < src.length(); ++j) {
        word_states[j] = g.concat({fwd[j], bwd[j]});
    }
    Node* word_matrix = g.stack_rows(word_states);

    auto spans = src.utterance_spans();
    std::vector<Node*> pooled(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        Node* mean = g.mean_rows(word_matrix, spans[i].first, spans[i].second);
        pooled[i] = dropout(g, mean, config.dropout, rng, training);
    }
    auto ufwd = detail::run_gru(g, pooled, h0, ad::bind_gru(g, store, "enc.utt.fwd"), false);
    auto ubwd = detail::run_gru(g, pooled, h0, ad::bind_gru(g, store, "enc.utt.bwd"), true);
    std::vector<Node*> utt_states(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        utt_states[i] = g.concat({ufwd[i], ubwd[i]});
    }

    EncoderNodes out;
    out.word_states = word_matrix;
    out.utterance_states = g.stack_rows(utt_states);
    out.global_state = g.concat({ufwd.back(), ubwd.front()});
    return out;
}

// --- hierarchical attention ------------------------------------------------------

struct AttentionNodes {
    Node* c_u = nullptr;       // utterance context, d
    Node* c_w = nullptr;       // word context, d
    Node* utt_attn = nullptr;  // alpha^u, L_Xtilde
    Node* word_attn = nullptr; // rescaled alpha^w, L_x
};

namespace detail {

// beta_i = v^T tanh(W1 s + W2 r_i + b) for every row r_i of `rows`.
inline Node* additive_scores(Graph& g, ParameterStore& store, const std::string& prefix,
                             Node* state, Node* rows) {
    Node* proj = g.matmul_nt(rows, g.param(store, prefix + ".w2"));
    Node* query = g.linear(g.param(store, prefix + ".w1"), state, g.param(store, prefix + ".b"));
    Node* hidden = g.tanh(g.add_rowvec(proj, query));
    return g.matvec(hidden, g.param(store, prefix + ".v"));
}

}  // namespace detail

// Multiplies raw word scores by the attention score of the utterance each
// token belongs to, then renormalizes to sum 1.
inline Node* rescale_word_attention(Graph& g, Node* word_attn, Node* utt_attn,
                                    const SourceEncoding& src) {
    std::vector<std::uint32_t> owner(src.length());
    for (std::size_t j = 0; j < src.length(); ++j) {
        owner[j] = static_cast<std::uint32_t>(src.utt_index[j] - 1);
    }
    Node* weighted = g.mul(word_attn, g.gather(utt_attn, std::move(owner)));
    return g.div_scalar(weighted, g.sum(weighted));
}

inline AttentionNodes hierarchical_attention(Graph& g, ParameterStore& store, Node* state,
                                             const EncoderNodes& enc,
                                             const SourceEncoding& src) {
    AttentionNodes out;
    out.utt_attn = g.softmax(detail::additive_scores(g, store, "attn.utt", state,
                                                     enc.utterance_states));
    Node* raw_word = g.softmax(detail::additive_scores(g, store, "attn.word", state,
                                                       enc.word_states));
    out.word_attn = rescale_word_attention(g, raw_word, out.utt_attn, src);
    out.c_u = g.tmatvec(enc.utterance_states, out.utt_attn);
    out.c_w = g.tmatvec(enc.word_states, out.word_attn);
    return out;
}

// --- copy distribution --------------------------------------------------------------

struct CopyNodes {
    Node* dist = nullptr;  // over V (+ ext when copying)
    Node* gate = nullptr;  // scalar in [0, 1]
};

// P = (1 - g) P_V + g P_X on the extended vocabulary. P_V is zero outside V;
// P_X aggregates rescaled word attention per source token and is zero outside
// the source. With use_copy off the distribution is P_V alone and the gate is
// pinned to zero.
inline CopyNodes copy_distribution(Graph& g, ParameterStore& store, const ModelConfig& config,
                                   Node* merged, Node* word_attn, const SourceEncoding& src,
                                   std::size_t vocab_size) {
    CopyNodes out;
    Node* vocab_dist = g.softmax(g.linear(g.param(store, "out.w"), merged,
                                          g.param(store, "out.b")));
    if (!config.use_copy) {
        out.dist = vocab_dist;
        out.gate = g.constant_scalar(0.0);
        return out;
    }
    out.gate = g.sigmoid(g.add(g.dot(g.param(store, "gate.w"), merged),
                               g.param(store, "gate.b")));
    Node* gen_part = g.mul_scalar(vocab_dist, g.one_minus(out.gate));
    if (!src.ext_vocab.empty()) {
        gen_part = g.concat({gen_part, g.constant(Tensor({src.ext_vocab.size()}))});
    }
    std::vector<std::uint32_t> targets(src.length());
    for (std::size_t j = 0; j < src.length(); ++j) {
        targets[j] = static_cast<std::uint32_t>(src.ext_ids[j]);
    }
    Node* copy_part = g.mul_scalar(
        g.scatter_add(word_attn, std::move(targets), vocab_size + src.ext_vocab.size()),
        out.gate);
    out.dist = g.add(gen_part, copy_part);
    return out;
}

// --- decoder step ----------------------------------------------------------------------

struct StepNodes {
    Node* state = nullptr;  // s_t
    Node* dist = nullptr;   // output distribution
    Node* utt_attn = nullptr;
    Node* word_attn = nullptr;
    Node* gate = nullptr;
};

// One decode step at position t >= 1. prev_token is the in-vocabulary id of
// y_{t-1} (the start token at t = 1; OOV tokens map to <unk> upstream). The
// caller seeds state with the encoder's global_state for t = 1.
inline StepNodes decode_step(Graph& g, ParameterStore& store, const ModelConfig& config,
                             const EncoderNodes& enc, const SourceEncoding& src,
                             Node* prev_state, std::int32_t prev_token, std::size_t t,
                             std::size_t vocab_size, Rng* rng = nullptr,
                             bool training = false) {
    if (t < 1) throw std::invalid_argument("decode_step: t must be >= 1");
    Node* input = g.embed_row(g.param(store, "embed.token"),
                              static_cast<std::size_t>(prev_token));
    if (config.has_sum_pos()) {
        // position t-1 of the previous token; overflow clamps to the last row
        std::size_t pos = std::min(t - 1, config.max_sum_positions - 1);
        input = g.concat({input, g.embed_row(g.param(store, "embed.sum_pos"), pos)});
    }

    StepNodes out;
    out.state = ad::gru_cell(g, input, prev_state, ad::bind_gru(g, store, "dec.gru"));
    AttentionNodes attn = hierarchical_attention(g, store, out.state, enc, src);
    Node* merged = dropout(
        g,
        g.linear(g.param(store, "merge.w"), g.concat({out.state, attn.c_u, attn.c_w}),
                 g.param(store, "merge.b")),
        config.dropout, rng, training);
    CopyNodes copy = copy_distribution(g, store, config, merged, attn.word_attn, src,
                                       vocab_size);
    out.dist = copy.dist;
    out.gate = copy.gate;
    out.utt_attn = attn.utt_attn;
    out.word_attn = attn.word_attn;
    return out;
}

// --- whole-sequence teacher-forced pass --------------------------------------------------

struct ForwardResult {
    EncoderNodes enc;
    std::vector<Node*> states;  // s_1 .. s_T
    std::vector<Node*> dists;
    std::vector<StepNodes> steps;
};

// input_ids[t] is the decoder input at step t+1 (start token first, then the
// gold summary tokens mapped into the vocabulary).
inline ForwardResult forward_teacher_forced(Graph& g, ParameterStore& store,
                                            const ModelConfig& config,
                                            const SourceEncoding& src,
                                            const std::vector<std::int32_t>& input_ids,
                                            std::size_t vocab_size, Rng* rng = nullptr,
                                            bool training = false) {
    ForwardResult out;
    out.enc = encode(g, store, config, src, rng, training);
    Node* state = out.enc.global_state;
    for (std::size_t t = 0; t < input_ids.size(); ++t) {
        StepNodes step = decode_step(g, store, config, out.enc, src, state, input_ids[t],
                                     t + 1, vocab_size, rng, training);
        state = step.state;
        out.states.push_back(step.state);
        out.dists.push_back(step.dist);
        out.steps.push_back(step);
    }
    return out;
}

// --- value-form attention trace ------------------------------------------------------------

// Per decode step: utterance scores, rescaled word scores, and the copy gate.
struct AttentionStep {
    std::vector<double> utterance_scores;
    std::vector<double> word_scores;
    double copy_gate = 0.0;
};

using AttentionTrace = std::vector<AttentionStep>;

inline AttentionStep to_attention_step(const StepNodes& step) {
    AttentionStep row;
    row.utterance_scores = step.utt_attn->val().data;
    row.word_scores = step.word_attn->val().data;
    row.copy_gate = step.gate->scalar_value();
    return row;
}

inline AttentionTrace to_attention_trace(const std::vector<StepNodes>& steps) {
    AttentionTrace trace;
    trace.reserve(steps.size());
    for (const auto& s : steps) trace.push_back(to_attention_step(s));
    return trace;
}

}  // namespace model
}  // namespace dialsum
