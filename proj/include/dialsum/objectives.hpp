#pragma once

// Training objectives: generation NLL, the supporting-utterance-flow loss
// over rescaled word attention, the TransE-style fact regularization over
// decoder states, and their joint combination. All losses are built as graph
// nodes so the same code serves training and value-only analysis.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dialsum/autodiff.hpp"
#include "dialsum/corpus.hpp"
#include "dialsum/model.hpp"

namespace dialsum {
namespace objectives {

using ad::Graph;
using ad::Node;
using corpus::FactTriplet;
using corpus::SourceEncoding;
using corpus::SupportAlignment;

struct LossWeights {
    double lambda1 = 0.3;  // CSU focus weight
    double lambda2 = 1.0;  // PSU ignore weight
    double lambda3 = 0.3;  // fact-regularization weight
    bool enable_sufm_loss = true;
    bool enable_fr_loss = true;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
            throw std::invalid_argument("LossWeights: weights must be nonnegative");
        }
    }
};

namespace detail {

constexpr double kLogFloor = 1e-12;

// Clamp a probability-like scalar into [1e-12, 1] before the log.
inline Node* clamp_unit(Graph& g, Node* x) {
    Node* capped = g.affine(g.clamp_min(g.affine(x, -1.0, 0.0), -1.0), -1.0, 0.0);  // min(x, 1)
    return g.clamp_min(capped, kLogFloor);
}

inline Node* neg_log(Graph& g, Node* x) { return g.scale(g.log(clamp_unit(g, x)), -1.0); }

}  // namespace detail

// -sum_t log P(y_t); each P(y_t) clamped below at 1e-12 before the log.
inline Node* generation_loss(Graph& g, const std::vector<Node*>& step_distributions,
                             const std::vector<std::int32_t>& target_ids) {
    if (step_distributions.size() != target_ids.size()) {
        throw std::invalid_argument("generation_loss: one distribution per target token");
    }
    if (step_distributions.empty()) {
        throw std::invalid_argument("generation_loss: no steps");
    }
    Node* total = nullptr;
    for (std::size_t t = 0; t < target_ids.size(); ++t) {
        Node* p = g.pick(step_distributions[t], static_cast<std::size_t>(target_ids[t]));
        Node* nll = detail::neg_log(g, p);
        total = total ? g.add(total, nll) : nll;
    }
    return total;
}

namespace detail {

// 1.0 at flat-token positions whose utterance lies in `members` (1-based).
inline Tensor utterance_mask(const SourceEncoding& src,
                             const std::vector<std::size_t>& members) {
    Tensor mask({src.length()});
    for (std::size_t j = 0; j < src.length(); ++j) {
        for (std::size_t u : members) {
            if (src.utt_index[j] == u) {
                mask[j] = 1.0;
                break;
            }
        }
    }
    return mask;
}

}  // namespace detail

// Per summary sentence k:
//   l_CSU = -log( mass on CSU_k / total mass )
//   l_PSU = -log( 1 - mass on PSU_k / total mass )
// where mass sums rescaled word attention over the sentence's decode steps.
// Sentences with an empty CSU (PSU) contribute no CSU (PSU) term; log
// arguments are clamped to [1e-12, 1]. Total is sum_k (l1*l_CSU + l2*l_PSU).
//
// word_attn_rows[t] is the rescaled word-attention vector of step t+1; the
// rows must cover every step of every sentence span.
inline Node* sufm_loss(Graph& g, const std::vector<Node*>& word_attn_rows,
                       const SupportAlignment& align, const SourceEncoding& src,
                       const LossWeights& weights) {
    weights.validate();
    Node* total = g.constant_scalar(0.0);
    for (const auto& sentence : align.sentences) {
        if (sentence.span.end > word_attn_rows.size()) {
            throw std::invalid_argument("sufm_loss: trace does not cover all target steps");
        }
        if (sentence.csu.empty() && sentence.psu.empty()) continue;

        Node* denom = nullptr;
        for (std::size_t t = sentence.span.begin; t < sentence.span.end; ++t) {
            Node* s = g.sum(word_attn_rows[t]);
            denom = denom ? g.add(denom, s) : s;
        }
        denom = g.clamp_min(denom, detail::kLogFloor);

        auto mass_fraction = [&](const std::vector<std::size_t>& members) {
            Node* mask = g.constant(detail::utterance_mask(src, members));
            Node* num = nullptr;
            for (std::size_t t = sentence.span.begin; t < sentence.span.end; ++t) {
                Node* m = g.dot(word_attn_rows[t], mask);
                num = num ? g.add(num, m) : m;
            }
            return g.div_scalar(num, denom);
        };

        if (!sentence.csu.empty()) {
            Node* l_csu = detail::neg_log(g, mass_fraction(sentence.csu));
            total = g.add(total, g.scale(l_csu, weights.lambda1));
        }
        if (!sentence.psu.empty()) {
            Node* l_psu = detail::neg_log(g, g.one_minus(mass_fraction(sentence.psu)));
            total = g.add(total, g.scale(l_psu, weights.lambda2));
        }
    }
    return total;
}

// lambda3 * sum_k (1 - cos(s_subj + s_verb, s_obj)) over decoder states at
// the triplet's token positions. The cosine of a near-zero vector is 0 by
// convention, so such a term contributes exactly lambda3.
inline Node* fr_loss(Graph& g, const std::vector<Node*>& decoder_states,
                     const std::vector<FactTriplet>& triplets, const LossWeights& weights) {
    weights.validate();
    Node* total = g.constant_scalar(0.0);
    for (const auto& t : triplets) {
        if (t.subject_pos >= decoder_states.size() || t.verb_pos >= decoder_states.size() ||
            t.object_pos >= decoder_states.size()) {
            throw std::invalid_argument("fr_loss: triplet position outside the state sequence");
        }
        Node* sum_sv = g.add(decoder_states[t.subject_pos], decoder_states[t.verb_pos]);
        Node* cos = g.cosine(sum_sv, decoder_states[t.object_pos]);
        total = g.add(total, g.one_minus(cos));
    }
    return g.scale(total, weights.lambda3);
}

// l = l_G + l_SUFM + l_FR, honoring the ablation flags. Disabled or absent
// components are skipped entirely so ablation runs are bit-identical to
// models that never computed them.
inline Node* joint_loss(Graph& g, Node* l_g, Node* l_sufm, Node* l_fr,
                        const LossWeights& weights) {
    if (!l_g) throw std::invalid_argument("joint_loss: generation loss is required");
    Node* total = l_g;
    if (weights.enable_sufm_loss && l_sufm) total = g.add(total, l_sufm);
    if (weights.enable_fr_loss && l_fr) total = g.add(total, l_fr);
    return total;
}

// --- value-only wrappers (analysis, ablation comparisons) --------------------------

inline double sufm_loss_value(const model::AttentionTrace& trace, const SupportAlignment& align,
                              const SourceEncoding& src, const LossWeights& weights) {
    Graph g;
    std::vector<Node*> rows;
    rows.reserve(trace.size());
    for (const auto& step : trace) {
        rows.push_back(g.constant(Tensor::vector(step.word_scores)));
    }
    return sufm_loss(g, rows, align, src, weights)->scalar_value();
}

inline double fr_loss_value(const std::vector<std::vector<double>>& states,
                            const std::vector<FactTriplet>& triplets,
                            const LossWeights& weights) {
    Graph g;
    std::vector<Node*> nodes;
    nodes.reserve(states.size());
    for (const auto& s : states) nodes.push_back(g.constant(Tensor::vector(s)));
    return fr_loss(g, nodes, triplets, weights)->scalar_value();
}

}  // namespace objectives
}  // namespace dialsum
