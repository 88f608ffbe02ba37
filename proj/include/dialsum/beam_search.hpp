#pragma once

// Beam-search decoding with length and coverage penalties and repeated-bigram
// blocking. The search is generic over a "stepper" that produces, per step,
// an output distribution plus attention rows; the model-backed stepper and
// mock steppers for oracle tests share the same machinery.
//
// Conventions:
//  - emitted sequences include the end token; hypothesis length counts it
//  - the end token is masked while emitting it would leave the sequence
//    shorter than min_len
//  - finished hypotheses score as logP / length_penalty + coverage_penalty;
//    ties break toward the lexicographically smaller token sequence

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dialsum/corpus.hpp"
#include "dialsum/model.hpp"

namespace dialsum {
namespace search {

struct SearchConfig {
    std::size_t beam = 5;
    std::size_t min_len = 15;
    std::size_t max_len = 100;
    double alpha = 0.9;              // length penalty exponent
    double beta = 5.0;               // coverage penalty weight
    bool coverage_per_step = false;  // apply coverage while ranking, not only at the end

    void validate() const {
        if (beam == 0) throw std::invalid_argument("SearchConfig: beam must be positive");
        if (max_len == 0 || min_len > max_len) {
            throw std::invalid_argument("SearchConfig: need 0 < min_len <= max_len");
        }
    }
};

inline double length_penalty(std::size_t length, double alpha) {
    if (length < 1) throw std::invalid_argument("length_penalty: length must be >= 1");
    return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

// beta * sum_j log(min(sum_j, 1)); arguments clamped below at 1e-12.
inline double coverage_penalty(const std::vector<double>& attention_sums, double beta) {
    if (beta == 0.0) return 0.0;
    double total = 0.0;
    for (double s : attention_sums) {
        total += std::log(std::max(std::min(s, 1.0), 1e-12));
    }
    return beta * total;
}

// True iff appending `candidate` creates a bigram already in the hypothesis.
inline bool bigram_blocked(const std::vector<std::int32_t>& tokens, std::int32_t candidate) {
    if (tokens.empty()) return false;
    const std::int32_t last = tokens.back();
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i] == last && tokens[i + 1] == candidate) return true;
    }
    return false;
}

struct StepResult {
    std::vector<double> probs;  // over the stepper's output alphabet
    model::AttentionStep attention;
    std::vector<double> state;
};

struct BeamHypothesis {
    std::vector<std::int32_t> tokens;
    double log_prob = 0.0;
    std::vector<double> attention_sums;  // cumulative word attention per source token
    model::AttentionTrace trace;
    std::vector<double> state;
    bool finished = false;
};

struct SearchResult {
    std::vector<std::int32_t> tokens;
    model::AttentionTrace trace;
    double score = -std::numeric_limits<double>::infinity();
    bool finished = false;
};

namespace detail {

inline double final_score(const BeamHypothesis& hyp, const SearchConfig& cfg) {
    const std::size_t len = std::max<std::size_t>(1, hyp.tokens.size());
    return hyp.log_prob / length_penalty(len, cfg.alpha) +
           coverage_penalty(hyp.attention_sums, cfg.beta);
}

inline bool better(double score_a, const std::vector<std::int32_t>& tok_a, double score_b,
                   const std::vector<std::int32_t>& tok_b) {
    if (score_a != score_b) return score_a > score_b;
    return tok_a < tok_b;
}

}  // namespace detail

// Stepper requirements:
//   std::vector<double> initial_state() const
//   StepResult step(const std::vector<double>& state, std::int32_t prev_token, std::size_t t)
//   std::int32_t start_token() const, std::int32_t end_token() const
template <typename Stepper>
SearchResult beam_search(Stepper& stepper, const SearchConfig& cfg) {
    cfg.validate();
    const std::int32_t end_tok = stepper.end_token();

    std::vector<BeamHypothesis> beam(1);
    beam[0].state = stepper.initial_state();

    std::vector<BeamHypothesis> finished;
    BeamHypothesis best_unfinished;
    bool have_unfinished = false;

    for (std::size_t t = 1; t <= cfg.max_len && !beam.empty(); ++t) {
        struct Candidate {
            std::size_t source;
            std::int32_t token;
            double log_prob;
            double rank_score;
        };
        std::vector<Candidate> candidates;
        std::vector<StepResult> steps(beam.size());

        for (std::size_t h = 0; h < beam.size(); ++h) {
            const BeamHypothesis& hyp = beam[h];
            const std::int32_t prev =
                hyp.tokens.empty() ? stepper.start_token() : hyp.tokens.back();
            steps[h] = stepper.step(hyp.state, prev, t);
            const StepResult& step = steps[h];

            double step_coverage = 0.0;
            if (cfg.coverage_per_step) {
                std::vector<double> sums = hyp.attention_sums;
                sums.resize(step.attention.word_scores.size(), 0.0);
                for (std::size_t j = 0; j < step.attention.word_scores.size(); ++j) {
                    sums[j] += step.attention.word_scores[j];
                }
                step_coverage = coverage_penalty(sums, cfg.beta);
            }

            for (std::size_t c = 0; c < step.probs.size(); ++c) {
                const double p = step.probs[c];
                if (p <= 0.0) continue;
                const std::int32_t tok = static_cast<std::int32_t>(c);
                if (tok == end_tok) {
                    // masked to -inf while the finished length would undershoot
                    if (hyp.tokens.size() + 1 < cfg.min_len) continue;
                } else if (bigram_blocked(hyp.tokens, tok)) {
                    continue;
                }
                const double lp = hyp.log_prob + std::log(p);
                candidates.push_back({h, tok, lp, lp + step_coverage});
            }
        }

        std::sort(candidates.begin(), candidates.end(),
                  [&](const Candidate& a, const Candidate& b) {
                      if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
                      if (beam[a.source].tokens != beam[b.source].tokens) {
                          return beam[a.source].tokens < beam[b.source].tokens;
                      }
                      return a.token < b.token;
                  });

        // finished and unfinished candidates compete for the same beam slots;
        // this keeps beam = 1 exactly equal to greedy decoding
        std::vector<BeamHypothesis> next;
        std::size_t taken = 0;
        for (const Candidate& cand : candidates) {
            if (taken >= cfg.beam) break;
            ++taken;
            const BeamHypothesis& src_hyp = beam[cand.source];
            const StepResult& step = steps[cand.source];

            BeamHypothesis hyp;
            hyp.tokens = src_hyp.tokens;
            hyp.tokens.push_back(cand.token);
            hyp.log_prob = cand.log_prob;
            hyp.trace = src_hyp.trace;
            hyp.trace.push_back(step.attention);
            hyp.attention_sums = src_hyp.attention_sums;
            hyp.attention_sums.resize(step.attention.word_scores.size(), 0.0);
            for (std::size_t j = 0; j < step.attention.word_scores.size(); ++j) {
                hyp.attention_sums[j] += step.attention.word_scores[j];
            }
            hyp.state = step.state;

            if (cand.token == end_tok) {
                hyp.finished = true;
                finished.push_back(std::move(hyp));
            } else {
                next.push_back(std::move(hyp));
            }
        }

        // fallback in case nothing ever finishes: the deepest step's best,
        // which is the best unfinished hypothesis at max_len when reached
        if (!next.empty()) {
            const BeamHypothesis* step_best = nullptr;
            for (const BeamHypothesis& hyp : next) {
                if (!step_best ||
                    detail::better(detail::final_score(hyp, cfg), hyp.tokens,
                                   detail::final_score(*step_best, cfg), step_best->tokens)) {
                    step_best = &hyp;
                }
            }
            best_unfinished = *step_best;
            have_unfinished = true;
        }
        beam = std::move(next);
    }

    SearchResult result;
    const BeamHypothesis* best = nullptr;
    for (const BeamHypothesis& hyp : finished) {
        const double score = detail::final_score(hyp, cfg);
        if (!best || detail::better(score, hyp.tokens, result.score, best->tokens)) {
            best = &hyp;
            result.score = score;
        }
    }
    if (best) {
        result.tokens = best->tokens;
        result.trace = best->trace;
        result.finished = true;
        return result;
    }
    if (have_unfinished) {
        result.tokens = best_unfinished.tokens;
        result.trace = best_unfinished.trace;
        result.score = detail::final_score(best_unfinished, cfg);
        result.finished = false;
        return result;
    }
    return result;  // empty source of candidates; empty output
}

template <typename Stepper>
SearchResult greedy_decode(Stepper& stepper, SearchConfig cfg) {
    cfg.beam = 1;
    return beam_search(stepper, cfg);
}

// --- model-backed stepper -------------------------------------------------------

// Runs the encoder once, then replays single decode steps against frozen
// encoder values. Tokens are extended-vocabulary ids; OOV ids feed back into
// the decoder as <unk>.
class ModelStepper {
  public:
    ModelStepper(ad::ParameterStore& store, const model::ModelConfig& config,
                 const corpus::Vocabulary& vocab, const corpus::SourceEncoding& src)
        : store_(store), config_(config), vocab_(vocab), src_(src) {
        ad::Graph g;
        model::EncoderNodes enc = model::encode(g, store_, config_, src_);
        word_states_ = enc.word_states->val();
        utt_states_ = enc.utterance_states->val();
        global_ = enc.global_state->val();
    }

    std::vector<double> initial_state() const { return global_.data; }
    std::int32_t start_token() const { return vocab_.start_id(); }
    std::int32_t end_token() const { return vocab_.end_id(); }
    std::size_t output_size() const { return vocab_.size() + src_.ext_vocab.size(); }

    StepResult step(const std::vector<double>& state, std::int32_t prev_token, std::size_t t) {
        const std::int32_t prev =
            prev_token < static_cast<std::int32_t>(vocab_.size()) ? prev_token
                                                                  : vocab_.unk_id();
        ad::Graph g;
        model::EncoderNodes enc;
        enc.word_states = g.constant(word_states_);
        enc.utterance_states = g.constant(utt_states_);
        model::StepNodes nodes =
            model::decode_step(g, store_, config_, enc, src_, g.constant(Tensor::vector(state)),
                               prev, t, vocab_.size(), nullptr, false);
        StepResult out;
        out.probs = nodes.dist->val().data;
        out.attention = model::to_attention_step(nodes);
        out.state = nodes.state->val().data;
        return out;
    }

  private:
    ad::ParameterStore& store_;
    const model::ModelConfig& config_;
    const corpus::Vocabulary& vocab_;
    const corpus::SourceEncoding& src_;
    Tensor word_states_;
    Tensor utt_states_;
    Tensor global_;
};

}  // namespace search
}  // namespace dialsum
