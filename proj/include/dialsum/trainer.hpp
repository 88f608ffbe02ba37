#pragma once

// The optimization loop: Adam with global-norm gradient clipping, teacher
// forcing, learning-rate halving when validation perplexity plateaus, and
// early stopping. Batches are gradient-accumulation groups; every example is
// processed on its own graph, so no padding exists anywhere.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialsum/autodiff.hpp"
#include "dialsum/checkpoint.hpp"
#include "dialsum/corpus.hpp"
#include "dialsum/model.hpp"
#include "dialsum/objectives.hpp"
#include "dialsum/trainer_config.hpp"

namespace dialsum {
namespace train {

using ad::Graph;
using ad::Node;
using ad::ParameterStore;
using corpus::PreparedExample;
using corpus::SourceEncoding;
using corpus::Vocabulary;
using objectives::LossWeights;

// --- optimizer ----------------------------------------------------------------

// Scales all trainable gradient accumulators so their global L2 norm does not
// exceed max_norm. Returns the pre-clip norm.
inline double clip_gradients(ParameterStore& store, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("clip_gradients: max_norm must be positive");
    double sq = 0.0;
    for (const auto& e : store.entries()) {
        if (!e->trainable) continue;
        for (double g : e->grad.data) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& e : store.entries()) {
            if (!e->trainable) continue;
            for (double& g : e->grad.data) g *= scale;
        }
    }
    return norm;
}

struct AdamState {
    struct Moments {
        Tensor m;
        Tensor v;
    };
    std::unordered_map<std::string, Moments> moments;
    std::int64_t step = 0;
};

// Standard bias-corrected Adam over the store's gradient accumulators.
inline void adam_step(ParameterStore& store, AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (auto& e : store.entries()) {
        if (!e->trainable) continue;
        auto it = state.moments.find(e->name);
        if (it == state.moments.end()) {
            it = state.moments.emplace(e->name, AdamState::Moments{Tensor(e->value.shape),
                                                                   Tensor(e->value.shape)})
                     .first;
        }
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        for (std::size_t i = 0; i < e->value.numel(); ++i) {
            const double g = e->grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            e->value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

// --- plateau policy --------------------------------------------------------------

// Strict non-improvement counting: any epoch whose perplexity is not strictly
// below the best seen counts against both patiences.
struct PlateauPolicy {
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    struct Decision {
        bool improved = false;
        bool decay = false;
        bool stop = false;
    };

    Decision update(double perplexity, std::size_t patience_decay, std::size_t patience_stop) {
        Decision d;
        if (perplexity < best) {
            best = perplexity;
            stale_epochs = 0;
            d.improved = true;
        } else {
            ++stale_epochs;
            d.decay = stale_epochs >= patience_decay;
            d.stop = stale_epochs >= patience_stop;
        }
        return d;
    }
};

// --- target encoding ----------------------------------------------------------------

struct TargetEncoding {
    std::vector<std::int32_t> input_ids;   // decoder inputs: start, then gold tokens
    std::vector<std::int32_t> target_ids;  // gold tokens (extended ids), then end
};

// Teacher-forced ids for one summary. Decoder inputs live in the base
// vocabulary (OOV tokens become <unk>); targets use extended ids when the
// copy mechanism is on, so source-only tokens stay predictable.
inline TargetEncoding encode_targets(const corpus::TokenList& summary, const Vocabulary& vocab,
                                     const SourceEncoding& src, bool use_copy) {
    std::unordered_map<std::string, std::int32_t> ext;
    if (use_copy) {
        for (std::size_t k = 0; k < src.ext_vocab.size(); ++k) {
            ext.emplace(src.ext_vocab[k], static_cast<std::int32_t>(vocab.size() + k));
        }
    }
    TargetEncoding enc;
    enc.input_ids.push_back(vocab.start_id());
    for (const auto& tok : summary) {
        std::int32_t in_vocab = vocab.id_of(tok);
        enc.input_ids.push_back(in_vocab);
        std::int32_t target = in_vocab;
        if (use_copy && !vocab.contains(tok)) {
            auto it = ext.find(tok);
            if (it != ext.end()) target = it->second;
        }
        enc.target_ids.push_back(target);
    }
    enc.target_ids.push_back(vocab.end_id());
    return enc;
}

// --- training loop --------------------------------------------------------------------

struct EpochLog {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double gen_loss = 0.0;   // per-example means over the epoch
    double sufm_loss = 0.0;
    double fr_loss = 0.0;
    double train_nll_per_token = 0.0;
    double valid_perplexity = 0.0;
};

inline void write_log_header(std::ostream& out) {
    out << "epoch\tlr\tgen_loss\tsufm_loss\tfr_loss\ttrain_nll_per_token\tvalid_ppl\n";
}

inline void write_log_row(std::ostream& out, const EpochLog& row) {
    out << row.epoch << '\t' << row.learning_rate << '\t' << row.gen_loss << '\t'
        << row.sufm_loss << '\t' << row.fr_loss << '\t' << row.train_nll_per_token << '\t'
        << row.valid_perplexity << '\n';
}

struct TrainResult {
    Checkpoint best;
    std::vector<EpochLog> log;
};

namespace detail {

struct ExampleLosses {
    Node* joint = nullptr;
    double gen = 0.0;
    double sufm = 0.0;
    double fr = 0.0;
    std::size_t target_tokens = 0;
};

inline ExampleLosses example_loss(Graph& g, ParameterStore& store,
                                  const model::ModelConfig& config, const Vocabulary& vocab,
                                  const PreparedExample& ex, const LossWeights& weights,
                                  Rng* rng, bool training) {
    ExampleLosses out;
    SourceEncoding src = corpus::encode_example(ex.example, vocab);
    TargetEncoding targets = encode_targets(ex.example.summary, vocab, src, config.use_copy);
    auto fwd = model::forward_teacher_forced(g, store, config, src, targets.input_ids,
                                             vocab.size(), rng, training);
    Node* l_g = objectives::generation_loss(g, fwd.dists, targets.target_ids);
    out.gen = l_g->scalar_value();
    out.target_tokens = targets.target_ids.size();

    Node* l_sufm = nullptr;
    if (weights.enable_sufm_loss) {
        std::vector<Node*> rows;
        rows.reserve(fwd.steps.size());
        for (const auto& s : fwd.steps) rows.push_back(s.word_attn);
        l_sufm = objectives::sufm_loss(g, rows, ex.alignment, src, weights);
        out.sufm = l_sufm->scalar_value();
    }
    Node* l_fr = nullptr;
    if (weights.enable_fr_loss && !ex.triplets.empty()) {
        l_fr = objectives::fr_loss(g, fwd.states, ex.triplets, weights);
        out.fr = l_fr->scalar_value();
    }
    out.joint = objectives::joint_loss(g, l_g, l_sufm, l_fr, weights);
    return out;
}

}  // namespace detail

// Token-level perplexity of the generation loss alone, teacher-forced in
// eval mode. This is the quantity the decay/stop schedule watches.
inline double evaluate_perplexity(ParameterStore& store, const model::ModelConfig& config,
                                  const Vocabulary& vocab,
                                  const std::vector<PreparedExample>& data) {
    double total_nll = 0.0;
    std::size_t total_tokens = 0;
    for (const auto& ex : data) {
        Graph g;
        SourceEncoding src = corpus::encode_example(ex.example, vocab);
        TargetEncoding targets = encode_targets(ex.example.summary, vocab, src, config.use_copy);
        auto fwd = model::forward_teacher_forced(g, store, config, src, targets.input_ids,
                                                 vocab.size(), nullptr, false);
        total_nll += objectives::generation_loss(g, fwd.dists, targets.target_ids)
                         ->scalar_value();
        total_tokens += targets.target_ids.size();
    }
    if (total_tokens == 0) throw std::invalid_argument("evaluate_perplexity: no tokens");
    return std::exp(total_nll / static_cast<double>(total_tokens));
}

// Runs the full schedule and returns the checkpoint with the best validation
// perplexity. Bit-reproducible for a fixed (seed, config, data): parameter
// init, shuffles, and dropout masks all derive from TrainConfig::seed.
inline TrainResult fit(const std::vector<PreparedExample>& train_data,
                       const std::vector<PreparedExample>& valid_data,
                       const Vocabulary& vocab, const model::ModelConfig& model_config,
                       const LossWeights& weights, const TrainConfig& train_config,
                       const model::WordVectors* pretrained = nullptr,
                       std::ostream* log_stream = nullptr) {
    if (train_data.empty() || valid_data.empty()) {
        throw std::invalid_argument("fit: train and valid data must be non-empty");
    }
    model_config.validate();
    weights.validate();
    train_config.validate();

    ParameterStore store =
        model::init_parameters(model_config, vocab, train_config.seed, pretrained);
    AdamState adam;
    Rng dropout_rng(splitmix_of(train_config.seed, 0x9d2c5680ULL));
    PlateauPolicy plateau;
    double lr = train_config.learning_rate;

    TrainResult result;
    result.best.model = model_config;
    result.best.train = train_config;
    result.best.vocab_size = vocab.size();

    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);
    if (log_stream) write_log_header(*log_stream);

    for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
        seeded_shuffle(order, splitmix_of(train_config.seed, epoch));

        double sum_gen = 0.0, sum_sufm = 0.0, sum_fr = 0.0;
        std::size_t sum_tokens = 0;
        for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
            const std::size_t end = std::min(order.size(), start + train_config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                Graph g;
                auto losses = detail::example_loss(g, store, model_config, vocab,
                                                   train_data[order[k]], weights, &dropout_rng,
                                                   true);
                if (!std::isfinite(losses.joint->scalar_value())) {
                    throw std::runtime_error(
                        "fit: non-finite loss at epoch " + std::to_string(epoch) +
                        ", example " + train_data[order[k]].example.id);
                }
                sum_gen += losses.gen;
                sum_sufm += losses.sufm;
                sum_fr += losses.fr;
                sum_tokens += losses.target_tokens;
                g.backward(g.scale(losses.joint, inv_batch));
            }
            clip_gradients(store, train_config.max_grad_norm);
            adam_step(store, adam, lr, train_config.adam_beta1, train_config.adam_beta2,
                      train_config.adam_eps);
            store.zero_grads();
        }

        EpochLog row;
        row.epoch = epoch;
        row.learning_rate = lr;
        row.gen_loss = sum_gen / static_cast<double>(train_data.size());
        row.sufm_loss = sum_sufm / static_cast<double>(train_data.size());
        row.fr_loss = sum_fr / static_cast<double>(train_data.size());
        row.train_nll_per_token = sum_gen / static_cast<double>(sum_tokens);
        row.valid_perplexity = evaluate_perplexity(store, model_config, vocab, valid_data);
        result.log.push_back(row);
        if (log_stream) write_log_row(*log_stream, row);

        auto decision = plateau.update(row.valid_perplexity, train_config.patience_decay,
                                       train_config.patience_stop);
        if (decision.improved) {
            result.best.params = store.clone();
            result.best.epoch = epoch;
            result.best.valid_perplexity = row.valid_perplexity;
        }
        if (decision.stop) break;
        if (decision.decay) lr *= 0.5;
    }
    if (result.best.params.size() == 0) {
        // no epoch improved on infinity; keep the final parameters
        result.best.params = store.clone();
        result.best.epoch = result.log.size();
        result.best.valid_perplexity = result.log.empty()
                                           ? std::numeric_limits<double>::infinity()
                                           : result.log.back().valid_perplexity;
    }
    return result;
}

}  // namespace train
}  // namespace dialsum
