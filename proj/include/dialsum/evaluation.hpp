#pragma once

// Evaluation and analysis: ROUGE-1/2/L with optional Porter stemming,
// micro-averaged fact-triplet matching, supporting-utterance flow tables,
// attention flow matrices over generated summaries, and corpus statistics.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dialsum/corpus.hpp"
#include "dialsum/model.hpp"

namespace dialsum {
namespace evaluation {

using corpus::DialogueExample;
using corpus::FactTriplet;
using corpus::PreparedExample;
using corpus::TokenList;
using corpus::TokenSet;

// --- Porter stemmer ---------------------------------------------------------
//
// The classic suffix-stripping algorithm (steps 1a through 5b). Words of two
// letters or fewer pass through unchanged.

namespace porter {

inline bool is_consonant(const std::string& w, std::size_t i) {
    switch (w[i]) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u':
            return false;
        case 'y':
            return i == 0 ? true : !is_consonant(w, i - 1);
        default:
            return true;
    }
}

// Number of VC sequences in [C](VC)^m[V] over w[0, len).
inline std::size_t measure(const std::string& w, std::size_t len) {
    std::size_t m = 0;
    std::size_t i = 0;
    while (i < len && is_consonant(w, i)) ++i;
    while (i < len) {
        while (i < len && !is_consonant(w, i)) ++i;
        if (i == len) break;
        ++m;
        while (i < len && is_consonant(w, i)) ++i;
    }
    return m;
}

inline bool has_vowel(const std::string& w, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
        if (!is_consonant(w, i)) return true;
    }
    return false;
}

inline bool double_consonant(const std::string& w) {
    std::size_t n = w.size();
    return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// ends consonant-vowel-consonant where the final consonant is not w, x or y
inline bool cvc(const std::string& w) {
    std::size_t n = w.size();
    if (n < 3) return false;
    if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) {
        return false;
    }
    char c = w[n - 1];
    return c != 'w' && c != 'x' && c != 'y';
}

inline bool ends_with(const std::string& w, const char* suffix) {
    std::size_t n = std::string::traits_type::length(suffix);
    return w.size() >= n && w.compare(w.size() - n, n, suffix) == 0;
}

// Replace `suffix` by `repl` when the remaining stem has measure > threshold.
inline bool replace_if(std::string& w, const char* suffix, const char* repl,
                       std::size_t min_measure) {
    if (!ends_with(w, suffix)) return false;
    std::size_t stem_len = w.size() - std::string::traits_type::length(suffix);
    if (measure(w, stem_len) < min_measure) return true;  // matched, rule blocked
    w = w.substr(0, stem_len) + repl;
    return true;
}

inline std::string stem(std::string w) {
    if (w.size() <= 2) return w;
    for (char c : w) {
        if (c < 'a' || c > 'z') return w;  // only plain lowercase words
    }

    // step 1a
    if (ends_with(w, "sses")) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "ies")) {
        w.resize(w.size() - 2);
    } else if (!ends_with(w, "ss") && ends_with(w, "s")) {
        w.resize(w.size() - 1);
    }

    // step 1b
    bool fired = false;
    if (ends_with(w, "eed")) {
        if (measure(w, w.size() - 3) > 0) w.resize(w.size() - 1);
    } else if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
        w.resize(w.size() - 2);
        fired = true;
    } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
        w.resize(w.size() - 3);
        fired = true;
    }
    if (fired) {
        if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
            w += 'e';
        } else if (double_consonant(w) && !ends_with(w, "l") && !ends_with(w, "s") &&
                   !ends_with(w, "z")) {
            w.resize(w.size() - 1);
        } else if (measure(w, w.size()) == 1 && cvc(w)) {
            w += 'e';
        }
    }

    // step 1c
    if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';

    // step 2
    static const std::pair<const char*, const char*> step2[] = {
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
    };
    for (const auto& [suffix, repl] : step2) {
        if (replace_if(w, suffix, repl, 1)) break;
    }

    // step 3
    static const std::pair<const char*, const char*> step3[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    };
    for (const auto& [suffix, repl] : step3) {
        if (replace_if(w, suffix, repl, 1)) break;
    }

    // step 4
    static const char* step4[] = {"al",  "ance", "ence", "er",  "ic",  "able", "ible",
                                  "ant", "ement", "ment", "ent", "ou",  "ism",  "ate",
                                  "iti", "ous",  "ive",  "ize"};
    bool removed = false;
    for (const char* suffix : step4) {
        if (ends_with(w, suffix)) {
            std::size_t stem_len = w.size() - std::string::traits_type::length(suffix);
            if (measure(w, stem_len) > 1) {
                w.resize(stem_len);
                removed = true;
            }
            break;
        }
    }
    if (!removed && ends_with(w, "ion")) {
        std::size_t stem_len = w.size() - 3;
        if (stem_len > 0 && (w[stem_len - 1] == 's' || w[stem_len - 1] == 't') &&
            measure(w, stem_len) > 1) {
            w.resize(stem_len);
        }
    }

    // step 5a
    if (ends_with(w, "e")) {
        std::size_t m = measure(w, w.size() - 1);
        if (m > 1 || (m == 1 && !cvc(w.substr(0, w.size() - 1)))) w.resize(w.size() - 1);
    }
    // step 5b
    if (measure(w, w.size()) > 1 && double_consonant(w) && ends_with(w, "l")) {
        w.resize(w.size() - 1);
    }
    return w;
}

}  // namespace porter

inline TokenList stem_tokens(const TokenList& tokens) {
    TokenList out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(porter::stem(t));
    return out;
}

// --- ROUGE ------------------------------------------------------------------

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

inline RougeScore from_counts(double overlap, double cand_total, double ref_total) {
    RougeScore s;
    s.precision = cand_total > 0.0 ? overlap / cand_total : 0.0;
    s.recall = ref_total > 0.0 ? overlap / ref_total : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

}  // namespace detail

// Clipped n-gram overlap. Stemming, when enabled, applies to both sides.
inline RougeScore rouge_n(const TokenList& candidate, const TokenList& reference,
                          std::size_t n, bool stemming = true) {
    if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
    const TokenList cand = stemming ? stem_tokens(candidate) : candidate;
    const TokenList ref = stemming ? stem_tokens(reference) : reference;

    auto ngrams = [n](const TokenList& tokens) {
        std::map<std::vector<std::string>, std::size_t> counts;
        if (tokens.size() >= n) {
            for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
                counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)]++;
            }
        }
        return counts;
    };
    auto cand_counts = ngrams(cand);
    auto ref_counts = ngrams(ref);

    std::size_t overlap = 0, cand_total = 0, ref_total = 0;
    for (const auto& [gram, count] : cand_counts) {
        cand_total += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) overlap += std::min(count, it->second);
    }
    for (const auto& [gram, count] : ref_counts) ref_total += count;
    return detail::from_counts(static_cast<double>(overlap), static_cast<double>(cand_total),
                               static_cast<double>(ref_total));
}

// LCS over the whole token sequences.
inline RougeScore rouge_l(const TokenList& candidate, const TokenList& reference,
                          bool stemming = true) {
    const TokenList cand = stemming ? stem_tokens(candidate) : candidate;
    const TokenList ref = stemming ? stem_tokens(reference) : reference;
    if (cand.empty() || ref.empty()) return {};

    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            cur[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1
                                               : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[ref.size()]);
    return detail::from_counts(lcs, static_cast<double>(cand.size()),
                               static_cast<double>(ref.size()));
}

// --- fact triplet matching ------------------------------------------------------

namespace detail {

inline std::string lower_ascii(std::string s) {
    for (char& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
}

// Two triplets match when at least two of their three components are equal.
inline bool triplets_match(const FactTriplet& a, const FactTriplet& b) {
    int overlap = 0;
    overlap += lower_ascii(a.subject) == lower_ascii(b.subject);
    overlap += lower_ascii(a.verb) == lower_ascii(b.verb);
    overlap += lower_ascii(a.object) == lower_ascii(b.object);
    return overlap >= 2;
}

}  // namespace detail

struct FactMatchScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

// Within each example, predictions are matched greedily in prediction order
// and each gold triplet is consumed at most once; counts are micro-averaged
// over the corpus.
inline FactMatchScore fact_match_f1(
    const std::vector<std::vector<FactTriplet>>& predicted,
    const std::vector<std::vector<FactTriplet>>& gold) {
    if (predicted.size() != gold.size()) {
        throw std::invalid_argument("fact_match_f1: example counts differ");
    }
    FactMatchScore out;
    for (std::size_t e = 0; e < predicted.size(); ++e) {
        std::vector<bool> used(gold[e].size(), false);
        for (const auto& p : predicted[e]) {
            bool matched = false;
            for (std::size_t k = 0; k < gold[e].size(); ++k) {
                if (!used[k] && detail::triplets_match(p, gold[e][k])) {
                    used[k] = true;
                    matched = true;
                    break;
                }
            }
            matched ? ++out.true_positives : ++out.false_positives;
        }
        for (bool u : used) {
            if (!u) ++out.false_negatives;
        }
    }
    const double tp = static_cast<double>(out.true_positives);
    out.precision = tp + out.false_positives > 0 ? tp / (tp + out.false_positives) : 0.0;
    out.recall = tp + out.false_negatives > 0 ? tp / (tp + out.false_negatives) : 0.0;
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

// --- flow matrices ----------------------------------------------------------------

// Rows S1..S3 over ten relative-position buckets [0.0,0.1) .. [0.9,1.0].
struct FlowMatrix {
    std::array<std::array<double, 10>, 3> cells{};
    std::array<double, 3> row_mass{};  // pre-normalization totals

    void add(std::size_t row, double relative_position, double mass) {
        std::size_t bucket = std::min<std::size_t>(
            9, static_cast<std::size_t>(relative_position * 10.0));
        cells[row][bucket] += mass;
        row_mass[row] += mass;
    }

    void normalize() {
        for (std::size_t r = 0; r < 3; ++r) {
            if (row_mass[r] <= 0.0) continue;
            for (double& c : cells[r]) c /= row_mass[r];
        }
    }
};

// Relative position of utterance i (1-based) among L utterances: (i-1)/L,
// which puts the first utterance in bucket [0.0, 0.1).
inline double relative_position(std::size_t utterance, std::size_t total) {
    return static_cast<double>(utterance - 1) / static_cast<double>(total);
}

// Where do the supporting utterances of the first three summary sentences
// sit, relative to dialogue length? One count per supporting utterance.
inline FlowMatrix flow_distribution_table(const std::vector<DialogueExample>& examples,
                                          const TokenSet& stopwords, std::size_t n_top = 2,
                                          double threshold = 0.15) {
    FlowMatrix m;
    for (const auto& ex : examples) {
        auto align = corpus::build_support_alignment(ex, stopwords, n_top, threshold);
        const std::size_t rows = std::min<std::size_t>(3, align.sentences.size());
        for (std::size_t k = 0; k < rows; ++k) {
            for (std::size_t u : align.sentences[k].csu) {
                m.add(k, relative_position(u, ex.utterances.size()), 1.0);
            }
        }
    }
    m.normalize();
    return m;
}

struct DecodedExample {
    TokenList summary;            // generated tokens, end token stripped
    model::AttentionTrace trace;  // one row per generated token, prefix ok
    std::size_t num_utterances = 0;
};

// Average utterance-level attention per generated summary sentence, bucketed
// by relative utterance position and averaged over the corpus.
inline FlowMatrix attention_flow_matrix(const std::vector<DecodedExample>& decoded) {
    FlowMatrix m;
    for (const auto& d : decoded) {
        if (d.trace.size() < d.summary.size()) {
            throw std::invalid_argument("attention_flow_matrix: trace shorter than summary");
        }
        if (d.num_utterances == 0) continue;
        auto spans = corpus::split_summary_sentences(d.summary);
        const std::size_t rows = std::min<std::size_t>(3, spans.size());
        for (std::size_t k = 0; k < rows; ++k) {
            std::vector<double> mean(d.num_utterances, 0.0);
            const double inv = 1.0 / static_cast<double>(spans[k].end - spans[k].begin);
            for (std::size_t t = spans[k].begin; t < spans[k].end; ++t) {
                for (std::size_t i = 0; i < d.num_utterances; ++i) {
                    mean[i] += d.trace[t].utterance_scores[i] * inv;
                }
            }
            for (std::size_t i = 0; i < d.num_utterances; ++i) {
                m.add(k, relative_position(i + 1, d.num_utterances), mean[i]);
            }
        }
    }
    m.normalize();
    return m;
}

// --- corpus statistics --------------------------------------------------------------

struct CorpusStats {
    std::size_t count = 0;
    double avg_utterances = 0.0;
    double avg_dialogue_tokens = 0.0;  // separators excluded
    double avg_summary_tokens = 0.0;
    double triplets_per_sentence = 0.0;
};

inline CorpusStats corpus_stats(const std::vector<PreparedExample>& examples) {
    CorpusStats s;
    s.count = examples.size();
    if (examples.empty()) return s;
    double utts = 0.0, dtoks = 0.0, stoks = 0.0, triplets = 0.0, sentences = 0.0;
    for (const auto& p : examples) {
        utts += static_cast<double>(p.example.utterances.size());
        dtoks += static_cast<double>(p.example.dialogue_tokens());
        stoks += static_cast<double>(p.example.summary.size());
        triplets += static_cast<double>(p.triplets.size());
        sentences += static_cast<double>(
            corpus::split_summary_sentences(p.example.summary).size());
    }
    const double n = static_cast<double>(s.count);
    s.avg_utterances = utts / n;
    s.avg_dialogue_tokens = dtoks / n;
    s.avg_summary_tokens = stoks / n;
    s.triplets_per_sentence = sentences > 0.0 ? triplets / sentences : 0.0;
    return s;
}

}  // namespace evaluation
}  // namespace dialsum
