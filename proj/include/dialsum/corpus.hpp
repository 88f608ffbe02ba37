#pragma once

// Dataset ingestion and preparation: tokenization, vocabulary construction,
// supporting-utterance selection, summary sentence segmentation, fact-triplet
// handling, and the filter/split procedure for building a corpus from raw
// dialogue-summary pairs.
//
// Datasets are line-delimited UTF-8 JSON records:
//   {"id": "...", "utterances": ["..."], "summary": "...",
//    "triplets": [["subj","verb","obj"], ...]}   (triplets optional)
// Stop-word and verb-lexicon files hold one token per line.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dialsum/tensor.hpp"

namespace dialsum {
namespace corpus {

using TokenList = std::vector<std::string>;
using TokenSet = std::unordered_set<std::string>;

struct FactTriplet {
    std::string subject;
    std::string verb;
    std::string object;
    std::size_t subject_pos = 0;  // token indices into the summary
    std::size_t verb_pos = 0;
    std::size_t object_pos = 0;
};

struct DialogueExample {
    std::string id;
    std::vector<TokenList> utterances;
    TokenList summary;
    std::vector<FactTriplet> gold_triplets;

    std::size_t dialogue_tokens() const {
        std::size_t n = 0;
        for (const auto& u : utterances) n += u.size();
        return n;
    }
};

// Half-open token span [begin, end) into a summary.
struct SentenceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct SentenceSupport {
    SentenceSpan span;
    std::vector<std::size_t> csu;  // supporting utterances, 1-based, ascending
    std::vector<std::size_t> psu;  // prior-support set, 1-based, ascending
};

struct SupportAlignment {
    std::vector<SentenceSupport> sentences;
};

// --- tokenization -----------------------------------------------------------

inline bool is_ascii_punct(char c) {
    static const std::string punct = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";
    return punct.find(c) != std::string::npos;
}

inline bool has_alnum(const std::string& tok) {
    for (unsigned char c : tok) {
        if (std::isalnum(c)) return true;
    }
    return false;
}

// Lowercases ASCII letters, splits on whitespace, then peels leading and
// trailing ASCII punctuation off each chunk as single-character tokens.
// Interior punctuation (contractions, hyphens) stays inside the token.
inline TokenList tokenize(const std::string& text) {
    TokenList out;
    std::string chunk;
    auto flush = [&]() {
        if (chunk.empty()) return;
        std::size_t b = 0, e = chunk.size();
        while (b < e && is_ascii_punct(chunk[b])) {
            out.push_back(std::string(1, chunk[b]));
            ++b;
        }
        std::vector<std::string> tail;
        while (e > b && is_ascii_punct(chunk[e - 1])) {
            tail.push_back(std::string(1, chunk[e - 1]));
            --e;
        }
        if (e > b) out.push_back(chunk.substr(b, e - b));
        out.insert(out.end(), tail.rbegin(), tail.rend());
        chunk.clear();
    };
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            flush();
        } else {
            chunk.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : raw);
        }
    }
    flush();
    return out;
}

// --- vocabulary ---------------------------------------------------------------

class Vocabulary {
  public:
    static constexpr const char* kPad = "<pad>";
    static constexpr const char* kUnk = "<unk>";
    static constexpr const char* kStart = "<s>";
    static constexpr const char* kEnd = "</s>";
    static constexpr const char* kSep = "<sep>";
    static constexpr std::size_t kNumSpecials = 5;

    Vocabulary() {
        for (const char* s : {kPad, kUnk, kStart, kEnd, kSep}) add(s);
    }

    std::int32_t pad_id() const { return 0; }
    std::int32_t unk_id() const { return 1; }
    std::int32_t start_id() const { return 2; }
    std::int32_t end_id() const { return 3; }
    std::int32_t sep_id() const { return 4; }

    std::size_t size() const { return tokens_.size(); }

    bool contains(const std::string& tok) const { return ids_.count(tok) > 0; }

    std::int32_t id_of(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? unk_id() : it->second;
    }

    const std::string& token_of(std::size_t id) const {
        if (id >= tokens_.size()) throw std::invalid_argument("Vocabulary: id out of range");
        return tokens_[id];
    }

    std::int32_t add(const std::string& tok) {
        auto it = ids_.find(tok);
        if (it != ids_.end()) return it->second;
        std::int32_t id = static_cast<std::int32_t>(tokens_.size());
        ids_.emplace(tok, id);
        tokens_.push_back(tok);
        return id;
    }

    static bool is_special_token(const std::string& tok) {
        return tok == kPad || tok == kUnk || tok == kStart || tok == kEnd || tok == kSep;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("Vocabulary: cannot write " + path);
        for (const auto& tok : tokens_) out << tok << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("Vocabulary: cannot read " + path);
        Vocabulary v;
        std::string line;
        std::size_t i = 0;
        while (std::getline(in, line)) {
            if (i < kNumSpecials) {
                if (line != v.tokens_[i]) {
                    throw std::runtime_error("Vocabulary: special token mismatch in " + path);
                }
            } else {
                v.add(line);
            }
            ++i;
        }
        if (i < kNumSpecials) throw std::runtime_error("Vocabulary: truncated file " + path);
        return v;
    }

  private:
    std::unordered_map<std::string, std::int32_t> ids_;
    std::vector<std::string> tokens_;
};

// Specials first, then corpus tokens by descending frequency (ties broken
// lexicographically), capped at max_size non-special entries. Dialogue and
// summary tokens are pooled by the caller.
inline Vocabulary build_vocab(const std::vector<TokenList>& token_lists,
                              std::size_t max_size = 50000) {
    std::map<std::string, std::size_t> freq;
    for (const auto& list : token_lists) {
        for (const auto& tok : list) {
            if (!Vocabulary::is_special_token(tok)) ++freq[tok];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    for (std::size_t i = 0; i < ranked.size() && i < max_size; ++i) v.add(ranked[i].first);
    return v;
}

// --- source encoding -----------------------------------------------------------

// The flattened dialogue: every utterance is followed by a separator token,
// utterance indices are 1-based, and ext_ids extend the vocabulary with
// source-only tokens so the copy mechanism can point at them.
struct SourceEncoding {
    std::vector<std::int32_t> token_ids;
    std::vector<std::size_t> utt_index;
    std::vector<std::int32_t> ext_ids;
    std::vector<std::string> ext_vocab;

    std::size_t length() const { return token_ids.size(); }
    std::size_t num_utterances() const { return utt_index.empty() ? 0 : utt_index.back(); }

    // Flat-token [begin, end) span of each utterance, separator included.
    std::vector<std::pair<std::size_t, std::size_t>> utterance_spans() const {
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        std::size_t start = 0;
        for (std::size_t j = 0; j < utt_index.size(); ++j) {
            if (j + 1 == utt_index.size() || utt_index[j + 1] != utt_index[j]) {
                spans.emplace_back(start, j + 1);
                start = j + 1;
            }
        }
        return spans;
    }
};

inline SourceEncoding encode_example(const DialogueExample& ex, const Vocabulary& vocab) {
    SourceEncoding enc;
    std::unordered_map<std::string, std::int32_t> ext_index;
    auto push = [&](const std::string& tok, std::size_t utt) {
        std::int32_t id = vocab.id_of(tok);
        enc.token_ids.push_back(id);
        enc.utt_index.push_back(utt);
        if (id != vocab.unk_id() || vocab.contains(tok)) {
            enc.ext_ids.push_back(id);
        } else {
            auto it = ext_index.find(tok);
            if (it == ext_index.end()) {
                it = ext_index
                         .emplace(tok, static_cast<std::int32_t>(vocab.size() +
                                                                 enc.ext_vocab.size()))
                         .first;
                enc.ext_vocab.push_back(tok);
            }
            enc.ext_ids.push_back(it->second);
        }
    };
    for (std::size_t i = 0; i < ex.utterances.size(); ++i) {
        for (const auto& tok : ex.utterances[i]) push(tok, i + 1);
        push(Vocabulary::kSep, i + 1);
    }
    return enc;
}

// Surface token of an extended id, given the vocabulary it was built against.
inline const std::string& ext_token(const SourceEncoding& enc, const Vocabulary& vocab,
                                    std::int32_t ext_id) {
    if (ext_id < static_cast<std::int32_t>(vocab.size())) return vocab.token_of(ext_id);
    std::size_t k = static_cast<std::size_t>(ext_id) - vocab.size();
    if (k >= enc.ext_vocab.size()) throw std::invalid_argument("ext_token: id out of range");
    return enc.ext_vocab[k];
}

// --- similarity and supporting utterances ---------------------------------------

inline double jaccard(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    const TokenSet& small = a.size() <= b.size() ? a : b;
    const TokenSet& large = a.size() <= b.size() ? b : a;
    std::size_t inter = 0;
    for (const auto& tok : small) inter += large.count(tok);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// Content tokens for similarity: stop-words and pure punctuation excluded.
inline TokenSet content_set(const TokenList& tokens, const TokenSet& stopwords,
                            std::size_t begin, std::size_t end) {
    TokenSet out;
    for (std::size_t i = begin; i < end; ++i) {
        if (!stopwords.count(tokens[i]) && has_alnum(tokens[i])) out.insert(tokens[i]);
    }
    return out;
}

inline TokenSet content_set(const TokenList& tokens, const TokenSet& stopwords) {
    return content_set(tokens, stopwords, 0, tokens.size());
}

// Ranks utterances by Jaccard similarity against the sentence (stop-words
// removed on both sides), keeps at most n_top with similarity >= threshold.
// Ties break toward the earlier utterance. Indices are 1-based, ascending.
inline std::vector<std::size_t> select_supporting_utterances(
    const TokenList& sentence_tokens, const DialogueExample& dialogue,
    const TokenSet& stopwords, std::size_t n_top = 2, double threshold = 0.15) {
    TokenSet sentence = content_set(sentence_tokens, stopwords);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(dialogue.utterances.size());
    for (std::size_t i = 0; i < dialogue.utterances.size(); ++i) {
        double sim = jaccard(sentence, content_set(dialogue.utterances[i], stopwords));
        scored.emplace_back(sim, i + 1);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> picked;
    for (const auto& [sim, idx] : scored) {
        if (picked.size() >= n_top || sim < threshold) break;
        picked.push_back(idx);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

// --- summary segmentation and fact triplets --------------------------------------

// Splits after sentence-final tokens "." "!" "?". A trailing run without a
// terminal token forms its own sentence; spans partition the summary.
inline std::vector<SentenceSpan> split_summary_sentences(const TokenList& summary) {
    std::vector<SentenceSpan> spans;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < summary.size(); ++i) {
        const std::string& tok = summary[i];
        if (tok == "." || tok == "!" || tok == "?") {
            spans.push_back({begin, i + 1});
            begin = i + 1;
        }
    }
    if (begin < summary.size()) spans.push_back({begin, summary.size()});
    return spans;
}

// Heuristic subject-verb-object extraction for one sentence span. The verb is
// the first token found in the lexicon; the subject (object) is the nearest
// preceding (following) token that is neither a stop-word nor pure
// punctuation. Emits nothing when any component is missing, and at most one
// triplet per sentence. Positions are global into the summary.
inline std::vector<FactTriplet> extract_triplets(const TokenList& summary,
                                                 const SentenceSpan& span,
                                                 const TokenSet& verb_lexicon,
                                                 const TokenSet& stopwords) {
    auto eligible = [&](std::size_t p) {
        return !stopwords.count(summary[p]) && has_alnum(summary[p]);
    };
    for (std::size_t v = span.begin; v < span.end; ++v) {
        if (!verb_lexicon.count(summary[v])) continue;
        std::optional<std::size_t> subj, obj;
        for (std::size_t p = v; p-- > span.begin;) {
            if (eligible(p)) {
                subj = p;
                break;
            }
        }
        for (std::size_t p = v + 1; p < span.end; ++p) {
            if (eligible(p)) {
                obj = p;
                break;
            }
        }
        if (!subj || !obj) return {};
        FactTriplet t;
        t.subject = summary[*subj];
        t.verb = summary[v];
        t.object = summary[*obj];
        t.subject_pos = *subj;
        t.verb_pos = v;
        t.object_pos = *obj;
        return {t};
    }
    return {};
}

inline std::vector<FactTriplet> extract_triplets_all(const TokenList& summary,
                                                     const TokenSet& verb_lexicon,
                                                     const TokenSet& stopwords) {
    std::vector<FactTriplet> out;
    for (const SentenceSpan& span : split_summary_sentences(summary)) {
        auto got = extract_triplets(summary, span, verb_lexicon, stopwords);
        out.insert(out.end(), got.begin(), got.end());
    }
    return out;
}

// --- support alignment -------------------------------------------------------------

// PSU_k defaults to (union of CSU_1..k-1) minus CSU_k so the two attention
// losses never fight over the same utterance; paper_literal_psu keeps the
// plain union.
inline SupportAlignment build_support_alignment(const DialogueExample& ex,
                                                const TokenSet& stopwords,
                                                std::size_t n_top = 2, double threshold = 0.15,
                                                bool paper_literal_psu = false) {
    SupportAlignment align;
    std::set<std::size_t> seen;
    for (const SentenceSpan& span : split_summary_sentences(ex.summary)) {
        TokenList sentence(ex.summary.begin() + span.begin, ex.summary.begin() + span.end);
        SentenceSupport s;
        s.span = span;
        s.csu = select_supporting_utterances(sentence, ex, stopwords, n_top, threshold);
        for (std::size_t u : seen) {
            if (paper_literal_psu ||
                !std::binary_search(s.csu.begin(), s.csu.end(), u)) {
                s.psu.push_back(u);
            }
        }
        seen.insert(s.csu.begin(), s.csu.end());
        align.sentences.push_back(std::move(s));
    }
    return align;
}

// --- filter and split ----------------------------------------------------------------

struct SplitSizes {
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
};

struct CorpusSplits {
    std::vector<DialogueExample> train;
    std::vector<DialogueExample> valid;
    std::vector<DialogueExample> test;
};

// Drops examples whose dialogue has fewer than min_dialogue_tokens tokens or
// whose summary has fewer than min_summary_tokens, shuffles with the seed,
// and cuts the three splits.
inline CorpusSplits filter_and_split(std::vector<DialogueExample> examples, std::uint64_t seed,
                                     const SplitSizes& sizes,
                                     std::size_t min_dialogue_tokens = 15,
                                     std::size_t min_summary_tokens = 5) {
    std::vector<DialogueExample> kept;
    for (auto& ex : examples) {
        if (ex.dialogue_tokens() >= min_dialogue_tokens &&
            ex.summary.size() >= min_summary_tokens) {
            kept.push_back(std::move(ex));
        }
    }
    if (sizes.train + sizes.valid + sizes.test > kept.size()) {
        throw std::invalid_argument("filter_and_split: split sizes exceed filtered count (" +
                                    std::to_string(kept.size()) + " available)");
    }
    seeded_shuffle(kept, seed);
    CorpusSplits out;
    auto it = kept.begin();
    out.train.assign(it, it + sizes.train);
    it += sizes.train;
    out.valid.assign(it, it + sizes.valid);
    it += sizes.valid;
    out.test.assign(it, it + sizes.test);
    return out;
}

// --- word list and dataset files ----------------------------------------------------

inline TokenSet load_token_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read token file " + path);
    TokenSet out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) out.insert(line);
    }
    return out;
}

struct RawRecord {
    std::string id;
    std::vector<std::string> utterances;
    std::string summary;
    std::vector<std::array<std::string, 3>> triplets;
};

inline std::vector<RawRecord> load_raw_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read dataset " + path);
    std::vector<RawRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " +
                                     e.what());
        }
        RawRecord r;
        r.id = j.value("id", "line" + std::to_string(lineno));
        if (!j.contains("utterances") || !j["utterances"].is_array()) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": missing utterances array");
        }
        for (const auto& u : j["utterances"]) r.utterances.push_back(u.get<std::string>());
        r.summary = j.value("summary", "");
        if (j.contains("triplets")) {
            for (const auto& t : j["triplets"]) {
                if (t.is_array() && t.size() == 3) {
                    r.triplets.push_back({t[0].get<std::string>(), t[1].get<std::string>(),
                                          t[2].get<std::string>()});
                }
            }
        }
        records.push_back(std::move(r));
    }
    return records;
}

inline void save_raw_jsonl(const std::string& path, const std::vector<RawRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset " + path);
    for (const auto& r : records) {
        nlohmann::json j;
        j["id"] = r.id;
        j["utterances"] = r.utterances;
        j["summary"] = r.summary;
        if (!r.triplets.empty()) {
            auto arr = nlohmann::json::array();
            for (const auto& t : r.triplets) arr.push_back({t[0], t[1], t[2]});
            j["triplets"] = arr;
        }
        out << j.dump() << "\n";
    }
}

// Recovers token positions for a gold surface triplet by an ordered scan:
// first occurrence of the subject, then of the verb after it, then of the
// object after the verb. Triplets that cannot be located are dropped.
inline std::optional<FactTriplet> locate_triplet(const TokenList& summary,
                                                 const std::array<std::string, 3>& surface) {
    auto find_from = [&](const std::string& tok, std::size_t from) -> std::optional<std::size_t> {
        for (std::size_t i = from; i < summary.size(); ++i) {
            if (summary[i] == tok) return i;
        }
        return std::nullopt;
    };
    TokenList sub = tokenize(surface[0]);
    TokenList verb = tokenize(surface[1]);
    TokenList obj = tokenize(surface[2]);
    if (sub.size() != 1 || verb.size() != 1 || obj.size() != 1) return std::nullopt;
    auto sp = find_from(sub[0], 0);
    if (!sp) return std::nullopt;
    auto vp = find_from(verb[0], *sp + 1);
    if (!vp) return std::nullopt;
    auto op = find_from(obj[0], *vp + 1);
    if (!op) return std::nullopt;
    FactTriplet t;
    t.subject = sub[0];
    t.verb = verb[0];
    t.object = obj[0];
    t.subject_pos = *sp;
    t.verb_pos = *vp;
    t.object_pos = *op;
    return t;
}

// Tokenizes a raw record. Utterances that tokenize to nothing are dropped;
// returns nullopt when no utterance or no summary token survives.
inline std::optional<DialogueExample> to_example(const RawRecord& record) {
    DialogueExample ex;
    ex.id = record.id;
    for (const auto& u : record.utterances) {
        TokenList toks = tokenize(u);
        if (!toks.empty()) ex.utterances.push_back(std::move(toks));
    }
    ex.summary = tokenize(record.summary);
    if (ex.utterances.empty() || ex.summary.empty()) return std::nullopt;
    for (const auto& surface : record.triplets) {
        if (auto t = locate_triplet(ex.summary, surface)) ex.gold_triplets.push_back(*t);
    }
    return ex;
}

// --- prepared records -----------------------------------------------------------------

// A training-ready example: tokenized text, supporting-utterance alignment,
// and fact triplets (gold ones when the data provides them, the heuristic
// extractor's output otherwise).
struct PreparedExample {
    DialogueExample example;
    SupportAlignment alignment;
    std::vector<FactTriplet> triplets;
};

inline PreparedExample prepare_example(DialogueExample ex, const TokenSet& stopwords,
                                       const TokenSet& verb_lexicon, std::size_t n_top = 2,
                                       double threshold = 0.15,
                                       bool paper_literal_psu = false) {
    PreparedExample p;
    p.alignment = build_support_alignment(ex, stopwords, n_top, threshold, paper_literal_psu);
    p.triplets = ex.gold_triplets.empty()
                     ? extract_triplets_all(ex.summary, verb_lexicon, stopwords)
                     : ex.gold_triplets;
    p.example = std::move(ex);
    return p;
}

inline void save_prepared_jsonl(const std::string& path,
                                const std::vector<PreparedExample>& examples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write prepared dataset " + path);
    for (const auto& p : examples) {
        nlohmann::json j;
        j["id"] = p.example.id;
        j["utterances"] = p.example.utterances;
        j["summary"] = p.example.summary;
        auto triplets = nlohmann::json::array();
        for (const auto& t : p.triplets) {
            triplets.push_back({{"subject", t.subject},
                                {"verb", t.verb},
                                {"object", t.object},
                                {"subject_pos", t.subject_pos},
                                {"verb_pos", t.verb_pos},
                                {"object_pos", t.object_pos}});
        }
        j["triplets"] = triplets;
        auto support = nlohmann::json::array();
        for (const auto& s : p.alignment.sentences) {
            support.push_back({{"begin", s.span.begin},
                               {"end", s.span.end},
                               {"csu", s.csu},
                               {"psu", s.psu}});
        }
        j["support"] = support;
        out << j.dump() << "\n";
    }
}

inline std::vector<PreparedExample> load_prepared_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read prepared dataset " + path);
    std::vector<PreparedExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " +
                                     e.what());
        }
        PreparedExample p;
        p.example.id = j.at("id").get<std::string>();
        p.example.utterances = j.at("utterances").get<std::vector<TokenList>>();
        p.example.summary = j.at("summary").get<TokenList>();
        for (const auto& t : j.at("triplets")) {
            FactTriplet f;
            f.subject = t.at("subject").get<std::string>();
            f.verb = t.at("verb").get<std::string>();
            f.object = t.at("object").get<std::string>();
            f.subject_pos = t.at("subject_pos").get<std::size_t>();
            f.verb_pos = t.at("verb_pos").get<std::size_t>();
            f.object_pos = t.at("object_pos").get<std::size_t>();
            p.triplets.push_back(std::move(f));
        }
        for (const auto& s : j.at("support")) {
            SentenceSupport sup;
            sup.span.begin = s.at("begin").get<std::size_t>();
            sup.span.end = s.at("end").get<std::size_t>();
            sup.csu = s.at("csu").get<std::vector<std::size_t>>();
            sup.psu = s.at("psu").get<std::vector<std::size_t>>();
            p.alignment.sentences.push_back(std::move(sup));
        }
        p.example.gold_triplets = p.triplets;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace corpus
}  // namespace dialsum
