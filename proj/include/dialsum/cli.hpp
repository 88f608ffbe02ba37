#pragma once

// Command-line surface: preprocess, train, decode, evaluate, analyze.
// Options can come from a flat key=value config file (--config); explicit
// flags override config values. A data root directory may be supplied via
// --data-root or the DIALSUM_DATA_ROOT environment variable; relative input
// paths resolve against it.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dialsum/beam_search.hpp"
#include "dialsum/checkpoint.hpp"
#include "dialsum/corpus.hpp"
#include "dialsum/evaluation.hpp"
#include "dialsum/model.hpp"
#include "dialsum/objectives.hpp"
#include "dialsum/plot.hpp"
#include "dialsum/trainer.hpp"

namespace dialsum {
namespace cli {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string data_root;
    std::string out_dir = "out";

    std::string resolve(const std::string& path) const {
        if (path.empty() || data_root.empty() || fs::path(path).is_absolute()) return path;
        return (fs::path(data_root) / path).string();
    }
};

namespace detail {

inline std::string join_tokens(const corpus::TokenList& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

inline corpus::TokenList split_tokens(const std::string& text) {
    corpus::TokenList out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

// --- attention trace files ---------------------------------------------------
//
// Binary layout (little-endian): magic "DTRC", u32 version, u32 n_steps,
// u32 n_utterances, u32 source_len, then per step: n_utterances float32
// utterance scores, source_len float32 word scores, one float32 copy gate.

inline void save_trace(const std::string& path, const model::AttentionTrace& trace,
                       std::size_t n_utts, std::size_t src_len) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file " + path);
    out.write("DTRC", 4);
    train::detail::write_le<std::uint32_t>(out, 1);
    train::detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(trace.size()));
    train::detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n_utts));
    train::detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(src_len));
    for (const auto& step : trace) {
        if (step.utterance_scores.size() != n_utts || step.word_scores.size() != src_len) {
            throw std::runtime_error("trace rows have inconsistent widths");
        }
        for (double v : step.utterance_scores) {
            train::detail::write_f32(out, static_cast<float>(v));
        }
        for (double v : step.word_scores) train::detail::write_f32(out, static_cast<float>(v));
        train::detail::write_f32(out, static_cast<float>(step.copy_gate));
    }
}

inline std::pair<model::AttentionTrace, std::size_t> load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read trace file " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "DTRC") {
        throw std::runtime_error("bad trace file magic in " + path);
    }
    std::uint32_t version = train::detail::read_le<std::uint32_t>(in);
    if (version != 1) throw std::runtime_error("unsupported trace version in " + path);
    std::uint32_t n_steps = train::detail::read_le<std::uint32_t>(in);
    std::uint32_t n_utts = train::detail::read_le<std::uint32_t>(in);
    std::uint32_t src_len = train::detail::read_le<std::uint32_t>(in);
    model::AttentionTrace trace(n_steps);
    for (auto& step : trace) {
        step.utterance_scores.resize(n_utts);
        for (auto& v : step.utterance_scores) {
            v = static_cast<double>(train::detail::read_f32(in));
        }
        step.word_scores.resize(src_len);
        for (auto& v : step.word_scores) v = static_cast<double>(train::detail::read_f32(in));
        step.copy_gate = static_cast<double>(train::detail::read_f32(in));
    }
    return {std::move(trace), n_utts};
}

inline void write_flow_matrix_tsv(const std::string& path, const evaluation::FlowMatrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sentence";
    for (int b = 0; b < 10; ++b) {
        out << "\t[" << b / 10.0 << "," << (b + 1) / 10.0 << (b == 9 ? "]" : ")");
    }
    out << "\n";
    for (std::size_t r = 0; r < 3; ++r) {
        out << "S" << r + 1;
        for (double c : m.cells[r]) out << '\t' << c;
        out << "\n";
    }
}

struct SeedMetrics {
    std::string source;
    double rouge_1 = 0.0;
    double rouge_2 = 0.0;
    double rouge_l = 0.0;
    double fact_f1 = 0.0;
};

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// --- preprocess ------------------------------------------------------------------

struct PreprocessOptions {
    CommonOptions common;
    std::string train_path, valid_path, test_path;
    std::string input_path;  // single corpus for filter-and-split mode
    bool filter_split = false;
    std::vector<std::size_t> split_sizes = {0, 0, 0};
    std::uint64_t split_seed = 1;
    std::size_t min_dialogue_tokens = 15;
    std::size_t min_summary_tokens = 5;
    std::string stopwords_path = "data/stopwords.txt";
    std::string verbs_path = "data/verbs.txt";
    std::size_t vocab_size = 50000;
    std::size_t n_top = 2;
    double jaccard_threshold = 0.15;
    bool paper_literal_psu = false;
};

inline int run_preprocess(const PreprocessOptions& opt) {
    auto stopwords = corpus::load_token_set(opt.common.resolve(opt.stopwords_path));
    auto verbs = corpus::load_token_set(opt.common.resolve(opt.verbs_path));

    auto load_examples = [&](const std::string& path) {
        std::vector<corpus::DialogueExample> out;
        for (const auto& rec : corpus::load_raw_jsonl(opt.common.resolve(path))) {
            if (auto ex = corpus::to_example(rec)) out.push_back(std::move(*ex));
        }
        return out;
    };

    std::vector<corpus::DialogueExample> train, valid, test;
    if (opt.filter_split) {
        if (opt.input_path.empty()) {
            throw std::runtime_error("--filter-split requires --input");
        }
        auto all = load_examples(opt.input_path);
        if (all.empty()) throw std::runtime_error("empty corpus: " + opt.input_path);
        corpus::SplitSizes sizes{opt.split_sizes.at(0), opt.split_sizes.at(1),
                                 opt.split_sizes.at(2)};
        auto splits = corpus::filter_and_split(std::move(all), opt.split_seed, sizes,
                                               opt.min_dialogue_tokens, opt.min_summary_tokens);
        train = std::move(splits.train);
        valid = std::move(splits.valid);
        test = std::move(splits.test);
        std::cout << "filter-and-split kept " << train.size() + valid.size() + test.size()
                  << " examples\n";
    } else {
        if (opt.train_path.empty()) throw std::runtime_error("preprocess requires --train");
        train = load_examples(opt.train_path);
        if (!opt.valid_path.empty()) valid = load_examples(opt.valid_path);
        if (!opt.test_path.empty()) test = load_examples(opt.test_path);
    }
    if (train.empty()) throw std::runtime_error("empty corpus: no usable training examples");

    std::vector<corpus::TokenList> pooled;
    for (const auto& ex : train) {
        for (const auto& u : ex.utterances) pooled.push_back(u);
        pooled.push_back(ex.summary);
    }
    corpus::Vocabulary vocab = corpus::build_vocab(pooled, opt.vocab_size);

    fs::create_directories(opt.common.out_dir);
    vocab.save((fs::path(opt.common.out_dir) / "vocab.txt").string());

    auto prepare_split = [&](std::vector<corpus::DialogueExample>& examples,
                             const std::string& name) {
        if (examples.empty()) return;
        std::vector<corpus::PreparedExample> prepared;
        prepared.reserve(examples.size());
        for (auto& ex : examples) {
            prepared.push_back(corpus::prepare_example(std::move(ex), stopwords, verbs,
                                                       opt.n_top, opt.jaccard_threshold,
                                                       opt.paper_literal_psu));
        }
        std::string path = (fs::path(opt.common.out_dir) / (name + ".jsonl")).string();
        corpus::save_prepared_jsonl(path, prepared);
        std::cout << name << ": " << prepared.size() << " examples -> " << path << "\n";
    };
    prepare_split(train, "train");
    prepare_split(valid, "valid");
    prepare_split(test, "test");
    std::cout << "vocabulary: " << vocab.size() << " tokens\n";
    return 0;
}

// --- train ------------------------------------------------------------------------

struct TrainOptions {
    CommonOptions common;
    std::string train_path = "train.jsonl";
    std::string valid_path = "valid.jsonl";
    std::string vocab_path = "vocab.txt";
    std::string glove_path;
    model::ModelConfig model;
    objectives::LossWeights weights;
    train::TrainConfig trainer;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
};

inline int run_train(const TrainOptions& opt) {
    if (opt.seeds.empty()) throw std::runtime_error("train requires at least one --seed");
    auto train_data = corpus::load_prepared_jsonl(opt.common.resolve(opt.train_path));
    auto valid_data = corpus::load_prepared_jsonl(opt.common.resolve(opt.valid_path));
    auto vocab = corpus::Vocabulary::load(opt.common.resolve(opt.vocab_path));

    std::optional<model::WordVectors> glove;
    if (!opt.glove_path.empty()) {
        glove = model::load_word_vectors(opt.common.resolve(opt.glove_path));
    }

    fs::create_directories(opt.common.out_dir);
    for (std::uint64_t seed : opt.seeds) {
        train::TrainConfig tc = opt.trainer;
        tc.seed = seed;
        std::string log_path =
            (fs::path(opt.common.out_dir) / ("train_seed" + std::to_string(seed) + ".log"))
                .string();
        std::ofstream log(log_path);
        if (!log) throw std::runtime_error("cannot write " + log_path);
        train::TrainResult result = train::fit(train_data, valid_data, vocab, opt.model,
                                               opt.weights, tc,
                                               glove ? &*glove : nullptr, &log);
        std::string ckpt_path =
            (fs::path(opt.common.out_dir) / ("ckpt_seed" + std::to_string(seed) + ".bin"))
                .string();
        train::save_checkpoint(ckpt_path, result.best);
        std::cout << "seed " << seed << ": best epoch " << result.best.epoch
                  << ", valid perplexity " << result.best.valid_perplexity << " -> "
                  << ckpt_path << "\n";
    }
    return 0;
}

// --- decode ------------------------------------------------------------------------

struct DecodeOptions {
    CommonOptions common;
    std::string data_path = "test.jsonl";
    std::string vocab_path = "vocab.txt";
    std::string checkpoint_path;
    search::SearchConfig search;
    bool dump_traces = false;
    std::string output_name = "summaries.jsonl";
};

inline int run_decode(const DecodeOptions& opt) {
    if (opt.checkpoint_path.empty()) throw std::runtime_error("decode requires --checkpoint");
    auto data = corpus::load_prepared_jsonl(opt.common.resolve(opt.data_path));
    auto vocab = corpus::Vocabulary::load(opt.common.resolve(opt.vocab_path));
    train::Checkpoint ckpt = train::load_checkpoint(opt.common.resolve(opt.checkpoint_path));
    if (ckpt.vocab_size != vocab.size()) {
        throw std::runtime_error("decode: checkpoint vocabulary size does not match vocab file");
    }

    fs::create_directories(opt.common.out_dir);
    fs::path trace_dir = fs::path(opt.common.out_dir) / "traces";
    if (opt.dump_traces) fs::create_directories(trace_dir);

    std::string out_path = (fs::path(opt.common.out_dir) / opt.output_name).string();
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);

    for (const auto& prepared : data) {
        auto src = corpus::encode_example(prepared.example, vocab);
        search::ModelStepper stepper(ckpt.params, ckpt.model, vocab, src);
        search::SearchResult result = search::beam_search(stepper, opt.search);

        corpus::TokenList tokens;
        model::AttentionTrace trace;
        for (std::size_t i = 0; i < result.tokens.size(); ++i) {
            if (result.tokens[i] == vocab.end_id()) break;
            tokens.push_back(corpus::ext_token(src, vocab, result.tokens[i]));
            trace.push_back(result.trace[i]);
        }

        nlohmann::json rec;
        rec["id"] = prepared.example.id;
        rec["summary"] = detail::join_tokens(tokens);
        if (opt.dump_traces) {
            std::string trace_rel = "traces/" + prepared.example.id + ".trc";
            detail::save_trace((fs::path(opt.common.out_dir) / trace_rel).string(), trace,
                               src.num_utterances(), src.length());
            rec["trace_file"] = trace_rel;
        }
        out << rec.dump() << "\n";
    }
    std::cout << "decoded " << data.size() << " examples -> " << out_path << "\n";
    return 0;
}

// --- evaluate ------------------------------------------------------------------------

struct EvaluateOptions {
    CommonOptions common;
    std::vector<std::string> candidate_paths;
    std::string reference_path = "test.jsonl";
    std::string stopwords_path = "data/stopwords.txt";
    std::string verbs_path = "data/verbs.txt";
    bool stemming = true;
    std::string report_name = "evaluation";
};

inline int run_evaluate(const EvaluateOptions& opt) {
    if (opt.candidate_paths.empty()) {
        throw std::runtime_error("evaluate requires at least one --candidates file");
    }
    auto references = corpus::load_prepared_jsonl(opt.common.resolve(opt.reference_path));
    auto stopwords = corpus::load_token_set(opt.common.resolve(opt.stopwords_path));
    auto verbs = corpus::load_token_set(opt.common.resolve(opt.verbs_path));

    std::map<std::string, const corpus::PreparedExample*> by_id;
    for (const auto& r : references) by_id[r.example.id] = &r;

    std::vector<detail::SeedMetrics> rows;
    for (const auto& cand_path : opt.candidate_paths) {
        std::ifstream in(opt.common.resolve(cand_path));
        if (!in) throw std::runtime_error("cannot read candidates " + cand_path);
        double r1 = 0.0, r2 = 0.0, rl = 0.0;
        std::size_t n = 0;
        std::vector<std::vector<corpus::FactTriplet>> predicted, gold;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            const std::string id = j.at("id").get<std::string>();
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw std::runtime_error("evaluate: no reference for id " + id);
            }
            corpus::TokenList cand = detail::split_tokens(j.at("summary").get<std::string>());
            const corpus::TokenList& ref = it->second->example.summary;
            r1 += evaluation::rouge_n(cand, ref, 1, opt.stemming).f1;
            r2 += evaluation::rouge_n(cand, ref, 2, opt.stemming).f1;
            rl += evaluation::rouge_l(cand, ref, opt.stemming).f1;
            // predicted facts always come from the heuristic extractor
            predicted.push_back(corpus::extract_triplets_all(cand, verbs, stopwords));
            gold.push_back(it->second->triplets);
            ++n;
        }
        if (n == 0) throw std::runtime_error("evaluate: no candidates in " + cand_path);
        detail::SeedMetrics m;
        m.source = cand_path;
        m.rouge_1 = r1 / static_cast<double>(n);
        m.rouge_2 = r2 / static_cast<double>(n);
        m.rouge_l = rl / static_cast<double>(n);
        m.fact_f1 = evaluation::fact_match_f1(predicted, gold).f1;
        rows.push_back(m);
    }

    auto column = [&](auto member) {
        std::vector<double> xs;
        for (const auto& r : rows) xs.push_back(r.*member);
        return xs;
    };
    const std::vector<std::pair<const char*, double detail::SeedMetrics::*>> metrics = {
        {"rouge_1", &detail::SeedMetrics::rouge_1},
        {"rouge_2", &detail::SeedMetrics::rouge_2},
        {"rouge_l", &detail::SeedMetrics::rouge_l},
        {"fact_f1", &detail::SeedMetrics::fact_f1},
    };

    fs::create_directories(opt.common.out_dir);
    std::string tsv_path =
        (fs::path(opt.common.out_dir) / (opt.report_name + ".tsv")).string();
    std::ofstream tsv(tsv_path);
    tsv << "source\trouge_1\trouge_2\trouge_l\tfact_f1\n";
    for (const auto& r : rows) {
        tsv << r.source << '\t' << r.rouge_1 << '\t' << r.rouge_2 << '\t' << r.rouge_l << '\t'
            << r.fact_f1 << "\n";
    }
    nlohmann::json report;
    report["seeds"] = nlohmann::json::array();
    for (const auto& r : rows) {
        report["seeds"].push_back({{"source", r.source},
                                   {"rouge_1", r.rouge_1},
                                   {"rouge_2", r.rouge_2},
                                   {"rouge_l", r.rouge_l},
                                   {"fact_f1", r.fact_f1}});
    }
    for (const auto& [name, member] : metrics) {
        auto xs = column(member);
        report["mean"][name] = detail::mean_of(xs);
        report["std"][name] = detail::sample_std(xs);
        tsv << (std::string("mean_") + name) << '\t' << detail::mean_of(xs) << '\t'
            << detail::sample_std(xs) << "\n";
        std::cout << name << ": " << detail::mean_of(xs) << " +/- " << detail::sample_std(xs)
                  << "\n";
    }
    std::string json_path =
        (fs::path(opt.common.out_dir) / (opt.report_name + ".json")).string();
    std::ofstream jout(json_path);
    jout << report.dump(2) << "\n";
    return 0;
}

// --- analyze ------------------------------------------------------------------------

struct AnalyzeOptions {
    CommonOptions common;
    std::string data_path;     // prepared split for corpus stats + support flow
    std::string decoded_path;  // decoded summaries with trace files
    std::string stopwords_path = "data/stopwords.txt";
    std::size_t n_top = 2;
    double jaccard_threshold = 0.15;
};

inline int run_analyze(const AnalyzeOptions& opt) {
    if (opt.data_path.empty() && opt.decoded_path.empty()) {
        throw std::runtime_error("analyze needs --data and/or --decoded");
    }
    fs::create_directories(opt.common.out_dir);

    if (!opt.data_path.empty()) {
        auto data = corpus::load_prepared_jsonl(opt.common.resolve(opt.data_path));
        auto stopwords = corpus::load_token_set(opt.common.resolve(opt.stopwords_path));

        evaluation::CorpusStats stats = evaluation::corpus_stats(data);
        std::string stats_path = (fs::path(opt.common.out_dir) / "corpus_stats.tsv").string();
        std::ofstream sout(stats_path);
        sout << "count\tavg_utterances\tavg_dialogue_tokens\tavg_summary_tokens\t"
                "triplets_per_sentence\n";
        sout << stats.count << '\t' << stats.avg_utterances << '\t'
             << stats.avg_dialogue_tokens << '\t' << stats.avg_summary_tokens << '\t'
             << stats.triplets_per_sentence << "\n";
        std::cout << "corpus: " << stats.count << " examples, avg utterances "
                  << stats.avg_utterances << ", avg dialogue tokens "
                  << stats.avg_dialogue_tokens << ", avg summary tokens "
                  << stats.avg_summary_tokens << "\n";

        std::vector<corpus::DialogueExample> examples;
        examples.reserve(data.size());
        for (const auto& p : data) examples.push_back(p.example);
        evaluation::FlowMatrix flow = evaluation::flow_distribution_table(
            examples, stopwords, opt.n_top, opt.jaccard_threshold);
        detail::write_flow_matrix_tsv(
            (fs::path(opt.common.out_dir) / "support_flow.tsv").string(), flow);
        plot::write_flow_matrix_svg(
            (fs::path(opt.common.out_dir) / "support_flow.svg").string(), flow,
            "Supporting-utterance position distribution");
    }

    if (!opt.decoded_path.empty()) {
        std::string decoded_path = opt.common.resolve(opt.decoded_path);
        std::ifstream in(decoded_path);
        if (!in) throw std::runtime_error("cannot read decoded file " + decoded_path);
        fs::path base = fs::path(decoded_path).parent_path();
        std::vector<evaluation::DecodedExample> decoded;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            if (!j.contains("trace_file")) {
                throw std::runtime_error("analyze: decoded records need trace_file; "
                                         "run decode with --traces");
            }
            evaluation::DecodedExample d;
            d.summary = detail::split_tokens(j.at("summary").get<std::string>());
            auto [trace, n_utts] =
                detail::load_trace((base / j.at("trace_file").get<std::string>()).string());
            d.trace = std::move(trace);
            d.num_utterances = n_utts;
            decoded.push_back(std::move(d));
        }
        evaluation::FlowMatrix flow = evaluation::attention_flow_matrix(decoded);
        detail::write_flow_matrix_tsv(
            (fs::path(opt.common.out_dir) / "attention_flow.tsv").string(), flow);
        plot::write_flow_matrix_svg(
            (fs::path(opt.common.out_dir) / "attention_flow.svg").string(), flow,
            "Attention distribution over relative utterance position");
        std::cout << "attention flow over " << decoded.size() << " decoded examples\n";
    }
    return 0;
}

// --- top-level parser -------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"dialogue summarization with utterance-flow modeling and fact regularization",
                 "dialsum"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value configuration file");

    std::string data_root;
    app.add_option("--data-root", data_root, "base directory for relative data paths")
        ->envname("DIALSUM_DATA_ROOT");

    PreprocessOptions pre;
    auto* pre_cmd = app.add_subcommand("preprocess",
                                       "tokenize, build the vocabulary, align support");
    pre_cmd->add_option("--train", pre.train_path, "raw train JSONL");
    pre_cmd->add_option("--valid", pre.valid_path, "raw validation JSONL");
    pre_cmd->add_option("--test", pre.test_path, "raw test JSONL");
    pre_cmd->add_option("--input", pre.input_path, "single raw JSONL for --filter-split");
    pre_cmd->add_flag("--filter-split", pre.filter_split,
                      "drop short examples and split one corpus into train/valid/test");
    pre_cmd->add_option("--split-sizes", pre.split_sizes, "train valid test sizes")
        ->expected(3);
    pre_cmd->add_option("--split-seed", pre.split_seed, "shuffle seed for --filter-split");
    pre_cmd->add_option("--min-dialogue-tokens", pre.min_dialogue_tokens,
                        "filter threshold on dialogue tokens");
    pre_cmd->add_option("--min-summary-tokens", pre.min_summary_tokens,
                        "filter threshold on summary tokens");
    pre_cmd->add_option("--stopwords", pre.stopwords_path, "stop-word list file");
    pre_cmd->add_option("--verbs", pre.verbs_path, "verb lexicon file");
    pre_cmd->add_option("--vocab-size", pre.vocab_size, "maximum vocabulary size");
    pre_cmd->add_option("--n-top", pre.n_top, "supporting utterances per sentence");
    pre_cmd->add_option("--jaccard-threshold", pre.jaccard_threshold,
                        "similarity threshold for support selection");
    pre_cmd->add_flag("--paper-literal-psu", pre.paper_literal_psu,
                      "keep current supporting utterances inside the prior-support set");
    pre_cmd->add_option("--out", pre.common.out_dir, "output directory");

    TrainOptions tr;
    std::vector<std::uint64_t> seeds;
    auto* tr_cmd = app.add_subcommand("train", "train one model per seed");
    tr_cmd->add_option("--train", tr.train_path, "prepared train JSONL");
    tr_cmd->add_option("--valid", tr.valid_path, "prepared validation JSONL");
    tr_cmd->add_option("--vocab", tr.vocab_path, "vocabulary file");
    tr_cmd->add_option("--glove", tr.glove_path, "pretrained word-vector file");
    tr_cmd->add_option("--seed", seeds, "training seed (repeatable)");
    tr_cmd->add_option("--d", tr.model.d, "hidden size (even)");
    tr_cmd->add_option("--d-e", tr.model.d_e, "token embedding size");
    std::int64_t d_up = -1, d_sp = -1;
    tr_cmd->add_option("--d-up", d_up, "utterance-position embedding width (-1 = auto)");
    tr_cmd->add_option("--d-sp", d_sp, "summary-position embedding width (-1 = auto)");
    tr_cmd->add_option("--dropout", tr.model.dropout, "dropout ratio");
    tr_cmd->add_option("--max-utt-positions", tr.model.max_utt_positions,
                       "utterance position vocabulary");
    tr_cmd->add_option("--max-sum-positions", tr.model.max_sum_positions,
                       "summary position vocabulary");
    bool no_sufm_embedding = false, no_copy = false, ablate_sufm = false, ablate_fr = false;
    tr_cmd->add_flag("--no-sufm-embedding", no_sufm_embedding, "drop position embeddings");
    tr_cmd->add_flag("--no-copy", no_copy, "disable the copy mechanism");
    tr_cmd->add_flag("--ablate-sufm", ablate_sufm, "disable the utterance-flow loss");
    tr_cmd->add_flag("--ablate-fr", ablate_fr, "disable the fact-regularization loss");
    tr_cmd->add_option("--lambda1", tr.weights.lambda1, "flow focus weight");
    tr_cmd->add_option("--lambda2", tr.weights.lambda2, "flow ignore weight");
    tr_cmd->add_option("--lambda3", tr.weights.lambda3, "fact regularization weight");
    tr_cmd->add_option("--batch-size", tr.trainer.batch_size, "examples per update");
    tr_cmd->add_option("--lr", tr.trainer.learning_rate, "initial learning rate");
    tr_cmd->add_option("--max-grad-norm", tr.trainer.max_grad_norm, "gradient clip norm");
    tr_cmd->add_option("--epochs", tr.trainer.max_epochs, "maximum epochs");
    tr_cmd->add_option("--patience-decay", tr.trainer.patience_decay,
                       "stale epochs before halving the learning rate");
    tr_cmd->add_option("--patience-stop", tr.trainer.patience_stop,
                       "stale epochs before stopping");
    tr_cmd->add_option("--out", tr.common.out_dir, "output directory");

    DecodeOptions dec;
    auto* dec_cmd = app.add_subcommand("decode", "beam-search decode a prepared split");
    dec_cmd->add_option("--data", dec.data_path, "prepared JSONL to decode");
    dec_cmd->add_option("--vocab", dec.vocab_path, "vocabulary file");
    dec_cmd->add_option("--checkpoint", dec.checkpoint_path, "checkpoint file");
    dec_cmd->add_option("--beam", dec.search.beam, "beam size");
    dec_cmd->add_option("--min-len", dec.search.min_len, "minimum decode length");
    dec_cmd->add_option("--max-len", dec.search.max_len, "maximum decode length");
    dec_cmd->add_option("--alpha", dec.search.alpha, "length penalty exponent");
    dec_cmd->add_option("--beta", dec.search.beta, "coverage penalty weight");
    dec_cmd->add_flag("--coverage-per-step", dec.search.coverage_per_step,
                      "apply the coverage penalty during expansion");
    dec_cmd->add_flag("--traces", dec.dump_traces, "write attention trace files");
    dec_cmd->add_option("--output-name", dec.output_name, "summaries file name");
    dec_cmd->add_option("--out", dec.common.out_dir, "output directory");

    EvaluateOptions ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "score decoded summaries per seed");
    ev_cmd->add_option("--candidates", ev.candidate_paths,
                       "decoded summaries JSONL (repeatable, one per seed)");
    ev_cmd->add_option("--references", ev.reference_path, "prepared reference JSONL");
    ev_cmd->add_option("--stopwords", ev.stopwords_path, "stop-word list file");
    ev_cmd->add_option("--verbs", ev.verbs_path, "verb lexicon file");
    bool no_stemming = false;
    ev_cmd->add_flag("--no-stemming", no_stemming, "disable stemming inside the scorer");
    ev_cmd->add_option("--report-name", ev.report_name, "report file basename");
    ev_cmd->add_option("--out", ev.common.out_dir, "output directory");

    AnalyzeOptions an;
    auto* an_cmd = app.add_subcommand("analyze",
                                      "corpus statistics and flow matrices with plots");
    an_cmd->add_option("--data", an.data_path, "prepared JSONL for corpus-side analysis");
    an_cmd->add_option("--decoded", an.decoded_path, "decoded summaries with traces");
    an_cmd->add_option("--stopwords", an.stopwords_path, "stop-word list file");
    an_cmd->add_option("--n-top", an.n_top, "supporting utterances per sentence");
    an_cmd->add_option("--jaccard-threshold", an.jaccard_threshold,
                       "similarity threshold for support selection");
    an_cmd->add_option("--out", an.common.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*pre_cmd) {
            pre.common.data_root = data_root;
            return run_preprocess(pre);
        }
        if (*tr_cmd) {
            tr.common.data_root = data_root;
            if (!seeds.empty()) tr.seeds = seeds;
            if (d_up >= 0) tr.model.d_up = static_cast<std::size_t>(d_up);
            if (d_sp >= 0) tr.model.d_sp = static_cast<std::size_t>(d_sp);
            tr.model.use_sufm_embedding = !no_sufm_embedding;
            tr.model.use_copy = !no_copy;
            tr.weights.enable_sufm_loss = !ablate_sufm;
            tr.weights.enable_fr_loss = !ablate_fr;
            return run_train(tr);
        }
        if (*dec_cmd) {
            dec.common.data_root = data_root;
            return run_decode(dec);
        }
        if (*ev_cmd) {
            ev.common.data_root = data_root;
            ev.stemming = !no_stemming;
            return run_evaluate(ev);
        }
        if (*an_cmd) {
            an.common.data_root = data_root;
            return run_analyze(an);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace cli
}  // namespace dialsum
