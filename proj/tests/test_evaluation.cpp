#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>

#include "dialsum/evaluation.hpp"
#include "dialsum/plot.hpp"

using namespace dialsum;
using namespace dialsum::corpus;
using namespace dialsum::evaluation;

namespace {

FactTriplet triplet(const std::string& s, const std::string& v, const std::string& o) {
    FactTriplet t;
    t.subject = s;
    t.verb = v;
    t.object = o;
    return t;
}

// independent counting oracle for unstemmed ROUGE-N
RougeScore rouge_n_oracle(const TokenList& cand, const TokenList& ref, std::size_t n) {
    auto grams = [n](const TokenList& t) {
        std::map<std::string, std::size_t> g;
        for (std::size_t i = 0; i + n <= t.size(); ++i) {
            std::string key;
            for (std::size_t k = 0; k < n; ++k) key += t[i + k] + "\x1f";
            g[key]++;
        }
        return g;
    };
    auto cg = grams(cand), rg = grams(ref);
    double overlap = 0, ct = 0, rt = 0;
    for (auto& [k, c] : cg) {
        ct += c;
        if (rg.count(k)) overlap += std::min(c, rg[k]);
    }
    for (auto& [k, c] : rg) rt += c;
    RougeScore s;
    s.precision = ct > 0 ? overlap / ct : 0;
    s.recall = rt > 0 ? overlap / rt : 0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall)
                                      : 0;
    return s;
}

// brute-force LCS by recursion with memoization on small sequences
std::size_t lcs_oracle(const TokenList& a, const TokenList& b, std::size_t i, std::size_t j,
                       std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::size_t best;
    if (a[i] == b[j]) {
        best = 1 + lcs_oracle(a, b, i + 1, j + 1, memo);
    } else {
        best = std::max(lcs_oracle(a, b, i + 1, j, memo), lcs_oracle(a, b, i, j + 1, memo));
    }
    memo[key] = best;
    return best;
}

}  // namespace

TEST_CASE("porter stemmer classic cases") {
    CHECK(porter::stem("caresses") == "caress");
    CHECK(porter::stem("ponies") == "poni");
    CHECK(porter::stem("caress") == "caress");
    CHECK(porter::stem("cats") == "cat");
    CHECK(porter::stem("agreed") == "agre");
    CHECK(porter::stem("plastered") == "plaster");
    CHECK(porter::stem("motoring") == "motor");
    CHECK(porter::stem("sing") == "sing");
    CHECK(porter::stem("hopping") == "hop");
    CHECK(porter::stem("falling") == "fall");
    CHECK(porter::stem("filing") == "file");
    CHECK(porter::stem("happy") == "happi");
    CHECK(porter::stem("relational") == "relat");
    CHECK(porter::stem("conditional") == "condit");
    CHECK(porter::stem("triplicate") == "triplic");
    CHECK(porter::stem("hopeful") == "hope");
    CHECK(porter::stem("goodness") == "good");
    CHECK(porter::stem("revival") == "reviv");
    CHECK(porter::stem("adjustment") == "adjust");
    CHECK(porter::stem("adoption") == "adopt");
    CHECK(porter::stem("probate") == "probat");
    CHECK(porter::stem("rate") == "rate");
    CHECK(porter::stem("controller") == "control");
    CHECK(porter::stem("by") == "by");          // too short
    CHECK(porter::stem("don't") == "don't");    // non-alphabetic passthrough
}

TEST_CASE("rouge_n worked examples") {
    TokenList same = {"the", "cat", "sat"};
    CHECK(rouge_n(same, same, 1, false).f1 == Catch::Approx(1.0));
    CHECK(rouge_n({}, same, 1, false).f1 == 0.0);

    RougeScore s = rouge_n({"the", "cat", "sat"}, {"the", "cat", "slept"}, 1, false);
    CHECK(s.precision == Catch::Approx(2.0 / 3.0));
    CHECK(s.recall == Catch::Approx(2.0 / 3.0));
    CHECK(s.f1 == Catch::Approx(2.0 / 3.0));

    // clipping: a repeated candidate token only counts up to its reference count
    RougeScore clipped = rouge_n({"a", "a", "a"}, {"a", "b"}, 1, false);
    CHECK(clipped.precision == Catch::Approx(1.0 / 3.0));
    CHECK(clipped.recall == Catch::Approx(0.5));

    CHECK_THROWS_AS(rouge_n(same, same, 0, false), std::invalid_argument);
}

TEST_CASE("rouge_l worked examples") {
    TokenList same = {"a", "b", "c"};
    CHECK(rouge_l(same, same, false).f1 == Catch::Approx(1.0));

    RougeScore s = rouge_l({"a", "b", "c", "d"}, {"a", "c", "d"}, false);
    CHECK(s.precision == Catch::Approx(0.75));
    CHECK(s.recall == Catch::Approx(1.0));
    CHECK(s.f1 == Catch::Approx(6.0 / 7.0));

    CHECK(rouge_l({"x", "y"}, {"p", "q"}, false).f1 == 0.0);
}

TEST_CASE("rouge matches independent oracles on random pairs") {
    Rng rng(31337);
    std::vector<std::string> pool = {"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 100; ++trial) {
        TokenList cand, ref;
        std::size_t cl = 1 + rng.next_index(10), rl = 1 + rng.next_index(10);
        for (std::size_t i = 0; i < cl; ++i) cand.push_back(pool[rng.next_index(pool.size())]);
        for (std::size_t i = 0; i < rl; ++i) ref.push_back(pool[rng.next_index(pool.size())]);

        for (std::size_t n : {1, 2}) {
            RougeScore got = rouge_n(cand, ref, n, false);
            RougeScore expect = rouge_n_oracle(cand, ref, n);
            CHECK(got.precision == Catch::Approx(expect.precision).margin(1e-12));
            CHECK(got.recall == Catch::Approx(expect.recall).margin(1e-12));
            CHECK(got.f1 == Catch::Approx(expect.f1).margin(1e-12));
        }
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
        double lcs = static_cast<double>(lcs_oracle(cand, ref, 0, 0, memo));
        RougeScore got = rouge_l(cand, ref, false);
        CHECK(got.precision == Catch::Approx(lcs / cand.size()).margin(1e-12));
        CHECK(got.recall == Catch::Approx(lcs / ref.size()).margin(1e-12));
    }
}

TEST_CASE("rouge is symmetric in precision and recall under swapping") {
    Rng rng(8);
    std::vector<std::string> pool = {"a", "b", "c"};
    for (int trial = 0; trial < 20; ++trial) {
        TokenList x, y;
        for (std::size_t i = 0; i < 4 + rng.next_index(4); ++i) {
            x.push_back(pool[rng.next_index(pool.size())]);
        }
        for (std::size_t i = 0; i < 4 + rng.next_index(4); ++i) {
            y.push_back(pool[rng.next_index(pool.size())]);
        }
        RougeScore ab = rouge_n(x, y, 1, false), ba = rouge_n(y, x, 1, false);
        CHECK(ab.precision == Catch::Approx(ba.recall).margin(1e-12));
        CHECK(ab.recall == Catch::Approx(ba.precision).margin(1e-12));
        CHECK(ab.f1 == Catch::Approx(ba.f1).margin(1e-12));
        RougeScore lab = rouge_l(x, y, false), lba = rouge_l(y, x, false);
        CHECK(lab.f1 == Catch::Approx(lba.f1).margin(1e-12));
    }
}

TEST_CASE("fact_match_f1 worked examples") {
    // two overlapping components count as a match
    auto s1 = fact_match_f1({{triplet("tom", "buy", "car")}},
                            {{triplet("tom", "buy", "bike")}});
    CHECK(s1.f1 == Catch::Approx(1.0));

    auto s2 = fact_match_f1({{triplet("tom", "buy", "car")}},
                            {{triplet("ann", "sell", "bike")}});
    CHECK(s2.f1 == 0.0);

    auto s3 = fact_match_f1({{triplet("a", "b", "c"), triplet("d", "e", "f")}},
                            {{triplet("a", "b", "x")}});
    CHECK(s3.precision == Catch::Approx(0.5));
    CHECK(s3.recall == Catch::Approx(1.0));
    CHECK(s3.f1 == Catch::Approx(2.0 / 3.0));

    // case-insensitive comparison
    auto s4 = fact_match_f1({{triplet("Tom", "Buy", "car")}},
                            {{triplet("tom", "buy", "bike")}});
    CHECK(s4.f1 == Catch::Approx(1.0));
}

TEST_CASE("fact_match_f1 greedy equals optimal when at most two per side") {
    Rng rng(606);
    std::vector<std::string> pool = {"p", "q", "r", "s"};
    auto rand_triplet = [&]() {
        return triplet(pool[rng.next_index(4)], pool[rng.next_index(4)],
                       pool[rng.next_index(4)]);
    };
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<FactTriplet> pred, gold;
        for (std::size_t i = 0; i < 1 + rng.next_index(2); ++i) pred.push_back(rand_triplet());
        for (std::size_t i = 0; i < 1 + rng.next_index(2); ++i) gold.push_back(rand_triplet());

        auto got = fact_match_f1({pred}, {gold});

        // exhaustive optimal one-to-one matching
        auto match = [](const FactTriplet& a, const FactTriplet& b) {
            int o = 0;
            o += a.subject == b.subject;
            o += a.verb == b.verb;
            o += a.object == b.object;
            return o >= 2;
        };
        std::size_t best_tp = 0;
        std::vector<std::size_t> perm(gold.size());
        std::iota(perm.begin(), perm.end(), 0);
        // try all assignments of predictions to distinct gold slots (n <= 2)
        do {
            std::size_t tp = 0;
            for (std::size_t i = 0; i < std::min(pred.size(), perm.size()); ++i) {
                if (match(pred[i], gold[perm[i]])) ++tp;
            }
            best_tp = std::max(best_tp, tp);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (pred.size() == 2 && gold.size() == 1) {
            // also allow the second prediction to claim the only gold
            best_tp = std::max<std::size_t>(
                best_tp, match(pred[1], gold[0]) || match(pred[0], gold[0]) ? 1 : 0);
        }
        CHECK(got.true_positives == best_tp);
    }
}

TEST_CASE("flow_distribution_table buckets supporting utterances") {
    TokenSet stop;
    // every supporting utterance is the first of twenty -> bucket [0.0, 0.1)
    std::vector<DialogueExample> uniform_first;
    for (int i = 0; i < 5; ++i) {
        DialogueExample ex;
        ex.id = std::to_string(i);
        ex.utterances.push_back({"alpha", "beta", "gamma"});
        for (int u = 1; u < 20; ++u) ex.utterances.push_back({"zz" + std::to_string(u)});
        ex.summary = {"alpha", "beta", "gamma", "."};
        uniform_first.push_back(ex);
    }
    FlowMatrix m = flow_distribution_table(uniform_first, stop);
    CHECK(m.cells[0][0] == Catch::Approx(1.0));
    CHECK(m.row_mass[1] == 0.0);  // only one summary sentence

    // supporting utterances at relative positions 0.05 and 0.55
    DialogueExample two;
    two.id = "two";
    for (int u = 0; u < 20; ++u) two.utterances.push_back({"pad" + std::to_string(u)});
    two.utterances[1] = {"alpha", "beta"};     // utterance 2 of 20: rel 0.05
    two.utterances[11] = {"gamma", "delta"};   // utterance 12 of 20: rel 0.55
    two.summary = {"alpha", "beta", ".", "gamma", "delta", "."};
    FlowMatrix m2 = flow_distribution_table({two}, stop);
    CHECK(m2.cells[0][0] == Catch::Approx(1.0));  // bucket 1 for S1
    CHECK(m2.cells[1][5] == Catch::Approx(1.0));  // bucket 6 for S2
}

TEST_CASE("attention_flow_matrix buckets utterance attention") {
    // uniform attention over 10 utterances: every bucket gets 0.1
    DecodedExample uniform;
    uniform.summary = {"a", "b", "."};
    uniform.num_utterances = 10;
    model::AttentionStep step;
    step.utterance_scores.assign(10, 0.1);
    uniform.trace = {step, step, step};
    FlowMatrix m = attention_flow_matrix({uniform});
    for (std::size_t b = 0; b < 10; ++b) {
        CHECK(m.cells[0][b] == Catch::Approx(0.1).margin(1e-12));
    }

    // single-utterance dialogue: all mass in bucket [0.0, 0.1)
    DecodedExample single;
    single.summary = {"a", "."};
    single.num_utterances = 1;
    model::AttentionStep one;
    one.utterance_scores = {1.0};
    single.trace = {one, one};
    FlowMatrix ms = attention_flow_matrix({single});
    CHECK(ms.cells[0][0] == Catch::Approx(1.0));

    // mass 0.7 on utterance 2 of 4 (rel 0.25 -> bucket 3) and 0.3 on
    // utterance 4 (rel 0.75 -> bucket 8)
    DecodedExample skewed;
    skewed.summary = {"x", "."};
    skewed.num_utterances = 4;
    model::AttentionStep srow;
    srow.utterance_scores = {0.0, 0.7, 0.0, 0.3};
    skewed.trace = {srow, srow};
    FlowMatrix mk = attention_flow_matrix({skewed});
    CHECK(mk.cells[0][2] == Catch::Approx(0.7));
    CHECK(mk.cells[0][7] == Catch::Approx(0.3));

    // rows with mass sum to one
    double total = 0.0;
    for (double c : mk.cells[0]) total += c;
    CHECK(total == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("corpus_stats arithmetic") {
    PreparedExample p;
    p.example.id = "one";
    p.example.utterances = {{"a", "b", "c"}, {"d", "e", "f"}};
    p.example.summary = {"x", "y", "z", "."};
    p.triplets = {};
    CorpusStats s = corpus_stats({p});
    CHECK(s.count == 1);
    CHECK(s.avg_utterances == Catch::Approx(2.0));
    CHECK(s.avg_dialogue_tokens == Catch::Approx(6.0));
    CHECK(s.avg_summary_tokens == Catch::Approx(4.0));

    // one triplet over a 2-sentence summary -> density 0.5
    PreparedExample q;
    q.example.id = "two";
    q.example.utterances = {{"a"}};
    q.example.summary = {"tom", "bought", "cars", ".", "nothing", "else", "."};
    FactTriplet t;
    t.subject = "tom";
    t.verb = "bought";
    t.object = "cars";
    t.subject_pos = 0;
    t.verb_pos = 1;
    t.object_pos = 2;
    q.triplets = {t};
    CorpusStats sq = corpus_stats({q});
    CHECK(sq.triplets_per_sentence == Catch::Approx(0.5));

    CHECK(corpus_stats({}).count == 0);
}

TEST_CASE("flow matrix svg is written and well formed") {
    namespace fs = std::filesystem;
    FlowMatrix m;
    m.add(0, 0.05, 1.0);
    m.add(1, 0.55, 0.7);
    m.add(2, 0.95, 0.4);
    m.normalize();
    fs::path dir = fs::temp_directory_path() / "dialsum_plot_test";
    fs::create_directories(dir);
    std::string path = (dir / "flow.svg").string();
    plot::write_flow_matrix_svg(path, m, "flow");

    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("</svg>") != std::string::npos);
    CHECK(content.find("S3") != std::string::npos);
    fs::remove_all(dir);
}
