#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "dialsum/trainer.hpp"

using namespace dialsum;
using namespace dialsum::ad;
using namespace dialsum::corpus;
using namespace dialsum::train;

namespace {

struct TinySetup {
    Vocabulary vocab;
    model::ModelConfig config;
    std::vector<PreparedExample> data;
};

// A few fixed dialogue-summary pairs whose summaries copy dialogue content.
TinySetup tiny_setup() {
    TinySetup s;
    s.config.d = 8;
    s.config.d_e = 6;
    s.config.d_up = 2;
    s.config.d_sp = 2;
    s.config.dropout = 0.0;
    s.config.max_utt_positions = 6;
    s.config.max_sum_positions = 12;

    std::vector<std::pair<std::vector<TokenList>, TokenList>> raw = {
        {{{"tom", "met", "ann"}, {"movie", "tonight"}}, {"tom", "met", "ann", "."}},
        {{{"ann", "bought", "books"}, {"store", "closed"}}, {"ann", "bought", "books", "."}},
        {{{"sam", "plays", "chess"}, {"club", "night"}}, {"sam", "plays", "chess", "."}},
        {{{"kim", "cooks", "pasta"}, {"dinner", "late"}}, {"kim", "cooks", "pasta", "."}},
    };
    std::vector<TokenList> all;
    for (auto& [utts, summary] : raw) {
        for (auto& u : utts) all.push_back(u);
        all.push_back(summary);
    }
    s.vocab = build_vocab(all);

    TokenSet stop = {"the", "a"};
    TokenSet verbs = {"met", "bought", "plays", "cooks"};
    int i = 0;
    for (auto& [utts, summary] : raw) {
        DialogueExample ex;
        ex.id = "d" + std::to_string(i++);
        ex.utterances = utts;
        ex.summary = summary;
        s.data.push_back(prepare_example(ex, stop, verbs));
    }
    return s;
}

}  // namespace

TEST_CASE("clip_gradients scales only above the threshold") {
    ParameterStore store;
    store.add("a", Tensor::vector({0.3, 0.4}));  // grads set below

    store.at("a").grad = Tensor::vector({0.3, 0.4});  // norm 0.5
    CHECK(clip_gradients(store, 1.0) == Catch::Approx(0.5));
    CHECK(store.at("a").grad[0] == Catch::Approx(0.3));

    store.at("a").grad = Tensor::vector({1.2, 1.6});  // norm 2.0
    CHECK(clip_gradients(store, 1.0) == Catch::Approx(2.0));
    CHECK(store.at("a").grad[0] == Catch::Approx(0.6));
    CHECK(store.at("a").grad[1] == Catch::Approx(0.8));

    store.at("a").grad = Tensor::vector({0.0, 0.0});
    CHECK(clip_gradients(store, 1.0) == Catch::Approx(0.0));
    CHECK(store.at("a").grad[0] == 0.0);
}

TEST_CASE("clip_gradients covers all entries in the global norm") {
    ParameterStore store;
    store.add("a", Tensor::scalar(0.0));
    store.add("b", Tensor::scalar(0.0));
    store.at("a").grad[0] = 3.0;
    store.at("b").grad[0] = 4.0;
    CHECK(clip_gradients(store, 1.0) == Catch::Approx(5.0));
    const double norm = std::hypot(store.at("a").grad[0], store.at("b").grad[0]);
    CHECK(norm == Catch::Approx(1.0));
}

TEST_CASE("adam_step basics") {
    ParameterStore store;
    store.add("w", Tensor::scalar(1.0));
    AdamState state;

    // zero gradient: parameters unchanged, step counter advances
    adam_step(store, state, 0.001);
    CHECK(store.at("w").value[0] == 1.0);
    CHECK(state.step == 1);

    // first effective step moves by about -lr * sign(g)
    ParameterStore fresh;
    fresh.add("w", Tensor::scalar(1.0));
    AdamState fstate;
    fresh.at("w").grad[0] = 0.5;
    adam_step(fresh, fstate, 0.001);
    const double delta1 = fresh.at("w").value[0] - 1.0;
    CHECK(delta1 == Catch::Approx(-0.001).margin(1e-6));

    // a second identical step is no larger than the first
    const double before = fresh.at("w").value[0];
    fresh.at("w").grad[0] = 0.5;
    adam_step(fresh, fstate, 0.001);
    const double delta2 = fresh.at("w").value[0] - before;
    CHECK(std::fabs(delta2) <= std::fabs(delta1) + 1e-9);
}

TEST_CASE("plateau policy halves and stops per the patience settings") {
    PlateauPolicy p;
    auto d1 = p.update(5.0, 1, 3);
    CHECK(d1.improved);
    auto d2 = p.update(4.0, 1, 3);
    CHECK(d2.improved);
    auto d3 = p.update(4.5, 1, 3);  // first stale epoch: decay, no stop
    CHECK(!d3.improved);
    CHECK(d3.decay);
    CHECK(!d3.stop);
    auto d4 = p.update(4.0, 1, 3);  // equal to best is not an improvement
    CHECK(!d4.improved);
    CHECK(d4.decay);
    CHECK(!d4.stop);
    auto d5 = p.update(4.4, 1, 3);  // third stale epoch: stop
    CHECK(d5.stop);
}

TEST_CASE("encode_targets maps OOV tokens through the extended vocabulary") {
    Vocabulary v = build_vocab({{"tom", "met"}});
    DialogueExample ex;
    ex.utterances = {{"tom", "met", "zorblax"}};
    ex.summary = {"tom", "zorblax"};
    auto src = encode_example(ex, v);

    auto enc = encode_targets(ex.summary, v, src, true);
    REQUIRE(enc.input_ids.size() == 3);
    REQUIRE(enc.target_ids.size() == 3);
    CHECK(enc.input_ids[0] == v.start_id());
    CHECK(enc.input_ids[2] == v.unk_id());  // OOV input falls back to <unk>
    CHECK(enc.target_ids[0] == v.id_of("tom"));
    CHECK(enc.target_ids[1] == static_cast<std::int32_t>(v.size()));  // copied OOV
    CHECK(enc.target_ids[2] == v.end_id());

    auto no_copy = encode_targets(ex.summary, v, src, false);
    CHECK(no_copy.target_ids[1] == v.unk_id());
}

TEST_CASE("fit drives the training loss down and is reproducible") {
    TinySetup s = tiny_setup();
    LossWeights weights;
    weights.lambda1 = 0.3;
    weights.lambda2 = 1.0;
    weights.lambda3 = 0.3;
    TrainConfig tc;
    tc.batch_size = 2;
    tc.learning_rate = 0.01;
    tc.max_epochs = 30;
    tc.patience_decay = 10;
    tc.patience_stop = 30;
    tc.seed = 7;

    std::ostringstream log_a, log_b;
    TrainResult a = fit(s.data, s.data, s.vocab, s.config, weights, tc, nullptr, &log_a);
    TrainResult b = fit(s.data, s.data, s.vocab, s.config, weights, tc, nullptr, &log_b);

    REQUIRE(!a.log.empty());
    CHECK(a.log.back().train_nll_per_token < a.log.front().train_nll_per_token);
    CHECK(log_a.str() == log_b.str());  // bit-reproducible

    // the returned checkpoint is the best epoch
    for (const auto& row : a.log) {
        CHECK(a.best.valid_perplexity <= row.valid_perplexity + 1e-12);
    }
    CHECK(a.best.vocab_size == s.vocab.size());

    // identical seeds produce identical parameters
    for (std::size_t i = 0; i < a.best.params.size(); ++i) {
        CHECK(a.best.params.entries()[i]->value.data == b.best.params.entries()[i]->value.data);
    }
}

TEST_CASE("fit rejects empty inputs") {
    TinySetup s = tiny_setup();
    CHECK_THROWS_AS(
        fit({}, s.data, s.vocab, s.config, LossWeights{}, TrainConfig{}),
        std::invalid_argument);
}

TEST_CASE("ablation flags with zero-width embeddings match the basic model run") {
    TinySetup s = tiny_setup();

    model::ModelConfig ablated = s.config;
    ablated.d_up = 0;
    ablated.d_sp = 0;
    model::ModelConfig basic = s.config;
    basic.use_sufm_embedding = false;

    LossWeights off;
    off.enable_sufm_loss = false;
    off.enable_fr_loss = false;

    TrainConfig tc;
    tc.batch_size = 2;
    tc.learning_rate = 0.01;
    tc.max_epochs = 4;
    tc.patience_decay = 4;
    tc.patience_stop = 4;
    tc.seed = 3;

    TrainResult a = fit(s.data, s.data, s.vocab, ablated, off, tc);
    TrainResult b = fit(s.data, s.data, s.vocab, basic, off, tc);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        CHECK(a.log[e].valid_perplexity == b.log[e].valid_perplexity);  // identical trajectory
        CHECK(a.log[e].gen_loss == b.log[e].gen_loss);
    }
}

TEST_CASE("fit aborts with a diagnostic on a non-finite loss") {
    TinySetup s = tiny_setup();
    LossWeights weights;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 10;
    tc.seed = 1;
    // poisoned embeddings drive the forward pass to NaN
    model::WordVectors poisoned;
    poisoned["tom"] = std::vector<double>(s.config.d_e,
                                          std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_WITH(fit(s.data, s.data, s.vocab, s.config, weights, tc, &poisoned),
                      Catch::Matchers::ContainsSubstring("non-finite loss"));
}

TEST_CASE("checkpoint round trip preserves configuration and parameters") {
    namespace fs = std::filesystem;
    TinySetup s = tiny_setup();
    LossWeights weights;
    TrainConfig tc;
    tc.batch_size = 2;
    tc.learning_rate = 0.01;
    tc.max_epochs = 2;
    tc.patience_decay = 2;
    tc.patience_stop = 2;
    tc.seed = 5;
    TrainResult r = fit(s.data, s.data, s.vocab, s.config, weights, tc);

    fs::path dir = fs::temp_directory_path() / "dialsum_ckpt_test";
    fs::create_directories(dir);
    std::string path = (dir / "model.ckpt").string();
    save_checkpoint(path, r.best);

    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.vocab_size == s.vocab.size());
    CHECK(loaded.epoch == r.best.epoch);
    CHECK(loaded.valid_perplexity == Catch::Approx(r.best.valid_perplexity));
    CHECK(loaded.model.d == s.config.d);
    CHECK(loaded.model.use_sufm_embedding == s.config.use_sufm_embedding);
    CHECK(loaded.train.learning_rate == tc.learning_rate);
    REQUIRE(loaded.params.size() == r.best.params.size());
    for (std::size_t i = 0; i < loaded.params.size(); ++i) {
        const auto& a = *loaded.params.entries()[i];
        const auto& b = *r.best.params.entries()[i];
        CHECK(a.name == b.name);  // names stable across the round trip
        REQUIRE(a.value.shape == b.value.shape);
        for (std::size_t k = 0; k < a.value.numel(); ++k) {
            // float32 storage: relative error bounded by single precision
            CHECK(a.value[k] == Catch::Approx(b.value[k]).epsilon(1e-6).margin(1e-37));
        }
    }

    // corrupting the magic is rejected
    {
        std::ofstream bad((dir / "bad.ckpt").string(), std::ios::binary);
        bad << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint((dir / "bad.ckpt").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("post-clip gradient norms never exceed the maximum") {
    TinySetup s = tiny_setup();
    ParameterStore store = model::init_parameters(s.config, s.vocab, 2);
    LossWeights weights;
    Rng rng(9);
    for (int step = 0; step < 3; ++step) {
        Graph g;
        auto losses = detail::example_loss(g, store, s.config, s.vocab, s.data[step % 4],
                                           weights, &rng, true);
        g.backward(losses.joint);
        clip_gradients(store, 1.0);
        double sq = 0.0;
        for (const auto& e : store.entries()) {
            for (double v : e->grad.data) sq += v * v;
        }
        CHECK(std::sqrt(sq) <= 1.0 + 1e-9);
        store.zero_grads();
    }
}
