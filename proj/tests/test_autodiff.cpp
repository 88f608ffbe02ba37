#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dialsum/autodiff.hpp"

using namespace dialsum;
using namespace dialsum::ad;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -0.8,
                     double hi = 0.8) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("softmax basic values") {
    Graph g;
    Node* v = g.constant(Tensor::vector({0.0, 0.0}));
    Node* s = g.softmax(v);
    CHECK(s->val()[0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(s->val()[1] == Catch::Approx(0.5).margin(1e-15));

    Node* w = g.constant(Tensor::vector({0.0, std::log(3.0)}));
    Node* sw = g.softmax(w);
    CHECK(sw->val()[0] == Catch::Approx(0.25).margin(1e-12));
    CHECK(sw->val()[1] == Catch::Approx(0.75).margin(1e-12));
}

TEST_CASE("softmax shift invariance and normalization") {
    Rng rng(7);
    Graph g;
    std::vector<double> base(13);
    for (double& v : base) v = rng.uniform(-5.0, 5.0);
    std::vector<double> shifted = base;
    for (double& v : shifted) v += 100.0;

    Node* a = g.softmax(g.constant(Tensor::vector(base)));
    Node* b = g.softmax(g.constant(Tensor::vector(shifted)));
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(a->val()[i] == Catch::Approx(b->val()[i]).margin(1e-12));
    }

    // long input still sums to 1 within 1e-12
    std::vector<double> big(10000);
    for (double& v : big) v = rng.uniform(-20.0, 20.0);
    Tensor p = softmax(Tensor::vector(big));
    double total = 0.0;
    for (double v : p.data) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);
}

TEST_CASE("softmax rejects empty input") {
    CHECK_THROWS_AS(softmax(Tensor({0})), std::invalid_argument);
}

TEST_CASE("backward on sums and products of leaves") {
    ParameterStore store;
    auto& a = store.add("a", Tensor::scalar(2.0));
    auto& b = store.add("b", Tensor::scalar(3.0));

    {
        Graph g;
        g.backward(g.add(g.param(a), g.param(b)));
        CHECK(a.grad[0] == Catch::Approx(1.0));
        CHECK(b.grad[0] == Catch::Approx(1.0));
    }
    store.zero_grads();
    {
        Graph g;
        g.backward(g.mul(g.param(a), g.param(b)));
        CHECK(a.grad[0] == Catch::Approx(3.0));
        CHECK(b.grad[0] == Catch::Approx(2.0));
    }
}

TEST_CASE("backward accumulates across calls until reset") {
    ParameterStore store;
    auto& a = store.add("a", Tensor::scalar(1.5));
    for (int i = 0; i < 3; ++i) {
        Graph g;
        g.backward(g.scale(g.param(a), 2.0));
    }
    CHECK(a.grad[0] == Catch::Approx(6.0));
    store.zero_grads();
    CHECK(a.grad[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    ParameterStore store;
    auto& a = store.add("a", Tensor::vector({1.0, 2.0}));
    Graph g;
    CHECK_THROWS_AS(g.backward(g.tanh(g.param(a))), std::invalid_argument);
}

TEST_CASE("tanh chain matches central finite differences") {
    Rng rng(11);
    ParameterStore store;
    store.add("w", random_tensor({6}, rng));
    Tensor x = random_tensor({6}, rng);

    auto build = [&](Graph& g, ParameterStore& p) {
        return g.tanh(g.dot(g.param(p, "w"), g.constant(x)));
    };
    CHECK(grad_check(build, store, 1e-6) < 1e-6);
}

TEST_CASE("grad_check on w squared") {
    ParameterStore store;
    store.add("w", Tensor::scalar(3.0));
    auto build = [](Graph& g, ParameterStore& p) {
        Node* w = g.param(p, "w");
        return g.mul(w, w);
    };
    CHECK(grad_check(build, store, 1e-5) < 1e-8);

    store.zero_grads();
    Graph g;
    Node* w = g.param(store, "w");
    g.backward(g.mul(w, w));
    CHECK(store.at("w").grad[0] == Catch::Approx(6.0));
}

TEST_CASE("grad_check softmax plus NLL equals p minus onehot") {
    Rng rng(3);
    ParameterStore store;
    store.add("logits", random_tensor({4}, rng, -1.0, 1.0));
    const std::size_t target = 2;

    auto build = [&](Graph& g, ParameterStore& p) {
        Node* probs = g.softmax(g.param(p, "logits"));
        return g.scale(g.log(g.pick(probs, target)), -1.0);
    };
    CHECK(grad_check(build, store, 1e-5) < 1e-8);

    store.zero_grads();
    Graph g;
    Node* probs = g.softmax(g.param(store, "logits"));
    g.backward(g.scale(g.log(g.pick(probs, target)), -1.0));
    for (std::size_t i = 0; i < 4; ++i) {
        const double expected = probs->val()[i] - (i == target ? 1.0 : 0.0);
        CHECK(store.at("logits").grad[i] == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("grad_check detects a non-deterministic loss") {
    ParameterStore store;
    store.add("w", Tensor::scalar(1.0));
    int calls = 0;
    auto build = [&](Graph& g, ParameterStore& p) {
        return g.scale(g.param(p, "w"), 1.0 + 0.1 * calls++);
    };
    CHECK_THROWS_AS(grad_check(build, store, 1e-5), std::runtime_error);
}

TEST_CASE("grad_check validates eps range") {
    ParameterStore store;
    store.add("w", Tensor::scalar(1.0));
    auto build = [](Graph& g, ParameterStore& p) { return g.param(p, "w"); };
    CHECK_THROWS_AS(grad_check(build, store, 1e-2), std::invalid_argument);
}

TEST_CASE("every differentiable op passes an isolated gradient check") {
    Rng rng(21);
    ParameterStore store;
    store.add("u", random_tensor({5}, rng));
    store.add("v", random_tensor({5}, rng));
    store.add("pos", random_tensor({5}, rng, 0.5, 1.5));
    store.add("m", random_tensor({4, 5}, rng));
    store.add("m2", random_tensor({3, 5}, rng));
    store.add("w", random_tensor({4, 5}, rng));
    store.add("b", random_tensor({4}, rng));
    store.add("x4", random_tensor({4}, rng));
    store.add("s", Tensor::scalar(0.7));
    const Tensor weights3 = random_tensor({3}, rng);
    const Tensor weights4 = random_tensor({4}, rng);
    const Tensor weights5 = random_tensor({5}, rng);
    const Tensor weights15 = random_tensor({15}, rng);
    const Tensor weights35 = random_tensor({3, 5}, rng);
    const Tensor weights45 = random_tensor({4, 5}, rng);
    const Tensor weights43 = random_tensor({4, 3}, rng);

    using Build = std::function<Node*(Graph&, ParameterStore&)>;
    std::vector<std::pair<const char*, Build>> cases = {
        {"add", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.add(g.param(p, "u"), g.param(p, "v")), g.constant(weights5));
         }},
        {"sub", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.sub(g.param(p, "u"), g.param(p, "v")), g.constant(weights5));
         }},
        {"mul", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.mul(g.param(p, "u"), g.param(p, "v")), g.constant(weights5));
         }},
        {"affine", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.affine(g.param(p, "u"), -1.7, 0.4), g.constant(weights5));
         }},
        {"linear", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.linear(g.param(p, "w"), g.param(p, "u"), g.param(p, "b")),
                          g.constant(weights4));
         }},
        {"matmul_nt", [&](Graph& g, ParameterStore& p) {
             Node* y = g.matmul_nt(g.param(p, "m"), g.param(p, "m2"));  // 4x3
             return g.dot(y, g.constant(weights43));
         }},
        {"matvec", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.matvec(g.param(p, "m"), g.param(p, "u")), g.constant(weights4));
         }},
        {"tmatvec", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.tmatvec(g.param(p, "m"), g.param(p, "x4")), g.constant(weights5));
         }},
        {"add_rowvec", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.add_rowvec(g.param(p, "m"), g.param(p, "v")), g.constant(weights45));
         }},
        {"tanh", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.tanh(g.param(p, "u")), g.constant(weights5));
         }},
        {"sigmoid", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.sigmoid(g.param(p, "u")), g.constant(weights5));
         }},
        {"softmax", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.softmax(g.param(p, "u")), g.constant(weights5));
         }},
        {"log", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.log(g.param(p, "pos")), g.constant(weights5));
         }},
        {"clamp_min", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.clamp_min(g.param(p, "pos"), 1e-6), g.constant(weights5));
         }},
        {"sum", [&](Graph& g, ParameterStore& p) { return g.sum(g.tanh(g.param(p, "u"))); }},
        {"dot", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.param(p, "u"), g.param(p, "v"));
         }},
        {"pick", [&](Graph& g, ParameterStore& p) { return g.pick(g.param(p, "u"), 3); }},
        {"gather", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.gather(g.param(p, "u"), {4, 0, 0, 2}), g.constant(weights4));
         }},
        {"scatter_add", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.scatter_add(g.param(p, "u"), {1, 0, 1, 2, 2}, 3),
                          g.constant(weights3));
         }},
        {"concat", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.concat({g.param(p, "u"), g.param(p, "v"), g.scale(g.param(p, "u"), 2.0)}),
                          g.constant(weights15));
         }},
        {"stack_rows", [&](Graph& g, ParameterStore& p) {
             Node* m = g.stack_rows({g.param(p, "u"), g.param(p, "v"), g.tanh(g.param(p, "u"))});
             return g.dot(m, g.constant(weights35));
         }},
        {"mean_rows", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.mean_rows(g.param(p, "m"), 1, 4), g.constant(weights5));
         }},
        {"embed_row", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.embed_row(g.param(p, "m"), 2), g.constant(weights5));
         }},
        {"div_scalar", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.div_scalar(g.param(p, "u"), g.param(p, "s")), g.constant(weights5));
         }},
        {"mul_scalar", [&](Graph& g, ParameterStore& p) {
             return g.dot(g.mul_scalar(g.param(p, "u"), g.param(p, "s")), g.constant(weights5));
         }},
        {"cosine", [&](Graph& g, ParameterStore& p) {
             return g.cosine(g.param(p, "u"), g.param(p, "v"));
         }},
        {"gru_cell", [&](Graph& g, ParameterStore& p) {
             GruParams gp = bind_gru(g, p, "gru");
             Node* h = gru_cell(g, g.param(p, "u"), g.param(p, "x4"), gp);
             return g.dot(h, g.constant(weights4));
         }},
    };

    Rng init_rng(5);
    register_gru(store, "gru", 5, 4, [&](Tensor& t, const std::string&) {
        for (double& v : t.data) v = init_rng.uniform(-0.5, 0.5);
    });

    for (auto& [name, build] : cases) {
        INFO("op: " << name);
        CHECK(grad_check(build, store, 1e-6) < 1e-6);
    }
}

TEST_CASE("gru_cell zero inputs and zero parameters give zero state") {
    ParameterStore store;
    register_gru(store, "g0", 3, 2, [](Tensor&, const std::string&) {});
    Graph g;
    GruParams p = bind_gru(g, store, "g0");
    Node* h = gru_cell(g, g.constant(Tensor({3})), g.constant(Tensor({2})), p);
    CHECK(h->val()[0] == 0.0);
    CHECK(h->val()[1] == 0.0);
}

TEST_CASE("gru_cell with saturated update gate keeps previous state") {
    ParameterStore store;
    register_gru(store, "g1", 1, 1, [](Tensor&, const std::string&) {});
    store.at("g1.b_iz").value[0] = 20.0;  // z ~= 1
    Graph g;
    GruParams p = bind_gru(g, store, "g1");
    Node* h = gru_cell(g, g.constant(Tensor::vector({0.35})), g.constant(Tensor::vector({-0.6})), p);
    CHECK(std::fabs(h->val()[0] - (-0.6)) < 1e-8);
}

TEST_CASE("gru_cell scalar case matches hand-evaluated formula") {
    // Standalone oracle: evaluate the gate equations with plain doubles.
    Rng rng(99);
    ParameterStore store;
    register_gru(store, "g2", 1, 1, [&](Tensor& t, const std::string&) {
        for (double& v : t.data) v = rng.uniform(-0.9, 0.9);
    });
    const double x = 0.37, h_prev = -0.21;

    auto val = [&](const char* name) { return store.at(std::string("g2.") + name).value[0]; };
    auto sigm = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double r = sigm(val("w_ir") * x + val("b_ir") + val("w_hr") * h_prev + val("b_hr"));
    const double z = sigm(val("w_iz") * x + val("b_iz") + val("w_hz") * h_prev + val("b_hz"));
    const double n = std::tanh(val("w_in") * x + val("b_in") +
                               r * (val("w_hn") * h_prev + val("b_hn")));
    const double expected = (1.0 - z) * n + z * h_prev;

    Graph g;
    GruParams p = bind_gru(g, store, "g2");
    Node* h = gru_cell(g, g.constant(Tensor::vector({x})), g.constant(Tensor::vector({h_prev})), p);
    CHECK(std::fabs(h->val()[0] - expected) < 1e-12);
}

TEST_CASE("gru_cell rejects dimension mismatch") {
    ParameterStore store;
    register_gru(store, "g3", 3, 2, [](Tensor&, const std::string&) {});
    Graph g;
    GruParams p = bind_gru(g, store, "g3");
    CHECK_THROWS_AS(gru_cell(g, g.constant(Tensor({4})), g.constant(Tensor({2})), p),
                    std::invalid_argument);
}

TEST_CASE("shared subexpressions match the expanded graph") {
    Rng rng(17);
    ParameterStore shared_store;
    shared_store.add("x", random_tensor({4}, rng));
    ParameterStore expanded_store;
    expanded_store.add("x", shared_store.at("x").value);

    {
        // y = tanh(x); loss = <y, y> with y reused
        Graph g;
        Node* y = g.tanh(g.param(shared_store, "x"));
        g.backward(g.dot(y, y));
    }
    {
        // same function with tanh(x) rebuilt twice
        Graph g;
        Node* x = g.param(expanded_store, "x");
        g.backward(g.dot(g.tanh(x), g.tanh(x)));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(shared_store.at("x").grad[i] ==
              Catch::Approx(expanded_store.at("x").grad[i]).margin(1e-14));
    }
}

TEST_CASE("forward pass is deterministic for a fixed seed") {
    auto run = [] {
        Rng rng(123);
        ParameterStore store;
        store.add("w", random_tensor({4, 4}, rng));
        store.add("b", random_tensor({4}, rng));
        Graph g;
        Node* y = g.tanh(g.linear(g.param(store, "w"), g.constant(random_tensor({4}, rng)),
                                  g.param(store, "b")));
        return y->val().data;
    };
    CHECK(run() == run());
}

TEST_CASE("parameter store rejects duplicates and preserves order") {
    ParameterStore store;
    store.add("b", Tensor::scalar(1.0));
    store.add("a", Tensor::scalar(2.0));
    CHECK_THROWS_AS(store.add("a", Tensor::scalar(0.0)), std::invalid_argument);
    CHECK(store.entries()[0]->name == "b");
    CHECK(store.entries()[1]->name == "a");
    CHECK(store.total_parameters() == 2);
}
