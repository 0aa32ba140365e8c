#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "simaml/maml.hpp"
#include "simaml/synth.hpp"

using namespace simaml;
using Catch::Matchers::WithinAbs;

namespace {

Corpus ten_example_corpus() {
    return testutil::make_corpus({
        {"jump", "JUMP"},
        {"walk", "WALK"},
        {"look", "LOOK"},
        {"run", "RUN"},
        {"jump twice", "JUMP JUMP"},
        {"walk twice", "WALK WALK"},
        {"look twice", "LOOK LOOK"},
        {"run twice", "RUN RUN"},
        {"jump and walk", "JUMP WALK"},
        {"look and run", "LOOK RUN"},
    });
}

Seq2SeqConfig tiny_config(int hidden = 16) {
    Seq2SeqConfig cfg = Seq2SeqConfig::desk();
    cfg.hidden = hidden;
    cfg.dropout = 0.0;
    return cfg;
}

double dot_all(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].value().array() * b[i].value().array()).sum();
    return s;
}

}  // namespace

TEST_CASE("virtual tasks pair every meta-train element with one draw", "[maml]") {
    Corpus c = ten_example_corpus();
    KernelConfig lev;
    NeighborIndex idx = build_index(c, lev, 5);
    SamplerConfig scfg;
    Rng rng(3);
    for (int batch_size : {1, 4, 10}) {
        VirtualTask t = make_virtual_task(c, idx, scfg, batch_size, rng);
        CHECK(t.meta_train.size() == static_cast<std::size_t>(batch_size));
        CHECK(t.meta_test.size() == t.meta_train.size());
        std::set<std::size_t> unique(t.meta_train.begin(), t.meta_train.end());
        CHECK(unique.size() == t.meta_train.size());  // without replacement
    }
    CHECK_THROWS_AS(make_virtual_task(c, idx, scfg, 11, rng), ConfigError);
}

TEST_CASE("uniform kernel meta-test draws are iid uniform", "[maml]") {
    Corpus c = ten_example_corpus();
    KernelConfig uni;
    uni.kind = KernelConfig::Kind::uniform;
    NeighborIndex idx = build_index(c, uni, 5);
    SamplerConfig scfg;
    Rng rng(7);
    std::vector<int> counts(c.size(), 0);
    constexpr int kTasks = 20000;
    for (int i = 0; i < kTasks; ++i) {
        VirtualTask t = make_virtual_task(c, idx, scfg, 4, rng);
        for (std::size_t id : t.meta_test) ++counts[id];
    }
    const double expect = kTasks * 4.0 / static_cast<double>(c.size());
    double stat = 0.0;
    for (int n : counts) stat += (n - expect) * (n - expect) / expect;
    CHECK(testutil::chi_square_pvalue(stat, static_cast<int>(c.size()) - 1) > 0.01);
}

TEST_CASE("lev meta-test neighbors are closer than the median pair", "[maml]") {
    SynthConfig sc;
    sc.max_train = 80;
    auto [train, gen] = generate_synthetic(sc, 21);
    KernelConfig lev;
    NeighborIndex idx = build_index(train, lev, 10);
    SamplerConfig scfg;
    scfg.lambda = 1.0;  // always the top-k branch

    // brute-force median of all pairwise distances
    std::vector<int> dists;
    for (std::size_t i = 0; i < train.size(); ++i) {
        for (std::size_t j = i + 1; j < train.size(); ++j) {
            dists.push_back(lev_distance(train.examples[i].source, train.examples[j].source));
        }
    }
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2), dists.end());
    int median = dists[dists.size() / 2];

    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        VirtualTask t = make_virtual_task(train, idx, scfg, 8, rng);
        for (std::size_t i = 0; i < t.meta_train.size(); ++i) {
            int d = lev_distance(train.examples[t.meta_train[i]].source, train.examples[t.meta_test[i]].source);
            CHECK(d <= median);
        }
    }
}

TEST_CASE("inner step with alpha zero is the identity", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, c.source_vocab.size(), c.target_vocab.size(), 31);
    Batch batch = make_batch(c, std::vector<std::size_t>{0, 1, 2, 3});
    InnerStepOut out = inner_step(params, cfg, batch, 0.0, false);
    for (const auto& [name, t] : params.tensors) {
        CHECK(out.updated.at(name).value() == t.value());
    }
}

TEST_CASE("inner step matches the least-squares closed form", "[maml]") {
    // L(w) = mean over 3 rows of (x_i . w - y_i)^2; grad = 2/3 X^T (Xw - y)
    Matrix x(3, 2);
    x << 1.0, 2.0, -1.0, 0.5, 0.3, -0.7;
    Matrix y(3, 1);
    y << 1.0, -2.0, 0.4;
    Matrix w0(2, 1);
    w0 << 0.2, -0.3;

    ModelParams params;
    params.tensors.emplace("w", Tensor::leaf(w0, true));
    const double alpha = 0.05;
    auto loss_fn = [&](const ModelParams& p) {
        Tensor resid = sub(matmul(Tensor::constant(x), p.at("w")), Tensor::constant(y));
        return mean_all(mul(resid, resid));
    };
    InnerStepOut out = inner_step_with(params, loss_fn, alpha, false);

    Matrix grad_closed = (2.0 / 3.0) * x.transpose() * (x * w0 - y);
    Matrix expected = w0 - alpha * grad_closed;
    CHECK_THAT((out.updated.at("w").value() - expected).norm(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("doubling alpha doubles the displacement exactly", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, c.source_vocab.size(), c.target_vocab.size(), 37);
    Batch batch = make_batch(c, std::vector<std::size_t>{0, 4, 8});
    InnerStepOut a1 = inner_step(params, cfg, batch, 0.1, false);
    InnerStepOut a2 = inner_step(params, cfg, batch, 0.2, false);
    for (const auto& [name, theta] : params.tensors) {
        Matrix d1 = a1.updated.at(name).value() - theta.value();
        Matrix d2 = a2.updated.at(name).value() - theta.value();
        CHECK((d2 - 2.0 * d1).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("meta objective at alpha zero is the joint supervised loss", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, c.source_vocab.size(), c.target_vocab.size(), 41);
    Batch bt = make_batch(c, std::vector<std::size_t>{0, 1, 4});
    Batch bg = make_batch(c, std::vector<std::size_t>{8, 9, 2});

    MetaObjective obj = meta_objective(params, cfg, bt, bg, 0.0);
    double direct = nll_loss(params, cfg, bt).scalar_value() + nll_loss(params, cfg, bg).scalar_value();
    CHECK_THAT(obj.total.scalar_value(), WithinAbs(direct, 1e-12));
}

TEST_CASE("alpha-zero meta gradient is the sum of both batch gradients", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config(8);
    ModelParams params = init_params(cfg, c.source_vocab.size(), c.target_vocab.size(), 43);
    Batch bt = make_batch(c, std::vector<std::size_t>{0, 5});
    Batch bg = make_batch(c, std::vector<std::size_t>{7, 2});

    MetaObjective obj = meta_objective(params, cfg, bt, bg, 0.0);
    auto meta_grads = grad(obj.total, params.all());
    auto gt = grad(nll_loss(params, cfg, bt), params.all());
    auto gg = grad(nll_loss(params, cfg, bg), params.all());
    for (std::size_t i = 0; i < meta_grads.size(); ++i) {
        Matrix expect = gt[i].value() + gg[i].value();
        CHECK((meta_grads[i].value() - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("meta gradient carries the Hessian term of the toy quadratic", "[maml]") {
    // L_bt(w) = a w^2, L_bg(w) = b w^2
    // L_tau = a w^2 + b (w - 2 a alpha w)^2, dL/dw = 2aw + 2bw (1-2 a alpha)^2
    const double a = 0.8, b = 1.7, alpha = 0.3, w0 = 1.3;
    ModelParams params;
    params.tensors.emplace("w", Tensor::leaf(Matrix::Constant(1, 1, w0), true));

    auto bt_loss = [&](const ModelParams& p) { return mul_scalar(mul(p.at("w"), p.at("w")), a); };
    InnerStepOut inner = inner_step_with(params, bt_loss, alpha, /*create_graph=*/true);
    Tensor w_prime = inner.updated.at("w");
    Tensor total = add(inner.loss, mul_scalar(mul(w_prime, w_prime), b));
    auto g = grad(total, params.all());

    double expect = 2.0 * a * w0 + 2.0 * b * w0 * std::pow(1.0 - 2.0 * a * alpha, 2);
    CHECK_THAT(g[0].scalar_value(), WithinAbs(expect, 1e-9));

    // first-order approximation drops the Hessian factor
    InnerStepOut inner_fo = inner_step_with(params, bt_loss, alpha, /*create_graph=*/false);
    Tensor wp_fo = inner_fo.updated.at("w");
    Tensor total_fo = add(inner_fo.loss, mul_scalar(mul(wp_fo, wp_fo), b));
    auto g_fo = grad(total_fo, params.all());
    double expect_fo = 2.0 * a * w0 + 2.0 * b * (w0 - 2.0 * a * alpha * w0);
    CHECK_THAT(g_fo[0].scalar_value(), WithinAbs(expect_fo, 1e-9));
}

TEST_CASE("first-order equals full gradient when the inner loss is linear", "[maml]") {
    const double c1 = 0.9, c2 = -1.4, alpha = 0.2;
    ModelParams params;
    params.tensors.emplace("w", Tensor::leaf(Matrix::Constant(1, 1, 0.6), true));
    auto linear_loss = [&](const ModelParams& p) { return mul_scalar(p.at("w"), c1); };

    auto run = [&](bool create_graph) {
        InnerStepOut inner = inner_step_with(params, linear_loss, alpha, create_graph);
        Tensor wp = inner.updated.at("w");
        Tensor total = add(inner.loss, mul_scalar(mul(wp, wp), c2));
        return grad(total, params.all())[0].scalar_value();
    };
    CHECK_THAT(run(true), WithinAbs(run(false), 1e-12));
}

TEST_CASE("training is deterministic in the seed", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config();
    KernelConfig lev;
    NeighborIndex idx = build_index(c, lev, 5);
    SamplerConfig scfg;
    TrainerConfig tcfg;
    tcfg.mode = TrainerConfig::Mode::maml;
    tcfg.steps = 5;
    tcfg.batch_size = 4;
    tcfg.alpha = 0.1;
    tcfg.seed = 97;

    TrainResult r1 = train(c, &idx, scfg, tcfg, cfg);
    TrainResult r2 = train(c, &idx, scfg, tcfg, cfg);
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].loss_meta_train == r2.log[i].loss_meta_train);
        CHECK(r1.log[i].loss_meta_test == r2.log[i].loss_meta_test);
        CHECK(r1.log[i].grad_norm == r2.log[i].grad_norm);
    }
    for (const auto& [name, t] : r1.params.tensors) {
        CHECK(t.value() == r2.params.at(name).value());
    }
}

TEST_CASE("maml at alpha zero with uniform kernel follows the doubled batch", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config(8);
    ModelParams params = init_params(cfg, c.source_vocab.size(), c.target_vocab.size(), 53);

    Batch bt = make_batch(c, std::vector<std::size_t>{0, 3, 6, 9});
    Batch bg = make_batch(c, std::vector<std::size_t>{1, 4, 4, 8});
    Batch both = make_batch(c, std::vector<std::size_t>{0, 3, 6, 9, 1, 4, 4, 8});

    MetaObjective obj = meta_objective(params, cfg, bt, bg, 0.0);
    auto g_meta = grad(obj.total, params.all());
    auto g_union = grad(nll_loss(params, cfg, both), params.all());

    double cos = dot_all(g_meta, g_union) /
                 (std::sqrt(dot_all(g_meta, g_meta)) * std::sqrt(dot_all(g_union, g_union)));
    CHECK(cos >= 1.0 - 1e-10);
}

TEST_CASE("divergence aborts training with the step number", "[maml]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config();
    TrainerConfig tcfg;
    tcfg.mode = TrainerConfig::Mode::supervised;
    tcfg.optimizer = TrainerConfig::Outer::sgd;
    tcfg.outer_lr = 1e308;  // first update overflows the parameters
    tcfg.steps = 3;
    tcfg.batch_size = 4;
    SamplerConfig scfg;
    CHECK_THROWS_WITH(train(c, nullptr, scfg, tcfg, cfg), Catch::Matchers::ContainsSubstring("step"));
}

TEST_CASE("inner step rejects non-finite gradients", "[maml]") {
    ModelParams params;
    params.tensors.emplace("w", Tensor::leaf(Matrix::Constant(1, 1, -1.0), true));
    auto bad_loss = [](const ModelParams& p) { return sqrt_t(p.at("w")); };  // NaN at w < 0
    CHECK_THROWS_AS(inner_step_with(params, bad_loss, 0.1, false), NumericError);
}

TEST_CASE("maml training rejects a mismatched index", "[maml]") {
    Corpus c = ten_example_corpus();
    Corpus other = testutil::make_corpus({{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}});
    KernelConfig lev;
    NeighborIndex idx = build_index(other, lev, 2);
    SamplerConfig scfg;
    TrainerConfig tcfg;
    tcfg.steps = 1;
    tcfg.batch_size = 2;
    Seq2SeqConfig cfg = tiny_config();
    CHECK_THROWS_AS(train(c, &idx, scfg, tcfg, cfg), FingerprintError);
}

TEST_CASE("supervised training with the trainer reaches exact match", "[maml][slow]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config(32);
    TrainerConfig tcfg;
    tcfg.mode = TrainerConfig::Mode::supervised;
    tcfg.optimizer = TrainerConfig::Outer::adam;
    tcfg.outer_lr = 5e-3;
    tcfg.steps = 500;
    tcfg.batch_size = 10;
    tcfg.seed = 29;
    SamplerConfig scfg;
    TrainResult res = train(c, nullptr, scfg, tcfg, cfg);
    int correct = 0;
    for (const auto& e : c.examples) {
        auto pred = decode_greedy(res.params, cfg, e.source, c.source_vocab, c.target_vocab, 20);
        if (pred == e.target) ++correct;
    }
    CHECK(correct == 10);
}

TEST_CASE("meta objective works through the transformer", "[maml][transformer]") {
    Corpus c = ten_example_corpus();
    Seq2SeqConfig cfg = tiny_config();
    cfg.arch = Seq2SeqConfig::Arch::transformer;
    cfg.hidden = 8;
    cfg.tf_heads = 2;
    cfg.tf_ff = 16;
    ModelParams params = init_params(cfg, c.source_vocab.size(), c.target_vocab.size(), 47);
    Batch bt = make_batch(c, std::vector<std::size_t>{0, 5});
    Batch bg = make_batch(c, std::vector<std::size_t>{7, 2});

    // alpha = 0 reduces to the joint loss, exactly
    MetaObjective at_zero = meta_objective(params, cfg, bt, bg, 0.0);
    double direct = nll_loss(params, cfg, bt).scalar_value() + nll_loss(params, cfg, bg).scalar_value();
    CHECK_THAT(at_zero.total.scalar_value(), WithinAbs(direct, 1e-12));

    // the full second-order gradient stays finite through the whole stack
    MetaObjective obj = meta_objective(params, cfg, bt, bg, 0.05);
    auto grads = grad(obj.total, params.all());
    for (const auto& g : grads) CHECK(g.value().allFinite());
}
