#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "simaml/kernels.hpp"
#include "simaml/relevance.hpp"

using namespace simaml;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::string> toks(const std::string& s) { return tokenize(s); }

const std::string kTable1Source = "The girl changed a sandwich beside the table .";
const std::vector<std::string> kTable1LevNeighbors = {
    "The girl rolled a drink beside the table .",  "The girl liked a dealer beside the table .",
    "The girl cleaned a teacher beside the table .", "The girl froze a bear beside the table .",
    "The girl grew a pencil beside the table .",
};

}  // namespace

TEST_CASE("lev distance reproduces the published neighbor scores", "[kernels]") {
    for (const auto& n : kTable1LevNeighbors) {
        CHECK(lev_distance(toks(kTable1Source), toks(n)) == 2);
    }
    CHECK(lev_distance(toks("Emma lended the donut to the dog ."), toks("Emma lended the donut to a dog .")) == 1);
    CHECK(lev_distance(toks("Emma lended the donut to the dog ."), toks("Emma loaned the donut to the teacher .")) ==
          2);
}

TEST_CASE("lev distance of a sequence with itself is zero", "[kernels]") {
    CHECK(lev_distance(toks(kTable1Source), toks(kTable1Source)) == 0);
    CHECK(lev_distance({}, {}) == 0);
    CHECK(lev_distance({}, toks("a b c")) == 3);
}

TEST_CASE("lev distance is a metric on token sequences", "[kernels]") {
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = testutil::random_tokens(rng, 6, 3);
        auto b = testutil::random_tokens(rng, 6, 3);
        auto c = testutil::random_tokens(rng, 6, 3);
        int dab = lev_distance(a, b), dba = lev_distance(b, a);
        int dac = lev_distance(a, c), dcb = lev_distance(c, b);
        CHECK(dab == dba);
        CHECK((dab == 0) == (a == b));
        CHECK(dab <= dac + dcb);
    }
}

TEST_CASE("ssk counts common subsequences with multiplicity", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ssk;
    cfg.ssk_max_len = 2;
    cfg.ssk_decay = 1.0;
    cfg.normalize = false;
    CHECK_THAT(ssk({"a", "b"}, {"b", "a"}, cfg), WithinAbs(2.0, 1e-12));
    CHECK_THAT(ssk({"a", "b", "c"}, {"a", "x", "c"}, cfg), WithinAbs(3.0, 1e-12));
}

TEST_CASE("normalized ssk of a sentence with itself is one", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ssk;
    cfg.normalize = true;
    CHECK_THAT(ssk(toks(kTable1Source), toks(kTable1Source), cfg), WithinAbs(1.0, 1e-12));
}

TEST_CASE("ssk of the empty sequence is zero", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ssk;
    CHECK(ssk({}, toks("a b"), cfg) == 0.0);
    CHECK(ssk({}, {}, cfg) == 0.0);
}

TEST_CASE("ssk dynamic program equals brute-force enumeration", "[kernels]") {
    Rng rng(37);
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ssk;
    cfg.ssk_decay = 1.0;
    cfg.normalize = false;
    for (int trial = 0; trial < 500; ++trial) {
        auto a = testutil::random_tokens(rng, 6, 4);
        auto b = testutil::random_tokens(rng, 6, 4);
        cfg.ssk_max_len = 1 + static_cast<int>(rng.uniform_below(4));
        double expect = testutil::brute_force_ssk_count(a, b, cfg.ssk_max_len);
        double got = ssk(a, b, cfg);
        CHECK(got == expect);
    }
}

TEST_CASE("ssk decay weights occurrences by spanned length", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ssk;
    cfg.ssk_max_len = 2;
    cfg.ssk_decay = 0.5;
    cfg.normalize = false;
    // common: [x] (1,1), [y] (1,1), [x,y] spanning 2 in a and 3 in b
    double expect = 2 * 0.25 + std::pow(0.5, 2 + 3);
    CHECK_THAT(ssk({"x", "y"}, {"x", "z", "y"}, cfg), WithinAbs(expect, 1e-12));
}

TEST_CASE("ptk reproduces the figure's shared-fragment count", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ptk;
    cfg.normalize = false;
    DepTree a = logical_form_to_deptree("help ( rose , emma )", LfDialect::synth);
    DepTree b = logical_form_to_deptree("help ( rose , dog )", LfDialect::synth);
    CHECK_THAT(ptk(a, b, cfg), WithinAbs(3.0, 1e-12));
    cfg.normalize = true;
    CHECK_THAT(ptk(a, b, cfg), WithinAbs(0.5, 1e-12));
    CHECK_THAT(ptk(a, a, cfg), WithinAbs(1.0, 1e-12));
}

TEST_CASE("ptk of disjoint single nodes is zero", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ptk;
    DepTree a = logical_form_to_deptree("rose", LfDialect::synth);
    DepTree b = logical_form_to_deptree("dog", LfDialect::synth);
    CHECK(ptk(a, b, cfg) == 0.0);
}

TEST_CASE("ptk decays match the closed form on single nodes", "[kernels]") {
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ptk;
    cfg.ptk_mu = 0.7;
    cfg.ptk_lambda = 0.5;
    cfg.normalize = false;
    DepTree a = logical_form_to_deptree("rose", LfDialect::synth);
    CHECK_THAT(ptk(a, a, cfg), WithinAbs(0.7 * 0.25, 1e-12));
}

TEST_CASE("ptk recursion equals the enumeration oracle", "[kernels]") {
    Rng rng(41);
    KernelConfig cfg;
    cfg.kind = KernelConfig::Kind::ptk;
    cfg.normalize = false;
    for (int trial = 0; trial < 200; ++trial) {
        DepTree a = testutil::random_tree(rng, 5);
        DepTree b = testutil::random_tree(rng, 5);
        double expect = testutil::fragment_pair_count(enumerate_partial_trees(a), enumerate_partial_trees(b));
        CHECK(ptk(a, b, cfg) == expect);
    }
}

TEST_CASE("normalized kernels stay in range and are symmetric", "[kernels]") {
    Rng rng(43);
    KernelConfig sskc;
    sskc.kind = KernelConfig::Kind::ssk;
    KernelConfig ptkc;
    ptkc.kind = KernelConfig::Kind::ptk;
    for (int trial = 0; trial < 200; ++trial) {
        auto a = testutil::random_tokens(rng, 6, 3);
        auto b = testutil::random_tokens(rng, 6, 3);
        double kab = ssk(a, b, sskc), kba = ssk(b, a, sskc);
        CHECK_THAT(kab, WithinAbs(kba, 1e-12));
        CHECK(kab >= 0.0);
        CHECK(kab <= 1.0 + 1e-12);
        if (!a.empty()) CHECK_THAT(ssk(a, a, sskc), WithinAbs(1.0, 1e-12));

        DepTree ta = testutil::random_tree(rng, 5);
        DepTree tb = testutil::random_tree(rng, 5);
        double pab = ptk(ta, tb, ptkc), pba = ptk(tb, ta, ptkc);
        CHECK_THAT(pab, WithinAbs(pba, 1e-12));
        CHECK(pab >= 0.0);
        CHECK(pab <= 1.0 + 1e-12);
        CHECK_THAT(ptk(ta, ta, ptkc), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("random gram matrices are positive semidefinite", "[kernels]") {
    Rng rng(47);
    KernelConfig sskc;
    sskc.kind = KernelConfig::Kind::ssk;
    KernelConfig ptkc;
    ptkc.kind = KernelConfig::Kind::ptk;
    for (int trial = 0; trial < 20; ++trial) {
        constexpr int kN = 8;
        std::vector<std::vector<std::string>> sentences;
        std::vector<DepTree> trees;
        for (int i = 0; i < kN; ++i) {
            auto s = testutil::random_tokens(rng, 6, 3);
            if (s.empty()) s.push_back("a");
            sentences.push_back(s);
            trees.push_back(testutil::random_tree(rng, 5));
        }
        Eigen::MatrixXd gs(kN, kN), gp(kN, kN);
        for (int i = 0; i < kN; ++i) {
            for (int j = 0; j < kN; ++j) {
                gs(i, j) = ssk(sentences[static_cast<std::size_t>(i)], sentences[static_cast<std::size_t>(j)], sskc);
                gp(i, j) = ptk(trees[static_cast<std::size_t>(i)], trees[static_cast<std::size_t>(j)], ptkc);
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gs), ep(gp);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
        CHECK(ep.eigenvalues().minCoeff() >= -1e-8);
    }
}

TEST_CASE("similarity dispatches per kernel kind", "[kernels]") {
    Corpus c = testutil::make_corpus({{kTable1Source, "x"}, {"The girl grew a pencil beside the table .", "y"}});
    KernelConfig lev;
    lev.kind = KernelConfig::Kind::lev;
    CHECK_THAT(similarity(c.examples[0], c.examples[1], lev), WithinAbs(-2.0, 1e-12));

    KernelConfig uni;
    uni.kind = KernelConfig::Kind::uniform;
    CHECK(similarity(c.examples[0], c.examples[1], uni) == 0.0);

    KernelConfig ptkc;
    ptkc.kind = KernelConfig::Kind::ptk;
    CHECK_THROWS_AS(similarity(c.examples[0], c.examples[1], ptkc, nullptr), ConfigError);

    Corpus st = testutil::make_corpus(
        {{"the rose helps emma .", "help ( rose , emma )"}, {"the rose helps the dog .", "help ( rose , dog )"}});
    auto trees = parse_corpus_trees(st, LfDialect::synth);
    ptkc.normalize = true;
    CHECK_THAT(similarity(st.examples[0], st.examples[1], ptkc, &trees), WithinAbs(0.5, 1e-12));
}

TEST_CASE("kernel config validation", "[kernels]") {
    KernelConfig bad;
    bad.ssk_max_len = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = KernelConfig{};
    bad.ssk_decay = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = KernelConfig{};
    bad.ptk_lambda = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
