#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "simaml/trees.hpp"

using namespace simaml;

TEST_CASE("cogs passive follows the logical form's argument order", "[trees]") {
    DepTree t = logical_form_to_deptree(
        "rose ( x _ 1 ) AND help . theme ( x _ 3 , x _ 1 ) AND help . agent ( x _ 3 , Emma )", LfDialect::cogs);
    CHECK(encode_tree(t) == "help(rose,emma)");
}

TEST_CASE("cogs definite articles and pp modifiers", "[trees]") {
    DepTree t = logical_form_to_deptree(
        "* girl ( x _ 1 ) ; * table ( x _ 7 ) ; change . agent ( x _ 2 , x _ 1 ) AND change . theme ( x _ 2 , x _ 4 "
        ") AND sandwich ( x _ 4 ) AND sandwich . nmod . beside ( x _ 4 , x _ 7 )",
        LfDialect::cogs);
    CHECK(encode_tree(t) == "change(girl,sandwich(table))");
}

TEST_CASE("cogs primitives collapse to single nodes", "[trees]") {
    CHECK(encode_tree(logical_form_to_deptree("Paula", LfDialect::cogs)) == "paula");
    CHECK(encode_tree(logical_form_to_deptree("LAMBDA a . shark ( a )", LfDialect::cogs)) == "shark");
    CHECK(encode_tree(logical_form_to_deptree(
              "LAMBDA a . LAMBDA b . LAMBDA e . change . agent ( e , b ) AND change . theme ( e , a )",
              LfDialect::cogs)) == "change");
}

TEST_CASE("cogs control constructions keep the first attachment", "[trees]") {
    DepTree t = logical_form_to_deptree(
        "* boy ( x _ 1 ) ; want . agent ( x _ 2 , x _ 1 ) AND want . xcomp ( x _ 2 , x _ 4 ) AND go . agent ( x _ 4 "
        ", x _ 1 )",
        LfDialect::cogs);
    CHECK(encode_tree(t) == "want(boy,go)");
}

TEST_CASE("cogs cp recursion nests event subtrees", "[trees]") {
    DepTree t = logical_form_to_deptree(
        "* cat ( x _ 1 ) ; say . agent ( x _ 2 , x _ 1 ) AND say . ccomp ( x _ 2 , x _ 5 ) AND girl ( x _ 4 ) AND "
        "snap . agent ( x _ 5 , x _ 4 )",
        LfDialect::cogs);
    CHECK(encode_tree(t) == "say(cat,snap(girl))");
}

TEST_CASE("parsing is deterministic", "[trees]") {
    const std::string lf = "rose ( x _ 1 ) AND help . theme ( x _ 3 , x _ 1 ) AND help . agent ( x _ 3 , Emma )";
    CHECK(encode_tree(logical_form_to_deptree(lf, LfDialect::cogs)) ==
          encode_tree(logical_form_to_deptree(lf, LfDialect::cogs)));
}

TEST_CASE("synth dialect keeps written argument order", "[trees]") {
    CHECK(encode_tree(logical_form_to_deptree("see(dog, cat)", LfDialect::synth)) == "see(dog,cat)");
    CHECK(encode_tree(logical_form_to_deptree("see ( cat , beside ( dog , fox ) )", LfDialect::synth)) ==
          "see(cat,beside(dog,fox))");
    CHECK(encode_tree(logical_form_to_deptree("cat", LfDialect::synth)) == "cat");
}

TEST_CASE("malformed logical forms are rejected", "[trees]") {
    CHECK_THROWS_AS(logical_form_to_deptree("help . agent ( x _ 1 , x _ 2", LfDialect::cogs), ParseError);
    CHECK_THROWS_AS(logical_form_to_deptree("see ( cat , dog", LfDialect::synth), ParseError);
    CHECK_THROWS_AS(logical_form_to_deptree("see ( cat , dog ) )", LfDialect::synth), ParseError);
    // x_9 is never given a label anywhere
    CHECK_THROWS_WITH(logical_form_to_deptree("rose ( x _ 1 ) AND help . agent ( x _ 3 , x _ 9 )", LfDialect::cogs),
                      Catch::Matchers::ContainsSubstring("x_9"));
}

TEST_CASE("disconnected event graphs are reported with their roots", "[trees]") {
    CHECK_THROWS_WITH(logical_form_to_deptree("cat ( x _ 1 ) AND dog ( x _ 2 )", LfDialect::cogs),
                      Catch::Matchers::ContainsSubstring("cat") && Catch::Matchers::ContainsSubstring("dog"));
}

TEST_CASE("figure trees enumerate to six partial trees", "[trees]") {
    DepTree t = logical_form_to_deptree("help ( rose , emma )", LfDialect::synth);
    auto ms = enumerate_partial_trees(t);
    std::int64_t total = 0;
    for (const auto& [enc, count] : ms) total += count;
    CHECK(total == 6);
    CHECK(ms.at("help") == 1);
    CHECK(ms.at("rose") == 1);
    CHECK(ms.at("emma") == 1);
    CHECK(ms.at("help(rose)") == 1);
    CHECK(ms.at("help(emma)") == 1);
    CHECK(ms.at("help(rose,emma)") == 1);
}

TEST_CASE("figure pair shares exactly three partial trees", "[trees]") {
    auto a = enumerate_partial_trees(logical_form_to_deptree("help ( rose , emma )", LfDialect::synth));
    auto b = enumerate_partial_trees(logical_form_to_deptree("help ( rose , dog )", LfDialect::synth));
    CHECK(testutil::multiset_intersection_size(a, b) == 3);
    CHECK(testutil::fragment_pair_count(a, b) == 3.0);
}

TEST_CASE("single node enumerates to itself", "[trees]") {
    DepTree t = logical_form_to_deptree("rose", LfDialect::synth);
    auto ms = enumerate_partial_trees(t);
    REQUIRE(ms.size() == 1);
    CHECK(ms.at("rose") == 1);
}

TEST_CASE("every tree has exactly n single-node partial trees", "[trees]") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        DepTree t = testutil::random_tree(rng, 6);
        auto ms = enumerate_partial_trees(t);
        std::int64_t singles = 0;
        for (const auto& [enc, count] : ms) {
            if (enc.find('(') == std::string::npos) singles += count;
        }
        CHECK(singles == t.size());
    }
}

TEST_CASE("sibling order distinguishes encodings", "[trees]") {
    auto a = encode_tree(logical_form_to_deptree("help ( rose , emma )", LfDialect::synth));
    auto b = encode_tree(logical_form_to_deptree("help ( emma , rose )", LfDialect::synth));
    CHECK(a != b);
}

TEST_CASE("enumeration cap aborts combinatorial blowups", "[trees]") {
    // a 16-node star has 2^15 + 15 fragments
    DepTree star;
    star.root = 0;
    star.nodes.push_back({"hub", {}});
    for (int i = 1; i <= 15; ++i) {
        star.nodes.push_back({"leaf" + std::to_string(i), {}});
        star.nodes[0].children.push_back(i);
    }
    CHECK_THROWS_AS(enumerate_partial_trees(star, 1000), ConfigError);
    CHECK(count_partial_trees(star, 1u << 20) == (1u << 15) + 15);
}
