#pragma once

#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simaml/corpus.hpp"
#include "simaml/errors.hpp"
#include "simaml/rng.hpp"

namespace simaml {

// Desk-scale semantic-parsing dataset with a systematicity split: the gen
// side contains only (noun, syntactic-role) combinations never seen in
// train, while every word in gen occurs somewhere in train.
struct SynthConfig {
    std::vector<std::string> nouns = {"cat", "dog", "bird", "girl", "boy", "fox"};
    // Written as (surface, lemma): surface form appears in the sentence,
    // lemma in the logical form, mirroring COGS inflection.
    std::vector<std::pair<std::string, std::string>> verbs = {
        {"sees", "see"}, {"helps", "help"}, {"finds", "find"}, {"draws", "draw"}};
    std::vector<std::string> preps = {"beside", "near"};
    // Template toggles; both on by default.
    bool template_svo = true;     // the N1 V the N2 .
    bool template_svo_pp = true;  // the N1 V the N2 P the N3 .
    int holdout_pairs = 3;        // number of held-out (noun, role) combinations
    bool include_primitives = true;
    std::size_t max_train = 500;  // 0 = uncapped
    std::size_t max_gen = 120;    // 0 = uncapped
};

enum class SynthRole { subject, object, pp_object };

inline const char* synth_role_name(SynthRole r) {
    switch (r) {
        case SynthRole::subject: return "subj";
        case SynthRole::object: return "obj";
        default: return "pobj";
    }
}

namespace detail {

struct SynthItem {
    std::vector<std::string> source;
    std::string raw_target;
    std::vector<std::pair<std::string, SynthRole>> combos;
};

inline void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.nouns.size() < 5) throw ConfigError("synthetic grammar needs at least 5 nouns");
    if (cfg.verbs.size() < 3) throw ConfigError("synthetic grammar needs at least 3 verbs");
    int templates = (cfg.template_svo ? 1 : 0) + (cfg.template_svo_pp ? 1 : 0);
    if (templates < 2) throw ConfigError("synthetic grammar needs at least 2 templates");
    if (cfg.template_svo_pp && cfg.preps.empty()) throw ConfigError("PP template needs at least one preposition");
    if (cfg.holdout_pairs < 1) throw ConfigError("need at least one held-out (noun, role) pair");
}

}  // namespace detail

// Deterministic in (config, seed). Returns (train, gen).
inline std::pair<Corpus, Corpus> generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
    detail::validate_synth_config(cfg);
    Rng rng(seed);

    // Held-out combinations use distinct nouns so every noun keeps at least
    // one in-train role, which in turn keeps gen's vocabulary inside train's.
    constexpr std::array<SynthRole, 3> kRoles = {SynthRole::subject, SynthRole::object, SynthRole::pp_object};
    if (static_cast<std::size_t>(cfg.holdout_pairs) > cfg.nouns.size()) {
        throw ConfigError("holdout_pairs exceeds noun count");
    }
    auto noun_picks = rng.sample_without_replacement(cfg.nouns.size(), static_cast<std::size_t>(cfg.holdout_pairs));
    std::set<std::pair<std::string, SynthRole>> held;
    for (std::size_t i = 0; i < noun_picks.size(); ++i) {
        SynthRole role = kRoles[rng.uniform_below(cfg.template_svo_pp ? 3 : 2)];
        held.emplace(cfg.nouns[noun_picks[i]], role);
    }

    std::vector<detail::SynthItem> items;
    auto emit_svo = [&](const auto& verb, const std::string& n1, const std::string& n2) {
        detail::SynthItem it;
        it.source = {"the", n1, verb.first, "the", n2, "."};
        it.raw_target = verb.second + " ( " + n1 + " , " + n2 + " )";
        it.combos = {{n1, SynthRole::subject}, {n2, SynthRole::object}};
        items.push_back(std::move(it));
    };
    auto emit_svo_pp = [&](const auto& verb, const std::string& n1, const std::string& n2,
                           const std::string& prep, const std::string& n3) {
        detail::SynthItem it;
        it.source = {"the", n1, verb.first, "the", n2, prep, "the", n3, "."};
        it.raw_target = verb.second + " ( " + n1 + " , " + prep + " ( " + n2 + " , " + n3 + " ) )";
        it.combos = {{n1, SynthRole::subject}, {n2, SynthRole::object}, {n3, SynthRole::pp_object}};
        items.push_back(std::move(it));
    };

    for (const auto& v : cfg.verbs) {
        for (const auto& n1 : cfg.nouns) {
            for (const auto& n2 : cfg.nouns) {
                if (n1 == n2) continue;
                if (cfg.template_svo) emit_svo(v, n1, n2);
                if (cfg.template_svo_pp) {
                    for (const auto& p : cfg.preps) {
                        for (const auto& n3 : cfg.nouns) {
                            if (n3 == n1 || n3 == n2) continue;
                            emit_svo_pp(v, n1, n2, p, n3);
                        }
                    }
                }
            }
        }
    }

    std::vector<Example> train_examples, gen_examples;
    auto held_combo = [&](const detail::SynthItem& it) -> const std::pair<std::string, SynthRole>* {
        for (const auto& c : it.combos) {
            if (held.count(c)) return &c;
        }
        return nullptr;
    };
    for (auto& it : items) {
        Example e;
        e.source = std::move(it.source);
        e.raw_target = it.raw_target;
        e.target = tokenize(it.raw_target);
        if (const auto* c = held_combo(it)) {
            e.tag = c->first + std::string("->") + synth_role_name(c->second);
            gen_examples.push_back(std::move(e));
        } else {
            e.tag = "in_distribution";
            train_examples.push_back(std::move(e));
        }
    }
    if (gen_examples.empty()) throw ConfigError("synthetic grammar too small: held-out combination set is empty");
    if (train_examples.empty()) throw ConfigError("synthetic grammar too small: train side is empty");

    rng.shuffle(train_examples);
    rng.shuffle(gen_examples);
    if (cfg.max_gen && gen_examples.size() > cfg.max_gen) gen_examples.resize(cfg.max_gen);
    std::vector<Example> dropped;
    if (cfg.max_train && train_examples.size() > cfg.max_train) {
        dropped.assign(train_examples.begin() + static_cast<std::ptrdiff_t>(cfg.max_train), train_examples.end());
        train_examples.resize(cfg.max_train);
    }

    // The cap must not evict the last train occurrence of an atom gen uses;
    // pull examples back from the dropped remainder until gen is covered.
    {
        std::set<std::string> covered;
        for (const auto& e : train_examples)
            for (const auto& t : e.source) covered.insert(t);
        for (const auto& g : gen_examples) {
            for (const auto& t : g.source) {
                if (covered.count(t)) continue;
                // dropped examples are train-side by construction, so pulling
                // one back cannot leak a held-out combination
                auto it = std::find_if(dropped.begin(), dropped.end(), [&](const Example& d) {
                    return std::find(d.source.begin(), d.source.end(), t) != d.source.end();
                });
                if (it != dropped.end()) {
                    for (const auto& tok : it->source) covered.insert(tok);
                    train_examples.push_back(std::move(*it));
                    dropped.erase(it);
                }
            }
        }
    }

    // Single-word atoms go to train only, like COGS primitives. Added after
    // the cap so small caps cannot squeeze out the atoms gen depends on.
    if (cfg.include_primitives) {
        for (const auto& n : cfg.nouns) {
            Example e;
            e.source = {n};
            e.raw_target = n;
            e.target = {n};
            e.tag = "primitive";
            train_examples.push_back(std::move(e));
        }
        for (const auto& v : cfg.verbs) {
            Example e;
            e.source = {v.first};
            e.raw_target = v.second;
            e.target = {v.second};
            e.tag = "primitive";
            train_examples.push_back(std::move(e));
        }
    }

    Corpus train = detail::finalize_corpus("synth-train", std::move(train_examples));
    Corpus gen = detail::finalize_corpus("synth-gen", std::move(gen_examples));
    for (const auto& g : gen.examples) {
        for (const auto& t : g.source) {
            if (!train.source_vocab.contains(t)) {
                throw ConfigError("synthetic grammar too small: gen atom '" + t + "' missing from train");
            }
        }
    }
    return {std::move(train), std::move(gen)};
}

}  // namespace simaml
