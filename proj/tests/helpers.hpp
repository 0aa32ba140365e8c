#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "simaml/corpus.hpp"
#include "simaml/rng.hpp"
#include "simaml/trees.hpp"

namespace testutil {

using simaml::Corpus;
using simaml::DepTree;
using simaml::Example;
using simaml::Rng;

inline Corpus make_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                          const std::string& name = "test") {
    std::vector<Example> examples;
    for (const auto& [src, tgt] : pairs) {
        Example e;
        e.source = simaml::tokenize(src);
        e.target = simaml::tokenize(tgt);
        e.raw_target = tgt;
        examples.push_back(std::move(e));
    }
    return simaml::detail::finalize_corpus(name, std::move(examples));
}

inline std::vector<std::string> random_tokens(Rng& rng, std::size_t max_len, std::size_t alphabet) {
    static const std::vector<std::string> kSyms = {"a", "b", "c", "d", "e", "f", "g", "h"};
    std::size_t len = rng.uniform_below(max_len + 1);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < len; ++i) out.push_back(kSyms[rng.uniform_below(alphabet)]);
    return out;
}

// Uniform random ordered tree with labels drawn from a small alphabet
// (repeats are likely, which is exactly what the kernel oracle must survive).
inline DepTree random_tree(Rng& rng, int max_nodes, std::size_t alphabet = 3) {
    static const std::vector<std::string> kLabels = {"p", "q", "r", "s", "t"};
    int n = 1 + static_cast<int>(rng.uniform_below(static_cast<std::size_t>(max_nodes)));
    DepTree t;
    t.root = 0;
    for (int i = 0; i < n; ++i) {
        t.nodes.push_back({kLabels[rng.uniform_below(alphabet)], {}});
        if (i > 0) {
            int parent = static_cast<int>(rng.uniform_below(static_cast<std::size_t>(i)));
            t.nodes[static_cast<std::size_t>(parent)].children.push_back(i);
        }
    }
    return t;
}

// Brute-force reference for the string subsequence kernel at decay 1: counts
// pairs of equal-token subsequence occurrences of length 1..max_len.
inline double brute_force_ssk_count(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                    int max_len) {
    auto collect = [max_len](const std::vector<std::string>& s) {
        std::map<std::string, std::int64_t> counts;
        std::size_t n = s.size();
        // iterate index subsets via bitmask; inputs are <= ~10 tokens
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            if (std::popcount(mask) > max_len) continue;
            std::string key;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1u << i)) key += s[i] + "\x1f";
            }
            ++counts[key];
        }
        return counts;
    };
    auto ca = collect(a), cb = collect(b);
    double total = 0.0;
    for (const auto& [key, na] : ca) {
        auto it = cb.find(key);
        if (it != cb.end()) total += static_cast<double>(na) * static_cast<double>(it->second);
    }
    return total;
}

// Common-fragment count between two partial-tree multisets, multiplicity on
// both sides (the quantity the kernel recursion computes at mu = lambda = 1).
inline double fragment_pair_count(const simaml::PartialTreeMultiset& a, const simaml::PartialTreeMultiset& b) {
    double total = 0.0;
    for (const auto& [key, ca] : a) {
        auto it = b.find(key);
        if (it != b.end()) total += static_cast<double>(ca) * static_cast<double>(it->second);
    }
    return total;
}

// Classic min-based multiset intersection size.
inline std::int64_t multiset_intersection_size(const simaml::PartialTreeMultiset& a,
                                               const simaml::PartialTreeMultiset& b) {
    std::int64_t total = 0;
    for (const auto& [key, ca] : a) {
        auto it = b.find(key);
        if (it != b.end()) total += std::min(ca, it->second);
    }
    return total;
}

// Regularized upper incomplete gamma Q(a, x), enough for chi-square p-values.
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) return 1.0;
    auto gamma_p_series = [](double a_, double x_) {
        double sum = 1.0 / a_, term = sum, ap = a_;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x_ / ap;
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x_ + a_ * std::log(x_) - std::lgamma(a_));
    };
    auto gamma_q_cf = [](double a_, double x_) {
        double b = x_ + 1.0 - a_, c = 1e300, d = 1.0 / b, h = d;
        for (int i = 1; i <= 500; ++i) {
            double an = -i * (i - a_);
            b += 2.0;
            d = an * d + b;
            if (std::fabs(d) < 1e-300) d = 1e-300;
            c = b + an / c;
            if (std::fabs(c) < 1e-300) c = 1e-300;
            d = 1.0 / d;
            double delta = d * c;
            h *= delta;
            if (std::fabs(delta - 1.0) < 1e-15) break;
        }
        return std::exp(-x_ + a_ * std::log(x_) - std::lgamma(a_)) * h;
    };
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

// p-value of a chi-square statistic with the given degrees of freedom.
inline double chi_square_pvalue(double statistic, int dof) {
    return gamma_q(0.5 * dof, 0.5 * statistic);
}

}  // namespace testutil
