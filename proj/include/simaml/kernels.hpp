#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "simaml/corpus.hpp"
#include "simaml/errors.hpp"
#include "simaml/trees.hpp"

namespace simaml {

// Similarity function selector plus the convolution-kernel hyperparameters.
// decay/mu/lambda of 1 give pure substructure counting, which is what the
// exact-count fixtures pin down; smaller values decay by matched span.
struct KernelConfig {
    enum class Kind { lev, ssk, ptk, uniform };
    Kind kind = Kind::lev;
    int ssk_max_len = 4;      // longest common subsequence length counted
    double ssk_decay = 1.0;   // gap decay in (0, 1]
    double ptk_mu = 1.0;      // per-node decay
    double ptk_lambda = 1.0;  // child-subsequence decay
    bool normalize = true;    // ssk/ptk only; lev stays a raw negative distance

    void validate() const {
        if (ssk_max_len < 1) throw ConfigError("ssk_max_len must be >= 1");
        if (!(ssk_decay > 0.0 && ssk_decay <= 1.0)) throw ConfigError("ssk_decay must be in (0, 1]");
        if (!(ptk_mu > 0.0)) throw ConfigError("ptk_mu must be positive");
        if (!(ptk_lambda > 0.0 && ptk_lambda <= 1.0)) throw ConfigError("ptk_lambda must be in (0, 1]");
    }
};

inline const char* kernel_kind_name(KernelConfig::Kind k) {
    switch (k) {
        case KernelConfig::Kind::lev: return "lev";
        case KernelConfig::Kind::ssk: return "ssk";
        case KernelConfig::Kind::ptk: return "ptk";
        default: return "uniform";
    }
}

inline KernelConfig::Kind kernel_kind_from_name(const std::string& name) {
    if (name == "lev") return KernelConfig::Kind::lev;
    if (name == "ssk") return KernelConfig::Kind::ssk;
    if (name == "ptk") return KernelConfig::Kind::ptk;
    if (name == "uniform") return KernelConfig::Kind::uniform;
    throw ConfigError("unknown kernel kind: " + name);
}

// Word-level edit distance, standard two-row dynamic program.
inline int lev_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0) return static_cast<int>(m);
    if (m == 0) return static_cast<int>(n);
    std::vector<int> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

namespace detail {

// Lodhi et al. subsequence-kernel recursion, generalized so each position
// match contributes `match(i, j)` instead of a 0/1 indicator. Every common
// subsequence occurrence pair of length 1..max_len contributes
// decay^(span in a) * decay^(span in b) * prod of match values.
template <typename MatchFn>
double subsequence_kernel(std::size_t n, std::size_t m, int max_len, double decay, MatchFn&& match) {
    if (n == 0 || m == 0) return 0.0;
    const int L = std::min<int>(max_len, static_cast<int>(std::min(n, m)));
    const double d2 = decay * decay;

    // K'_(l-1) over prefixes, flat (n+1) x (m+1)
    std::vector<double> kp_prev((n + 1) * (m + 1), 1.0), kp_cur((n + 1) * (m + 1), 0.0);
    auto at = [m](std::vector<double>& v, std::size_t i, std::size_t j) -> double& { return v[i * (m + 1) + j]; };

    double total = 0.0;
    std::vector<double> kpp(m + 1, 0.0);  // K''_l for the current row i
    for (int l = 1; l <= L; ++l) {
        std::fill(kp_cur.begin(), kp_cur.end(), 0.0);
        double level_sum = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            std::fill(kpp.begin(), kpp.end(), 0.0);
            for (std::size_t j = 1; j <= m; ++j) {
                double mij = match(i - 1, j - 1);
                double tail = mij != 0.0 ? d2 * mij * at(kp_prev, i - 1, j - 1) : 0.0;
                kpp[j] = decay * kpp[j - 1] + tail;
                at(kp_cur, i, j) = decay * at(kp_cur, i - 1, j) + kpp[j];
                level_sum += tail;
            }
        }
        total += level_sum;
        std::swap(kp_prev, kp_cur);
    }
    return total;
}

inline double ssk_raw(const std::vector<std::string>& a, const std::vector<std::string>& b, const KernelConfig& cfg) {
    return subsequence_kernel(a.size(), b.size(), cfg.ssk_max_len, cfg.ssk_decay,
                              [&](std::size_t i, std::size_t j) { return a[i] == b[j] ? 1.0 : 0.0; });
}

// Partial tree kernel (Moschitti). Delta(n1, n2) sums, over pairs of
// identically-shaped order-preserving fragments rooted at n1 and n2, the
// product of decays; at mu = lambda = 1 it counts exactly the fragment pairs
// the brute-force enumerator produces.
inline double ptk_raw(const DepTree& t1, const DepTree& t2, const KernelConfig& cfg) {
    const int n1 = t1.size(), n2 = t2.size();
    std::vector<double> delta(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2), 0.0);
    auto dl = [&](int i, int j) -> double& { return delta[static_cast<std::size_t>(i) * n2 + j]; };

    // postorder so child deltas exist before their parents'
    auto postorder = [](const DepTree& t) {
        std::vector<int> order;
        order.reserve(t.nodes.size());
        std::vector<std::pair<int, bool>> stack = {{t.root, false}};
        while (!stack.empty()) {
            auto [node, expanded] = stack.back();
            stack.pop_back();
            if (expanded) {
                order.push_back(node);
                continue;
            }
            stack.push_back({node, true});
            const auto& ch = t.node(node).children;
            for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, false});
        }
        return order;
    };

    const double mu = cfg.ptk_mu, lam = cfg.ptk_lambda;
    const std::vector<int> order1 = postorder(t1), order2 = postorder(t2);
    double total = 0.0;
    for (int u : order1) {
        for (int v : order2) {
            if (t1.node(u).label != t2.node(v).label) continue;
            const auto& cu = t1.node(u).children;
            const auto& cv = t2.node(v).children;
            double s = subsequence_kernel(cu.size(), cv.size(), static_cast<int>(std::min(cu.size(), cv.size())), lam,
                                          [&](std::size_t i, std::size_t j) { return dl(cu[i], cv[j]); });
            dl(u, v) = mu * (lam * lam + s);
            total += dl(u, v);
        }
    }
    return total;
}

}  // namespace detail

// String subsequence kernel over word tokens. normalize divides by
// sqrt(k(a,a) k(b,b)); empty inputs score 0 against everything.
inline double ssk(const std::vector<std::string>& a, const std::vector<std::string>& b, const KernelConfig& cfg) {
    double raw = detail::ssk_raw(a, b, cfg);
    if (!cfg.normalize) return raw;
    if (raw == 0.0) return 0.0;
    double na = detail::ssk_raw(a, a, cfg);
    double nb = detail::ssk_raw(b, b, cfg);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return raw / std::sqrt(na * nb);
}

// Partial tree kernel over dependency trees.
inline double ptk(const DepTree& t1, const DepTree& t2, const KernelConfig& cfg) {
    double raw = detail::ptk_raw(t1, t2, cfg);
    if (!cfg.normalize) return raw;
    if (raw == 0.0) return 0.0;
    double n1 = detail::ptk_raw(t1, t1, cfg);
    double n2 = detail::ptk_raw(t2, t2, cfg);
    if (n1 == 0.0 || n2 == 0.0) return 0.0;
    return raw / std::sqrt(n1 * n2);
}

// k([x,y], [x',y']) dispatch. lev compares sentences and negates the
// distance; ssk compares sentences; ptk compares the formal representations
// as trees (which must be supplied, indexed by example id); uniform scores
// every pair 0 so the relevance distribution degenerates to uniform.
inline double similarity(const Example& a, const Example& b, const KernelConfig& cfg,
                         const std::vector<DepTree>* trees = nullptr) {
    switch (cfg.kind) {
        case KernelConfig::Kind::lev:
            return -1.0 * lev_distance(a.source, b.source);
        case KernelConfig::Kind::ssk:
            return ssk(a.source, b.source, cfg);
        case KernelConfig::Kind::ptk: {
            if (trees == nullptr) throw ConfigError("ptk similarity requires parsed dependency trees");
            const auto& t1 = trees->at(static_cast<std::size_t>(a.id));
            const auto& t2 = trees->at(static_cast<std::size_t>(b.id));
            return ptk(t1, t2, cfg);
        }
        case KernelConfig::Kind::uniform:
            return 0.0;
    }
    return 0.0;
}

}  // namespace simaml
