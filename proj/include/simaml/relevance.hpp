#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "simaml/bytes.hpp"
#include "simaml/corpus.hpp"
#include "simaml/errors.hpp"
#include "simaml/kernels.hpp"
#include "simaml/rng.hpp"
#include "simaml/trees.hpp"

namespace simaml {

struct NeighborEntry {
    std::uint32_t id = 0;
    double sim = 0.0;
};

// Per-example top-k neighbor lists: the sparse cache that stands in for the
// full N x N Gram matrix. Rows are sorted by similarity descending, ties by
// ascending id, and never contain the anchor itself.
struct NeighborIndex {
    KernelConfig kernel;
    std::uint32_t k = 1000;
    std::uint64_t corpus_fingerprint = 0;
    std::vector<std::vector<NeighborEntry>> rows;

    std::size_t size() const { return rows.size(); }
};

// Temperature and interpolation parameters of the meta-test sampler.
struct SamplerConfig {
    double eta = 0.1;     // softmax temperature
    double lambda = 0.5;  // P(draw from the top-k row) vs uniform over the corpus
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(eta > 0.0)) throw ConfigError("eta must be positive");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
    }
};

// Parses every target into a dependency tree, reporting the offending
// example id on failure. Needed by ptk-based index builds.
inline std::vector<DepTree> parse_corpus_trees(const Corpus& corpus, LfDialect dialect) {
    std::vector<DepTree> trees;
    trees.reserve(corpus.size());
    for (const auto& e : corpus.examples) {
        try {
            trees.push_back(logical_form_to_deptree(e.raw_target, dialect));
        } catch (const ParseError& pe) {
            throw ParseError("example " + std::to_string(e.id) + ": " + pe.what());
        }
    }
    return trees;
}

// O(N^2) kernel evaluations, data-parallel over anchors with a deterministic
// result (each row depends only on its anchor).
inline NeighborIndex build_index(const Corpus& corpus, const KernelConfig& kernel, std::uint32_t k = 1000,
                                 LfDialect dialect = LfDialect::cogs) {
    kernel.validate();
    if (corpus.size() == 0) throw ConfigError("cannot index an empty corpus");

    NeighborIndex idx;
    idx.kernel = kernel;
    idx.k = k;
    idx.corpus_fingerprint = corpus_fingerprint(corpus);
    idx.rows.resize(corpus.size());
    if (kernel.kind == KernelConfig::Kind::uniform) return idx;  // rows stay empty

    std::vector<DepTree> trees;
    if (kernel.kind == KernelConfig::Kind::ptk) trees = parse_corpus_trees(corpus, dialect);

    // self-kernel cache so normalization costs one raw kernel per pair
    const std::size_t n = corpus.size();
    std::vector<double> self_raw;
    KernelConfig raw_cfg = kernel;
    raw_cfg.normalize = false;
    if (kernel.kind == KernelConfig::Kind::ssk || kernel.kind == KernelConfig::Kind::ptk) {
        self_raw.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            self_raw[i] = kernel.kind == KernelConfig::Kind::ssk
                              ? detail::ssk_raw(corpus.examples[i].source, corpus.examples[i].source, raw_cfg)
                              : detail::ptk_raw(trees[i], trees[i], raw_cfg);
        }
    }

    auto pair_sim = [&](std::size_t i, std::size_t j) -> double {
        switch (kernel.kind) {
            case KernelConfig::Kind::lev:
                return -1.0 * lev_distance(corpus.examples[i].source, corpus.examples[j].source);
            case KernelConfig::Kind::ssk: {
                double raw = detail::ssk_raw(corpus.examples[i].source, corpus.examples[j].source, raw_cfg);
                if (!kernel.normalize) return raw;
                return raw == 0.0 || self_raw[i] == 0.0 || self_raw[j] == 0.0
                           ? 0.0
                           : raw / std::sqrt(self_raw[i] * self_raw[j]);
            }
            case KernelConfig::Kind::ptk: {
                double raw = detail::ptk_raw(trees[i], trees[j], raw_cfg);
                if (!kernel.normalize) return raw;
                return raw == 0.0 ? 0.0 : raw / std::sqrt(self_raw[i] * self_raw[j]);
            }
            default:
                return 0.0;
        }
    };

    auto build_row = [&](std::size_t anchor) {
        std::vector<NeighborEntry> row;
        row.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == anchor) continue;
            row.push_back({static_cast<std::uint32_t>(j), pair_sim(anchor, j)});
        }
        auto better = [](const NeighborEntry& a, const NeighborEntry& b) {
            if (a.sim != b.sim) return a.sim > b.sim;
            return a.id < b.id;
        };
        if (row.size() > k) {
            std::nth_element(row.begin(), row.begin() + k, row.end(), better);
            row.resize(k);
        }
        std::sort(row.begin(), row.end(), better);
        idx.rows[anchor] = std::move(row);
    };

    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) build_row(i);
    } else {
        std::vector<std::future<void>> futs;
        std::size_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            futs.push_back(std::async(std::launch::async, [&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i) build_row(i);
            }));
        }
        for (auto& f : futs) f.get();
    }
    return idx;
}



inline constexpr char kIndexMagic[8] = {'N', 'B', 'R', 'I', 'D', 'X', '1', '\n'};
inline constexpr std::uint32_t kIndexVersion = 1;

// Bit-exact little-endian container:
//   magic "NBRIDX1\n" | version u32 | kind u8 | normalize u8 | ssk_max_len u32
//   | ssk_decay f64 | ptk_mu f64 | ptk_lambda f64 | k u32 | N u32
//   | fingerprint u64 | N rows of (row_len u32, row_len * (id u32, sim f64))
inline void save_index(const NeighborIndex& idx, const std::string& path) {
    std::string out;
    out.append(kIndexMagic, sizeof(kIndexMagic));
    detail::put_u32(out, kIndexVersion);
    detail::put_u8(out, static_cast<std::uint8_t>(idx.kernel.kind));
    detail::put_u8(out, idx.kernel.normalize ? 1 : 0);
    detail::put_u32(out, static_cast<std::uint32_t>(idx.kernel.ssk_max_len));
    detail::put_f64(out, idx.kernel.ssk_decay);
    detail::put_f64(out, idx.kernel.ptk_mu);
    detail::put_f64(out, idx.kernel.ptk_lambda);
    detail::put_u32(out, idx.k);
    detail::put_u32(out, static_cast<std::uint32_t>(idx.rows.size()));
    detail::put_u64(out, idx.corpus_fingerprint);
    for (const auto& row : idx.rows) {
        detail::put_u32(out, static_cast<std::uint32_t>(row.size()));
        for (const auto& e : row) {
            detail::put_u32(out, e.id);
            detail::put_f64(out, e.sim);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write index file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw ConfigError("failed writing index file: " + path);
}

inline NeighborIndex load_index(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open index file: " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::ByteReader r(std::move(data), path);

    std::string magic = r.raw(sizeof(kIndexMagic));
    if (std::memcmp(magic.data(), kIndexMagic, sizeof(kIndexMagic)) != 0) {
        throw FormatError("not a neighbor index file (bad magic): " + path);
    }
    std::uint32_t version = r.u32();
    if (version != kIndexVersion) {
        throw FormatError("unsupported index version " + std::to_string(version) + ": " + path);
    }
    NeighborIndex idx;
    std::uint8_t kind = r.u8();
    if (kind > 3) throw FormatError("bad kernel kind byte in " + path);
    idx.kernel.kind = static_cast<KernelConfig::Kind>(kind);
    idx.kernel.normalize = r.u8() != 0;
    idx.kernel.ssk_max_len = static_cast<int>(r.u32());
    idx.kernel.ssk_decay = r.f64();
    idx.kernel.ptk_mu = r.f64();
    idx.kernel.ptk_lambda = r.f64();
    idx.k = r.u32();
    std::uint32_t n = r.u32();
    idx.corpus_fingerprint = r.u64();
    idx.rows.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t len = r.u32();
        idx.rows[i].resize(len);
        for (std::uint32_t j = 0; j < len; ++j) {
            idx.rows[i][j].id = r.u32();
            idx.rows[i][j].sim = r.f64();
            if (idx.rows[i][j].id >= n) throw FormatError("neighbor id out of range in " + path);
        }
    }
    if (!r.exhausted()) throw FormatError("trailing bytes after index payload: " + path);
    return idx;
}

// Normal loading path: reject an index built from any other corpus.
inline NeighborIndex load_index(const std::string& path, const Corpus& corpus) {
    NeighborIndex idx = load_index(path);
    std::uint64_t expect = corpus_fingerprint(corpus);
    if (idx.corpus_fingerprint != expect) {
        throw FingerprintError("index " + path + " was built from a different corpus");
    }
    if (idx.rows.size() != corpus.size()) {
        throw FingerprintError("index row count does not match corpus size: " + path);
    }
    return idx;
}

// Softmax of the stored similarities at temperature eta, max-subtracted (lev
// similarities are large negative integers, so the shift is not optional).
// Probabilities are parallel to the anchor's row.
inline std::vector<double> relevance_distribution(const NeighborIndex& idx, std::size_t anchor,
                                                  const SamplerConfig& cfg) {
    cfg.validate();
    const auto& row = idx.rows.at(anchor);
    if (row.empty()) throw ConfigError("anchor " + std::to_string(anchor) + " has an empty neighbor row");
    double max_sim = row.front().sim;
    for (const auto& e : row) max_sim = std::max(max_sim, e.sim);
    std::vector<double> probs(row.size());
    double z = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        probs[i] = std::exp((row[i].sim - max_sim) / cfg.eta);
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    return probs;
}

// One meta-test draw for the given anchor: Bernoulli(lambda) chooses between
// the top-k relevance distribution and a uniform draw over the whole corpus
// (which may return the anchor itself). Empty rows and the uniform kernel
// degrade to the uniform branch.
inline std::size_t sample_meta_test(const NeighborIndex& idx, std::size_t anchor, const SamplerConfig& cfg,
                                    std::size_t corpus_size, Rng& rng) {
    cfg.validate();
    if (corpus_size < 2) throw ConfigError("meta-test sampling needs a corpus of at least 2 examples");
    const auto& row = idx.rows.at(anchor);
    if (idx.kernel.kind != KernelConfig::Kind::uniform && !row.empty() && rng.bernoulli(cfg.lambda)) {
        auto probs = relevance_distribution(idx, anchor, cfg);
        return row[rng.categorical(probs)].id;
    }
    return rng.uniform_below(corpus_size);
}

}  // namespace simaml
