#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "simaml/corpus.hpp"
#include "simaml/errors.hpp"
#include "simaml/maml.hpp"
#include "simaml/relevance.hpp"
#include "simaml/synth.hpp"

namespace simaml {

// Everything one experiment needs: data source, kernel, sampler, trainer,
// model, and the evaluation protocol knobs.
struct RunSpec {
    std::string dataset = "synth";  // synth | scan | cogs
    std::string train_file;
    std::string gen_file;
    SynthConfig synth;
    std::uint64_t synth_seed = 7;

    KernelConfig kernel;
    SamplerConfig sampler;
    TrainerConfig trainer;
    Seq2SeqConfig model = Seq2SeqConfig::desk();

    std::vector<std::uint64_t> seeds = {1};
    double gen_dev_fraction = 0.1;
    std::uint64_t gen_dev_seed = 1234;
    std::uint32_t topk = 1000;
    std::string index_cache;
    std::string out_dir;
    int eval_max_len = 128;
    bool parallel_seeds = true;

    void validate() const {
        if (dataset != "synth" && dataset != "scan" && dataset != "cogs") {
            throw ConfigError("dataset must be synth, scan or cogs");
        }
        if (dataset != "synth" && train_file.empty()) throw ConfigError("dataset " + dataset + " needs --train-file");
        if (seeds.empty()) throw ConfigError("need at least one seed");
        if (!(gen_dev_fraction > 0.0 && gen_dev_fraction < 1.0)) {
            throw ConfigError("gen_dev_fraction must be in (0, 1)");
        }
        if (dataset == "scan" && kernel.kind == KernelConfig::Kind::ptk) {
            throw ConfigError("ptk needs tree-structured targets; SCAN action sequences have none");
        }
        kernel.validate();
        sampler.validate();
        trainer.validate();
        model.validate();
    }

    LfDialect dialect() const { return dataset == "synth" ? LfDialect::synth : LfDialect::cogs; }
};

struct TagStat {
    int correct = 0;
    int total = 0;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct SplitEval {
    int correct = 0;
    int total = 0;
    std::map<std::string, TagStat> per_tag;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct SeedReport {
    std::uint64_t seed = 0;
    std::map<std::string, SplitEval> splits;
    double final_loss = 0.0;
};

struct EvalReport {
    std::vector<SeedReport> per_seed;
    std::map<std::string, double> mean_accuracy;
    std::map<std::string, double> std_accuracy;
};

// Exact-match evaluation: a prediction counts only when the full decoded
// token sequence equals the reference. Vocabularies come from the training
// corpus; evaluation corpora may use any subset of its atoms.
inline SplitEval evaluate(const ModelParams& params, const Seq2SeqConfig& cfg, const Corpus& eval_corpus,
                          const Vocab& src_vocab, const Vocab& tgt_vocab, int max_len) {
    SplitEval out;
    for (const auto& e : eval_corpus.examples) {
        auto pred = decode_greedy(params, cfg, e.source, src_vocab, tgt_vocab, max_len);
        bool ok = pred == e.target;
        ++out.total;
        out.correct += ok ? 1 : 0;
        TagStat& ts = out.per_tag[e.tag.empty() ? "untagged" : e.tag];
        ++ts.total;
        ts.correct += ok ? 1 : 0;
    }
    return out;
}

// Seeded uniform split of the generalization set; the small side is the Gen
// Dev subset used solely for hyperparameter selection.
inline std::pair<Corpus, Corpus> make_gen_dev(const Corpus& gen, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("gen_dev fraction must be in (0, 1)");
    std::size_t dev_n = static_cast<std::size_t>(fraction * static_cast<double>(gen.size()));
    if (dev_n == 0 || dev_n >= gen.size()) {
        throw ConfigError("gen_dev fraction yields an empty split side");
    }
    Rng rng(seed);
    std::vector<std::size_t> order(gen.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<Example> dev, rest;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < dev_n ? dev : rest).push_back(gen.examples[order[i]]);
    }
    return {detail::finalize_corpus(gen.name + "-dev", std::move(dev)),
            detail::finalize_corpus(gen.name + "-rest", std::move(rest))};
}

struct LoadedData {
    Corpus train;
    Corpus gen;     // empty when no generalization file was given
    bool has_gen = false;
};

inline LoadedData load_run_data(const RunSpec& spec) {
    LoadedData d;
    if (spec.dataset == "synth") {
        auto [train, gen] = generate_synthetic(spec.synth, spec.synth_seed);
        d.train = std::move(train);
        d.gen = std::move(gen);
        d.has_gen = true;
        return d;
    }
    d.train = spec.dataset == "scan" ? load_scan(spec.train_file) : load_cogs(spec.train_file);
    if (!spec.gen_file.empty()) {
        d.gen = spec.dataset == "scan" ? load_scan(spec.gen_file) : load_cogs(spec.gen_file);
        d.has_gen = true;
    }
    return d;
}

// Build the neighbor index, going through the on-disk cache when a path is
// configured. Cached indexes are fingerprint-checked against the corpus.
inline NeighborIndex obtain_index(const RunSpec& spec, const Corpus& train) {
    if (!spec.index_cache.empty() && std::filesystem::exists(spec.index_cache)) {
        return load_index(spec.index_cache, train);
    }
    NeighborIndex idx = build_index(train, spec.kernel, spec.topk, spec.dialect());
    if (!spec.index_cache.empty()) {
        if (auto parent = std::filesystem::path(spec.index_cache).parent_path(); !parent.empty()) {
            std::filesystem::create_directories(parent);
        }
        save_index(idx, spec.index_cache);
    }
    return idx;
}

// Full multi-seed protocol: per seed, train from scratch on the training
// corpus only, then evaluate. Gen Dev is reported so sweeps can select on it
// with dev seeds; the disjoint test-seed runs read the gen split.
inline EvalReport run(const RunSpec& spec) {
    spec.validate();
    LoadedData data = load_run_data(spec);

    NeighborIndex idx;
    const bool needs_index = spec.trainer.mode == TrainerConfig::Mode::maml;
    if (needs_index) idx = obtain_index(spec, data.train);

    Corpus gen_dev, gen_rest;
    if (data.has_gen) {
        auto split = make_gen_dev(data.gen, spec.gen_dev_fraction, spec.gen_dev_seed);
        gen_dev = std::move(split.first);
        gen_rest = std::move(split.second);
    }

    // deterministic train-accuracy probe subset
    Corpus train_probe;
    {
        std::vector<Example> subset(data.train.examples.begin(),
                                    data.train.examples.begin() +
                                        static_cast<std::ptrdiff_t>(std::min<std::size_t>(200, data.train.size())));
        train_probe = detail::finalize_corpus("train-probe", std::move(subset));
    }

    auto run_seed = [&](std::uint64_t seed) -> SeedReport {
        TrainerConfig tcfg = spec.trainer;
        tcfg.seed = seed;
        if (!spec.out_dir.empty()) tcfg.out_dir = spec.out_dir + "/seed_" + std::to_string(seed);
        TrainResult res = train(data.train, needs_index ? &idx : nullptr, spec.sampler, tcfg, spec.model);

        SeedReport sr;
        sr.seed = seed;
        sr.final_loss = res.log.empty() ? 0.0 : res.log.back().loss_meta_train;
        sr.splits["train"] = evaluate(res.params, spec.model, train_probe, data.train.source_vocab,
                                      data.train.target_vocab, spec.eval_max_len);
        if (data.has_gen) {
            sr.splits["gen_dev"] = evaluate(res.params, spec.model, gen_dev, data.train.source_vocab,
                                            data.train.target_vocab, spec.eval_max_len);
            sr.splits["gen"] = evaluate(res.params, spec.model, gen_rest, data.train.source_vocab,
                                        data.train.target_vocab, spec.eval_max_len);
        }
        if (!spec.out_dir.empty()) {
            std::filesystem::create_directories(tcfg.out_dir);
            save_train_log(res.log, tcfg.out_dir + "/train_log.tsv");
            save_checkpoint(res.params, tcfg.out_dir + "/final.ckpt");
        }
        return sr;
    };

    EvalReport report;
    if (spec.parallel_seeds && spec.seeds.size() > 1) {
        std::vector<std::future<SeedReport>> futs;
        futs.reserve(spec.seeds.size());
        for (std::uint64_t seed : spec.seeds) {
            futs.push_back(std::async(std::launch::async, run_seed, seed));
        }
        for (auto& f : futs) report.per_seed.push_back(f.get());
    } else {
        for (std::uint64_t seed : spec.seeds) report.per_seed.push_back(run_seed(seed));
    }

    // aggregate; population std so single-seed runs report 0
    std::map<std::string, std::vector<double>> by_split;
    for (const auto& sr : report.per_seed) {
        for (const auto& [split, ev] : sr.splits) by_split[split].push_back(ev.accuracy());
    }
    for (const auto& [split, accs] : by_split) {
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        var /= static_cast<double>(accs.size());
        report.mean_accuracy[split] = mean;
        report.std_accuracy[split] = std::sqrt(var);
    }
    return report;
}

// ---------------------------------------------------------------------------
// kernel-diversity analysis
// ---------------------------------------------------------------------------

struct AnalysisRow {
    std::uint32_t k = 0;
    double mean_len_chars = 0.0;
    double std_len_chars = 0.0;
    double mean_atoms = 0.0;
    double std_atoms = 0.0;
};

struct AnalysisTable {
    std::string kernel;
    std::vector<AnalysisRow> rows;
};

// For each anchor: mean character length of its top-k neighbors, and how
// many of them are single-word atoms that occur in the anchor (source or
// formal side). Mirrors the neighbor-diversity table shape.
inline AnalysisTable analyze_neighbors(const Corpus& corpus, const NeighborIndex& idx,
                                       const std::vector<std::uint32_t>& top_k_list = {10, 100, 1000}) {
    AnalysisTable table;
    table.kernel = kernel_kind_name(idx.kernel.kind);
    for (std::uint32_t k : top_k_list) {
        std::vector<double> lens, atom_counts;
        for (std::size_t anchor = 0; anchor < idx.rows.size(); ++anchor) {
            const auto& row = idx.rows[anchor];
            if (row.empty()) continue;
            const Example& a = corpus.examples[anchor];
            std::set<std::string> anchor_words(a.source.begin(), a.source.end());
            anchor_words.insert(a.target.begin(), a.target.end());
            std::size_t take = std::min<std::size_t>(k, row.size());
            double atoms = 0.0;
            for (std::size_t i = 0; i < take; ++i) {
                const Example& n = corpus.examples[row[i].id];
                lens.push_back(static_cast<double>(join(n.source).size()));
                if (n.source.size() == 1 && anchor_words.count(n.source[0])) atoms += 1.0;
            }
            atom_counts.push_back(atoms);
        }
        if (lens.empty()) continue;  // no neighbors anywhere (single-example corpus)
        auto mean_std = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            return std::pair<double, double>(mean, std::sqrt(var));
        };
        AnalysisRow r;
        r.k = k;
        std::tie(r.mean_len_chars, r.std_len_chars) = mean_std(lens);
        std::tie(r.mean_atoms, r.std_atoms) = mean_std(atom_counts);
        table.rows.push_back(r);
    }
    return table;
}

// ---------------------------------------------------------------------------
// report serialization (machine-readable JSON + a plain-text table)
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["mean_accuracy"] = report.mean_accuracy;
    j["std_accuracy"] = report.std_accuracy;
    j["per_seed"] = nlohmann::json::array();
    for (const auto& sr : report.per_seed) {
        nlohmann::json js;
        js["seed"] = sr.seed;
        js["final_loss"] = sr.final_loss;
        for (const auto& [split, ev] : sr.splits) {
            nlohmann::json je;
            je["correct"] = ev.correct;
            je["total"] = ev.total;
            je["accuracy"] = ev.accuracy();
            nlohmann::json jt;
            for (const auto& [tag, ts] : ev.per_tag) {
                jt[tag] = {{"correct", ts.correct}, {"total", ts.total}, {"accuracy", ts.accuracy()}};
            }
            je["per_tag"] = jt;
            js["splits"][split] = je;
        }
        j["per_seed"].push_back(js);
    }
    return j;
}

inline std::string report_summary(const EvalReport& report) {
    std::string out;
    char buf[160];
    out += "split        mean_acc   std      seeds\n";
    for (const auto& [split, mean] : report.mean_accuracy) {
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f   ", split.c_str(), mean, report.std_accuracy.at(split));
        out += buf;
        for (const auto& sr : report.per_seed) {
            auto it = sr.splits.find(split);
            if (it != sr.splits.end()) {
                std::snprintf(buf, sizeof(buf), "%llu:%.4f ", static_cast<unsigned long long>(sr.seed),
                              it->second.accuracy());
                out += buf;
            }
        }
        out += "\n";
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write file: " + path);
    f << contents;
}

// ---------------------------------------------------------------------------
// hyperparameter sweep on Gen Dev (dev seeds only)
// ---------------------------------------------------------------------------

struct SweepEntry {
    double eta = 0.0;
    double alpha = 0.0;
    double gen_dev_mean = 0.0;
    double gen_dev_std = 0.0;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    SweepEntry best;
};

// Grid over (eta, alpha), scored exclusively by Gen Dev accuracy with the
// spec's (dev) seeds. Final numbers must come from a later run with disjoint
// seeds; this function never reads the gen split.
inline SweepResult sweep(const RunSpec& base, const std::vector<double>& eta_grid,
                         const std::vector<double>& alpha_grid) {
    if (eta_grid.empty() || alpha_grid.empty()) throw ConfigError("sweep grids must be non-empty");
    SweepResult result;
    for (double eta : eta_grid) {
        for (double alpha : alpha_grid) {
            RunSpec spec = base;
            spec.sampler.eta = eta;
            spec.trainer.alpha = alpha;
            spec.out_dir.clear();  // sweeps do not persist checkpoints
            EvalReport rep = run(spec);
            SweepEntry e;
            e.eta = eta;
            e.alpha = alpha;
            e.gen_dev_mean = rep.mean_accuracy.count("gen_dev") ? rep.mean_accuracy.at("gen_dev") : 0.0;
            e.gen_dev_std = rep.std_accuracy.count("gen_dev") ? rep.std_accuracy.at("gen_dev") : 0.0;
            result.entries.push_back(e);
        }
    }
    result.best = result.entries.front();
    for (const auto& e : result.entries) {
        if (e.gen_dev_mean > result.best.gen_dev_mean) result.best = e;
    }
    return result;
}

}  // namespace simaml
