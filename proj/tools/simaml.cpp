// Command-line front end: data generation, index building, training with the
// multi-seed protocol, checkpoint evaluation, neighbor analysis, sweeps.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "simaml/config_json.hpp"
#include "simaml/harness.hpp"

namespace {

using namespace simaml;

// Flag values parsed by CLI11; only the ones the user actually set are
// applied on top of the config file, which itself overlays the defaults.
struct Flags {
    std::string config;
    std::optional<std::string> dataset, train_file, gen_file, kernel, mode, optimizer, index_cache, out_dir;
    std::optional<double> eta, lambda, alpha, outer_lr, dropout, ssk_decay, ptk_mu, ptk_lambda, gen_dev_fraction;
    std::optional<int> topk, steps, batch_size, hidden, ssk_max_len, eval_max_len, max_train, max_gen;
    std::optional<std::uint64_t> seed, synth_seed, gen_dev_seed;
    std::optional<std::string> seeds;  // comma separated
    bool first_order = false;
    bool no_normalize = false;
    bool sequential_seeds = false;
};

void add_common_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags override its values");
    cmd->add_option("--dataset", f.dataset, "synth | scan | cogs");
    cmd->add_option("--train-file", f.train_file, "training data file (scan/cogs)");
    cmd->add_option("--gen-file", f.gen_file, "generalization split file");
    cmd->add_option("--kernel", f.kernel, "lev | ssk | ptk | uniform");
    cmd->add_option("--eta", f.eta, "relevance softmax temperature");
    cmd->add_option("--lambda", f.lambda, "top-k vs uniform interpolation weight");
    cmd->add_option("--topk", f.topk, "neighbors stored per example");
    cmd->add_option("--alpha", f.alpha, "meta-train (inner) learning rate");
    cmd->add_option("--outer-lr", f.outer_lr, "final-update learning rate");
    cmd->add_option("--steps", f.steps, "training steps");
    cmd->add_option("--batch-size", f.batch_size, "examples per batch");
    cmd->add_option("--hidden", f.hidden, "model hidden size");
    cmd->add_option("--dropout", f.dropout, "dropout rate");
    cmd->add_flag("--first-order", f.first_order, "drop the second-order MAML term");
    cmd->add_option("--mode", f.mode, "supervised | maml");
    cmd->add_option("--optimizer", f.optimizer, "adam | sgd (final update)");
    cmd->add_option("--seed", f.seed, "single training seed");
    cmd->add_option("--seeds", f.seeds, "comma-separated seed list");
    cmd->add_option("--index-cache", f.index_cache, "neighbor index cache path");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--ssk-max-len", f.ssk_max_len, "max subsequence length");
    cmd->add_option("--ssk-decay", f.ssk_decay, "subsequence gap decay");
    cmd->add_option("--ptk-mu", f.ptk_mu, "tree kernel node decay");
    cmd->add_option("--ptk-lambda", f.ptk_lambda, "tree kernel child decay");
    cmd->add_flag("--no-normalize", f.no_normalize, "disable kernel normalization");
    cmd->add_option("--eval-max-len", f.eval_max_len, "decode length cap");
    cmd->add_option("--gen-dev-fraction", f.gen_dev_fraction, "Gen Dev share of the gen split");
    cmd->add_option("--gen-dev-seed", f.gen_dev_seed, "Gen Dev split seed");
    cmd->add_option("--synth-seed", f.synth_seed, "synthetic grammar seed");
    cmd->add_option("--max-train", f.max_train, "synthetic train size cap");
    cmd->add_option("--max-gen", f.max_gen, "synthetic gen size cap");
    cmd->add_flag("--sequential-seeds", f.sequential_seeds, "run seeds one after another");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw ConfigError(std::string("empty list for ") + what);
    return out;
}

RunSpec assemble_spec(const Flags& f) {
    RunSpec spec;
    if (!f.config.empty()) spec = load_spec_file(f.config);
    if (f.dataset) spec.dataset = *f.dataset;
    if (f.train_file) spec.train_file = *f.train_file;
    if (f.gen_file) spec.gen_file = *f.gen_file;
    if (f.kernel) spec.kernel.kind = kernel_kind_from_name(*f.kernel);
    if (f.eta) spec.sampler.eta = *f.eta;
    if (f.lambda) spec.sampler.lambda = *f.lambda;
    if (f.topk) spec.topk = static_cast<std::uint32_t>(*f.topk);
    if (f.alpha) spec.trainer.alpha = *f.alpha;
    if (f.outer_lr) spec.trainer.outer_lr = *f.outer_lr;
    if (f.steps) spec.trainer.steps = *f.steps;
    if (f.batch_size) spec.trainer.batch_size = *f.batch_size;
    if (f.hidden) spec.model.hidden = *f.hidden;
    if (f.dropout) spec.model.dropout = *f.dropout;
    if (f.first_order) spec.trainer.first_order = true;
    if (f.mode) {
        if (*f.mode != "maml" && *f.mode != "supervised") throw ConfigError("--mode must be maml or supervised");
        spec.trainer.mode = *f.mode == "maml" ? TrainerConfig::Mode::maml : TrainerConfig::Mode::supervised;
    }
    if (f.optimizer) {
        if (*f.optimizer != "adam" && *f.optimizer != "sgd") throw ConfigError("--optimizer must be adam or sgd");
        spec.trainer.optimizer = *f.optimizer == "adam" ? TrainerConfig::Outer::adam : TrainerConfig::Outer::sgd;
    }
    if (f.seed) spec.seeds = {*f.seed};
    if (f.seeds) spec.seeds = parse_seed_list(*f.seeds);
    if (f.index_cache) spec.index_cache = *f.index_cache;
    if (f.out_dir) spec.out_dir = *f.out_dir;
    if (f.ssk_max_len) spec.kernel.ssk_max_len = *f.ssk_max_len;
    if (f.ssk_decay) spec.kernel.ssk_decay = *f.ssk_decay;
    if (f.ptk_mu) spec.kernel.ptk_mu = *f.ptk_mu;
    if (f.ptk_lambda) spec.kernel.ptk_lambda = *f.ptk_lambda;
    if (f.no_normalize) spec.kernel.normalize = false;
    if (f.eval_max_len) spec.eval_max_len = *f.eval_max_len;
    if (f.gen_dev_fraction) spec.gen_dev_fraction = *f.gen_dev_fraction;
    if (f.gen_dev_seed) spec.gen_dev_seed = *f.gen_dev_seed;
    if (f.synth_seed) spec.synth_seed = *f.synth_seed;
    if (f.max_train) spec.synth.max_train = static_cast<std::size_t>(*f.max_train);
    if (f.max_gen) spec.synth.max_gen = static_cast<std::size_t>(*f.max_gen);
    if (f.sequential_seeds) spec.parallel_seeds = false;
    return spec;
}

void write_resolved_config(const RunSpec& spec) {
    if (spec.out_dir.empty()) return;
    std::filesystem::create_directories(spec.out_dir);
    write_text_file(spec.out_dir + "/resolved_config.json", spec_to_json(spec).dump(2) + "\n");
}

int cmd_gen_data(const Flags& f) {
    RunSpec spec = assemble_spec(f);
    if (spec.out_dir.empty()) throw ConfigError("gen-data needs --out-dir");
    auto [train, gen] = generate_synthetic(spec.synth, spec.synth_seed);
    std::filesystem::create_directories(spec.out_dir);
    save_cogs_tsv(train, spec.out_dir + "/train.tsv");
    save_cogs_tsv(gen, spec.out_dir + "/gen.tsv");
    write_resolved_config(spec);
    std::cout << "wrote " << train.size() << " train / " << gen.size() << " gen examples to " << spec.out_dir
              << "\n";
    return 0;
}

int cmd_build_index(const Flags& f) {
    RunSpec spec = assemble_spec(f);
    if (spec.index_cache.empty()) throw ConfigError("build-index needs --index-cache");
    spec.validate();
    LoadedData data = load_run_data(spec);
    NeighborIndex idx = build_index(data.train, spec.kernel, spec.topk, spec.dialect());
    if (auto parent = std::filesystem::path(spec.index_cache).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    save_index(idx, spec.index_cache);
    std::size_t stored = 0;
    for (const auto& row : idx.rows) stored += row.size();
    std::cout << "indexed " << idx.rows.size() << " examples (" << stored << " stored neighbors, kernel "
              << kernel_kind_name(idx.kernel.kind) << ") -> " << spec.index_cache << "\n";
    return 0;
}

int cmd_train(const Flags& f) {
    RunSpec spec = assemble_spec(f);
    spec.validate();
    write_resolved_config(spec);
    EvalReport report = run(spec);
    std::string summary = report_summary(report);
    if (!spec.out_dir.empty()) {
        write_text_file(spec.out_dir + "/report.json", report_to_json(report).dump(2) + "\n");
        write_text_file(spec.out_dir + "/summary.txt", summary);
    }
    std::cout << summary;
    return 0;
}

int cmd_eval(const Flags& f, const std::string& checkpoint) {
    RunSpec spec = assemble_spec(f);
    spec.validate();
    LoadedData data = load_run_data(spec);
    ModelParams params = load_checkpoint(checkpoint);

    EvalReport report;
    SeedReport sr;
    sr.seed = 0;
    sr.splits["train"] = evaluate(params, spec.model, data.train, data.train.source_vocab, data.train.target_vocab,
                                  spec.eval_max_len);
    if (data.has_gen) {
        sr.splits["gen"] = evaluate(params, spec.model, data.gen, data.train.source_vocab, data.train.target_vocab,
                                    spec.eval_max_len);
    }
    report.per_seed.push_back(sr);
    for (const auto& [split, ev] : sr.splits) {
        report.mean_accuracy[split] = ev.accuracy();
        report.std_accuracy[split] = 0.0;
    }
    std::string summary = report_summary(report);
    if (!spec.out_dir.empty()) {
        std::filesystem::create_directories(spec.out_dir);
        write_text_file(spec.out_dir + "/eval_report.json", report_to_json(report).dump(2) + "\n");
    }
    std::cout << summary;
    return 0;
}

int cmd_analyze(const Flags& f) {
    RunSpec spec = assemble_spec(f);
    spec.validate();
    LoadedData data = load_run_data(spec);
    NeighborIndex idx = obtain_index(spec, data.train);
    AnalysisTable table = analyze_neighbors(data.train, idx);

    std::cout << "kernel: " << table.kernel << "\n";
    std::cout << "k      mean_len  std_len   mean_atoms  std_atoms\n";
    char buf[120];
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%-6u %9.2f %8.2f %11.2f %10.2f\n", r.k, r.mean_len_chars, r.std_len_chars,
                      r.mean_atoms, r.std_atoms);
        std::cout << buf;
        jt.push_back({{"k", r.k},
                      {"mean_len_chars", r.mean_len_chars},
                      {"std_len_chars", r.std_len_chars},
                      {"mean_atoms", r.mean_atoms},
                      {"std_atoms", r.std_atoms}});
    }
    if (!spec.out_dir.empty()) {
        std::filesystem::create_directories(spec.out_dir);
        write_text_file(spec.out_dir + "/analysis.json",
                        nlohmann::json{{"kernel", table.kernel}, {"rows", jt}}.dump(2) + "\n");
    }
    return 0;
}

int cmd_sweep(const Flags& f, const std::string& eta_grid_csv, const std::string& alpha_grid_csv) {
    RunSpec spec = assemble_spec(f);
    spec.validate();
    auto etas = parse_double_list(eta_grid_csv, "--eta-grid");
    auto alphas = parse_double_list(alpha_grid_csv, "--alpha-grid");
    SweepResult sw = sweep(spec, etas, alphas);

    std::cout << "eta       alpha     gen_dev_mean  gen_dev_std\n";
    char buf[120];
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& e : sw.entries) {
        std::snprintf(buf, sizeof(buf), "%-9.4g %-9.4g %12.4f %12.4f\n", e.eta, e.alpha, e.gen_dev_mean,
                      e.gen_dev_std);
        std::cout << buf;
        jt.push_back({{"eta", e.eta}, {"alpha", e.alpha}, {"gen_dev_mean", e.gen_dev_mean}, {"gen_dev_std", e.gen_dev_std}});
    }
    std::snprintf(buf, sizeof(buf), "best: eta=%g alpha=%g (gen_dev %.4f)\n", sw.best.eta, sw.best.alpha,
                  sw.best.gen_dev_mean);
    std::cout << buf;
    if (!spec.out_dir.empty()) {
        std::filesystem::create_directories(spec.out_dir);
        write_text_file(spec.out_dir + "/sweep.json",
                        nlohmann::json{{"entries", jt},
                                       {"best", {{"eta", sw.best.eta}, {"alpha", sw.best.alpha}}}}
                                .dump(2) +
                            "\n");
        write_resolved_config(spec);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"similarity-driven meta-learning for compositional semantic parsing"};
    app.require_subcommand(1);

    Flags flags;
    std::string checkpoint, eta_grid, alpha_grid;

    CLI::App* gen_data = app.add_subcommand("gen-data", "emit the synthetic dataset as COGS-format TSV");
    add_common_flags(gen_data, flags);

    CLI::App* build_idx = app.add_subcommand("build-index", "precompute the top-k neighbor index");
    add_common_flags(build_idx, flags);

    CLI::App* train_cmd = app.add_subcommand("train", "train and evaluate over the seed protocol");
    add_common_flags(train_cmd, flags);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved checkpoint");
    add_common_flags(eval_cmd, flags);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

    CLI::App* analyze_cmd = app.add_subcommand("analyze", "neighbor length/atom diversity table");
    add_common_flags(analyze_cmd, flags);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid search eta/alpha on Gen Dev");
    add_common_flags(sweep_cmd, flags);
    sweep_cmd->add_option("--eta-grid", eta_grid, "comma-separated eta values")->required();
    sweep_cmd->add_option("--alpha-grid", alpha_grid, "comma-separated alpha values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen_data->parsed()) return cmd_gen_data(flags);
        if (build_idx->parsed()) return cmd_build_index(flags);
        if (train_cmd->parsed()) return cmd_train(flags);
        if (eval_cmd->parsed()) return cmd_eval(flags, checkpoint);
        if (analyze_cmd->parsed()) return cmd_analyze(flags);
        if (sweep_cmd->parsed()) return cmd_sweep(flags, eta_grid, alpha_grid);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const TruncatedError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const FingerprintError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
