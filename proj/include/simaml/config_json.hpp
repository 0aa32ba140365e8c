#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "simaml/harness.hpp"

namespace simaml {

// RunSpec <-> JSON. apply_json overlays only the keys present, so a config
// file amends the built-in defaults and CLI flags can overlay both.

inline nlohmann::json spec_to_json(const RunSpec& s) {
    nlohmann::json j;
    j["dataset"] = s.dataset;
    j["train_file"] = s.train_file;
    j["gen_file"] = s.gen_file;
    j["synth"] = {{"nouns", s.synth.nouns},
                  {"verbs", s.synth.verbs},
                  {"preps", s.synth.preps},
                  {"template_svo", s.synth.template_svo},
                  {"template_svo_pp", s.synth.template_svo_pp},
                  {"holdout_pairs", s.synth.holdout_pairs},
                  {"include_primitives", s.synth.include_primitives},
                  {"max_train", s.synth.max_train},
                  {"max_gen", s.synth.max_gen},
                  {"seed", s.synth_seed}};
    j["kernel"] = {{"kind", kernel_kind_name(s.kernel.kind)}, {"ssk_max_len", s.kernel.ssk_max_len},
                   {"ssk_decay", s.kernel.ssk_decay},         {"ptk_mu", s.kernel.ptk_mu},
                   {"ptk_lambda", s.kernel.ptk_lambda},       {"normalize", s.kernel.normalize}};
    j["sampler"] = {{"eta", s.sampler.eta}, {"lambda", s.sampler.lambda}};
    j["trainer"] = {{"mode", s.trainer.mode == TrainerConfig::Mode::maml ? "maml" : "supervised"},
                    {"alpha", s.trainer.alpha},
                    {"outer_lr", s.trainer.outer_lr},
                    {"steps", s.trainer.steps},
                    {"batch_size", s.trainer.batch_size},
                    {"first_order", s.trainer.first_order},
                    {"optimizer", s.trainer.optimizer == TrainerConfig::Outer::adam ? "adam" : "sgd"},
                    {"clip_norm", s.trainer.clip_norm},
                    {"checkpoint_every", s.trainer.checkpoint_every}};
    j["model"] = {{"arch", s.model.arch == Seq2SeqConfig::Arch::lstm ? "lstm" : "transformer"},
                  {"hidden", s.model.hidden},
                  {"embed", s.model.embed},
                  {"encoder_layers", s.model.encoder_layers},
                  {"decoder_layers", s.model.decoder_layers},
                  {"tf_layers", s.model.tf_layers},
                  {"tf_heads", s.model.tf_heads},
                  {"tf_ff", s.model.tf_ff},
                  {"dropout", s.model.dropout},
                  {"init_range", s.model.init_range}};
    j["seeds"] = s.seeds;
    j["gen_dev_fraction"] = s.gen_dev_fraction;
    j["gen_dev_seed"] = s.gen_dev_seed;
    j["topk"] = s.topk;
    j["index_cache"] = s.index_cache;
    j["out_dir"] = s.out_dir;
    j["eval_max_len"] = s.eval_max_len;
    j["parallel_seeds"] = s.parallel_seeds;
    return j;
}

namespace detail_cfg {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& slot) {
    if (j.contains(key)) slot = j.at(key).get<T>();
}

}  // namespace detail_cfg

inline void apply_json(const nlohmann::json& j, RunSpec& s) {
    using detail_cfg::maybe;
    maybe(j, "dataset", s.dataset);
    maybe(j, "train_file", s.train_file);
    maybe(j, "gen_file", s.gen_file);
    if (j.contains("synth")) {
        const auto& js = j.at("synth");
        maybe(js, "nouns", s.synth.nouns);
        maybe(js, "verbs", s.synth.verbs);
        maybe(js, "preps", s.synth.preps);
        maybe(js, "template_svo", s.synth.template_svo);
        maybe(js, "template_svo_pp", s.synth.template_svo_pp);
        maybe(js, "holdout_pairs", s.synth.holdout_pairs);
        maybe(js, "include_primitives", s.synth.include_primitives);
        maybe(js, "max_train", s.synth.max_train);
        maybe(js, "max_gen", s.synth.max_gen);
        maybe(js, "seed", s.synth_seed);
    }
    if (j.contains("kernel")) {
        const auto& jk = j.at("kernel");
        if (jk.contains("kind")) s.kernel.kind = kernel_kind_from_name(jk.at("kind").get<std::string>());
        maybe(jk, "ssk_max_len", s.kernel.ssk_max_len);
        maybe(jk, "ssk_decay", s.kernel.ssk_decay);
        maybe(jk, "ptk_mu", s.kernel.ptk_mu);
        maybe(jk, "ptk_lambda", s.kernel.ptk_lambda);
        maybe(jk, "normalize", s.kernel.normalize);
    }
    if (j.contains("sampler")) {
        const auto& js = j.at("sampler");
        maybe(js, "eta", s.sampler.eta);
        maybe(js, "lambda", s.sampler.lambda);
    }
    if (j.contains("trainer")) {
        const auto& jt = j.at("trainer");
        if (jt.contains("mode")) {
            std::string m = jt.at("mode").get<std::string>();
            if (m != "maml" && m != "supervised") throw ConfigError("trainer.mode must be maml or supervised");
            s.trainer.mode = m == "maml" ? TrainerConfig::Mode::maml : TrainerConfig::Mode::supervised;
        }
        maybe(jt, "alpha", s.trainer.alpha);
        maybe(jt, "outer_lr", s.trainer.outer_lr);
        maybe(jt, "steps", s.trainer.steps);
        maybe(jt, "batch_size", s.trainer.batch_size);
        maybe(jt, "first_order", s.trainer.first_order);
        if (jt.contains("optimizer")) {
            std::string o = jt.at("optimizer").get<std::string>();
            if (o != "adam" && o != "sgd") throw ConfigError("trainer.optimizer must be adam or sgd");
            s.trainer.optimizer = o == "adam" ? TrainerConfig::Outer::adam : TrainerConfig::Outer::sgd;
        }
        maybe(jt, "clip_norm", s.trainer.clip_norm);
        maybe(jt, "checkpoint_every", s.trainer.checkpoint_every);
    }
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        if (jm.contains("arch")) {
            std::string a = jm.at("arch").get<std::string>();
            if (a != "lstm" && a != "transformer") throw ConfigError("model.arch must be lstm or transformer");
            s.model.arch = a == "lstm" ? Seq2SeqConfig::Arch::lstm : Seq2SeqConfig::Arch::transformer;
        }
        maybe(jm, "hidden", s.model.hidden);
        maybe(jm, "embed", s.model.embed);
        maybe(jm, "encoder_layers", s.model.encoder_layers);
        maybe(jm, "decoder_layers", s.model.decoder_layers);
        maybe(jm, "tf_layers", s.model.tf_layers);
        maybe(jm, "tf_heads", s.model.tf_heads);
        maybe(jm, "tf_ff", s.model.tf_ff);
        maybe(jm, "dropout", s.model.dropout);
        maybe(jm, "init_range", s.model.init_range);
    }
    maybe(j, "seeds", s.seeds);
    maybe(j, "gen_dev_fraction", s.gen_dev_fraction);
    maybe(j, "gen_dev_seed", s.gen_dev_seed);
    maybe(j, "topk", s.topk);
    maybe(j, "index_cache", s.index_cache);
    maybe(j, "out_dir", s.out_dir);
    maybe(j, "eval_max_len", s.eval_max_len);
    maybe(j, "parallel_seeds", s.parallel_seeds);
}

inline RunSpec load_spec_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad config file " + path + ": " + e.what());
    }
    RunSpec spec;
    apply_json(j, spec);
    return spec;
}

}  // namespace simaml
