#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simaml/corpus.hpp"
#include "simaml/errors.hpp"
#include "simaml/relevance.hpp"
#include "simaml/rng.hpp"
#include "simaml/seq2seq.hpp"
#include "simaml/tensor.hpp"

namespace simaml {

// One meta-learning episode: a uniformly drawn training batch and its
// similarity-matched generalization batch of the same size.
struct VirtualTask {
    std::vector<std::size_t> meta_train;  // B_t example ids
    std::vector<std::size_t> meta_test;   // B_g example ids, one per B_t element
};

struct TrainerConfig {
    enum class Mode { supervised, maml };
    enum class Outer { sgd, adam };

    Mode mode = Mode::maml;
    double alpha = 0.1;      // meta-train (inner) learning rate
    double outer_lr = 1e-3;  // final-update learning rate
    int steps = 1000;
    int batch_size = 128;
    bool first_order = false;
    Outer optimizer = Outer::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;  // global-norm clip on the final update
    std::uint64_t seed = 0;
    int checkpoint_every = 0;   // 0 = steps/10
    std::string out_dir;        // empty = keep checkpoints off disk

    void validate() const {
        if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
        if (!(outer_lr > 0.0)) throw ConfigError("outer_lr must be positive");
        if (steps < 1) throw ConfigError("steps must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    }
};

struct TrainLogEntry {
    int step = 0;
    double loss_meta_train = 0.0;
    double loss_meta_test = 0.0;
    double grad_norm = 0.0;
    std::int64_t wall_ms = 0;
};

struct TrainResult {
    ModelParams params;
    std::vector<TrainLogEntry> log;
};

// Algorithm lines 2-8: B_t uniform without replacement, then one meta-test
// draw per element (with replacement across elements).
inline VirtualTask make_virtual_task(const Corpus& corpus, const NeighborIndex& idx, const SamplerConfig& scfg,
                                     int batch_size, Rng& rng) {
    if (corpus.size() < static_cast<std::size_t>(batch_size)) {
        throw ConfigError("batch_size exceeds corpus size");
    }
    VirtualTask task;
    task.meta_train = rng.sample_without_replacement(corpus.size(), static_cast<std::size_t>(batch_size));
    task.meta_test.reserve(task.meta_train.size());
    for (std::size_t anchor : task.meta_train) {
        task.meta_test.push_back(sample_meta_test(idx, anchor, scfg, corpus.size(), rng));
    }
    return task;
}

struct InnerStepOut {
    ModelParams updated;  // theta'
    Tensor loss;          // L_Bt(theta)
};

// theta' = theta - alpha * grad L(theta), a plain SGD step regardless of the
// outer optimizer. With create_graph the update keeps its linkage to theta so
// the outer gradient can differentiate through it.
template <typename LossFn>
InnerStepOut inner_step_with(const ModelParams& params, LossFn&& loss_fn, double alpha, bool create_graph) {
    Tensor loss = loss_fn(params);
    auto grads = grad(loss, params.all(), create_graph);
    for (const auto& g : grads) {
        if (!g.value().allFinite()) throw NumericError("non-finite gradient in inner step");
    }
    InnerStepOut out;
    out.loss = loss;
    std::size_t i = 0;
    for (const auto& [name, theta] : params.tensors) {
        out.updated.tensors.emplace(name, sub(theta, mul_scalar(grads[i], alpha)));
        ++i;
    }
    return out;
}

inline InnerStepOut inner_step(const ModelParams& params, const Seq2SeqConfig& cfg, const Batch& meta_train,
                               double alpha, bool create_graph, Rng* dropout_rng = nullptr) {
    return inner_step_with(
        params, [&](const ModelParams& p) { return nll_loss(p, cfg, meta_train, dropout_rng); }, alpha, create_graph);
}

struct MetaObjective {
    Tensor total;  // L_Bt(theta) + L_Bg(theta')
    double loss_meta_train = 0.0;
    double loss_meta_test = 0.0;
};

// L_tau(theta) = L_Bt(theta) + L_Bg(theta - alpha grad L_Bt(theta)). With
// first_order the inner gradient is detached, dropping the Hessian term from
// the outer gradient.
inline MetaObjective meta_objective(const ModelParams& params, const Seq2SeqConfig& cfg, const Batch& meta_train,
                                    const Batch& meta_test, double alpha, bool first_order = false,
                                    Rng* dropout_rng = nullptr) {
    InnerStepOut inner = inner_step(params, cfg, meta_train, alpha, /*create_graph=*/!first_order, dropout_rng);
    Tensor l_bg = nll_loss(inner.updated, cfg, meta_test, dropout_rng);
    MetaObjective out;
    out.total = add(inner.loss, l_bg);
    out.loss_meta_train = inner.loss.scalar_value();
    out.loss_meta_test = l_bg.scalar_value();
    return out;
}

namespace detail_train {

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::int64_t t = 0;
};

inline double global_norm(const std::vector<Tensor>& grads) {
    double sq = 0.0;
    for (const auto& g : grads) sq += g.value().squaredNorm();
    return std::sqrt(sq);
}

// Final update on raw parameter storage; gradients are clipped by global
// norm first.
inline double apply_update(ModelParams& params, const std::vector<Tensor>& grads, const TrainerConfig& cfg,
                           AdamState& adam) {
    double norm = global_norm(grads);
    double scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

    if (cfg.optimizer == TrainerConfig::Outer::sgd) {
        std::size_t i = 0;
        for (auto& [name, theta] : params.tensors) {
            theta.mutable_value() -= cfg.outer_lr * scale * grads[i].value();
            ++i;
        }
        return norm;
    }

    if (adam.m.empty()) {
        for (const auto& g : grads) {
            adam.m.push_back(Matrix::Zero(g.rows(), g.cols()));
            adam.v.push_back(Matrix::Zero(g.rows(), g.cols()));
        }
    }
    ++adam.t;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
    std::size_t i = 0;
    for (auto& [name, theta] : params.tensors) {
        Matrix g = scale * grads[i].value();
        adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
        adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g.cwiseProduct(g);
        Matrix mhat = adam.m[i] / bias1;
        Matrix vhat = adam.v[i] / bias2;
        theta.mutable_value() -= cfg.outer_lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps)).matrix();
        ++i;
    }
    return norm;
}

}  // namespace detail_train

// Algorithm 1 (or, in supervised mode, plain one-batch training with the
// same budget). Single-threaded and deterministic in (configs, seed). The
// trainer sees only the training corpus; evaluation splits never enter here.
inline TrainResult train(const Corpus& corpus, const NeighborIndex* idx, const SamplerConfig& scfg,
                         const TrainerConfig& tcfg, const Seq2SeqConfig& mcfg) {
    tcfg.validate();
    mcfg.validate();
    scfg.validate();
    const bool maml = tcfg.mode == TrainerConfig::Mode::maml;
    if (maml) {
        if (idx == nullptr) throw ConfigError("maml mode needs a neighbor index");
        if (idx->corpus_fingerprint != corpus_fingerprint(corpus)) {
            throw FingerprintError("neighbor index does not match the training corpus");
        }
    }
    if (corpus.size() < static_cast<std::size_t>(tcfg.batch_size)) {
        throw ConfigError("batch_size exceeds corpus size");
    }

    Rng rng(tcfg.seed);
    ModelParams params =
        init_params(mcfg, corpus.source_vocab.size(), corpus.target_vocab.size(), rng.next_u64());
    Rng* dropout_rng = mcfg.dropout > 0.0 ? &rng : nullptr;

    detail_train::AdamState adam;
    TrainResult result;
    const int ckpt_every = tcfg.checkpoint_every > 0 ? tcfg.checkpoint_every : std::max(1, tcfg.steps / 10);
    const auto t0 = std::chrono::steady_clock::now();

    for (int step = 1; step <= tcfg.steps; ++step) {
        TrainLogEntry entry;
        entry.step = step;
        std::vector<Tensor> grads;

        if (maml) {
            VirtualTask task = make_virtual_task(corpus, *idx, scfg, tcfg.batch_size, rng);
            Batch bt = make_batch(corpus, task.meta_train);
            Batch bg = make_batch(corpus, task.meta_test);
            MetaObjective obj = meta_objective(params, mcfg, bt, bg, tcfg.alpha, tcfg.first_order, dropout_rng);
            if (!std::isfinite(obj.loss_meta_train) || !std::isfinite(obj.loss_meta_test)) {
                throw NumericError("non-finite loss at step " + std::to_string(step));
            }
            grads = grad(obj.total, params.all());
            entry.loss_meta_train = obj.loss_meta_train;
            entry.loss_meta_test = obj.loss_meta_test;
        } else {
            auto ids = rng.sample_without_replacement(corpus.size(), static_cast<std::size_t>(tcfg.batch_size));
            Batch batch = make_batch(corpus, ids);
            Tensor loss = nll_loss(params, mcfg, batch, dropout_rng);
            double lv = loss.scalar_value();
            if (!std::isfinite(lv)) throw NumericError("non-finite loss at step " + std::to_string(step));
            grads = grad(loss, params.all());
            entry.loss_meta_train = lv;
            entry.loss_meta_test = lv;
        }

        entry.grad_norm = detail_train::apply_update(params, grads, tcfg, adam);
        if (!std::isfinite(entry.grad_norm)) {
            throw NumericError("non-finite gradient norm at step " + std::to_string(step));
        }
        entry.wall_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(entry);

        if (!tcfg.out_dir.empty() && (step % ckpt_every == 0 || step == tcfg.steps)) {
            std::filesystem::create_directories(tcfg.out_dir);
            save_checkpoint(params, tcfg.out_dir + "/step_" + std::to_string(step) + ".ckpt");
        }
    }

    result.params = std::move(params);
    return result;
}

// Line-delimited structured training log, one record per step.
inline void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write training log: " + path);
    for (const auto& e : log) {
        out << "step=" << e.step << "\tloss_meta_train=" << e.loss_meta_train
            << "\tloss_meta_test=" << e.loss_meta_test << "\tgrad_norm=" << e.grad_norm << "\twall_ms=" << e.wall_ms
            << "\n";
    }
}

}  // namespace simaml
