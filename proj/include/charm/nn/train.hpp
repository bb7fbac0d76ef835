#pragma once

/**
 * @file train.hpp
 * @brief Adam optimiser, minibatch training with early stopping, and batched inference.
 */

#include "charm/dataset.hpp"
#include "charm/kvfile.hpp"
#include "charm/nn/model.hpp"
#include "charm/parallel.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace charm::nn {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::size_t patience = 20; ///< epochs without validation improvement before stopping
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw InvalidArgument("train: learning rate must be finite and non-negative");
        if (batch_size == 0) throw InvalidArgument("train: batch size must be at least 1");
        if (max_epochs == 0) throw InvalidArgument("train: max_epochs must be at least 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
            throw InvalidArgument("train: invalid Adam hyperparameters");
    }

    std::string canonical_text() const {
        KeyValueFile kv;
        kv.set("learning_rate", learning_rate);
        kv.set("batch_size", static_cast<std::uint64_t>(batch_size));
        kv.set("max_epochs", static_cast<std::uint64_t>(max_epochs));
        kv.set("patience", static_cast<std::uint64_t>(patience));
        kv.set("seed", seed);
        kv.set("beta1", beta1);
        kv.set("beta2", beta2);
        kv.set("epsilon", epsilon);
        return kv.to_text();
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
        : Error(ErrorKind::TrainingDiverged, what), history_(std::move(history)) {}
    const std::vector<EpochRecord>& history() const noexcept { return history_; }

private:
    std::vector<EpochRecord> history_;
};

/// Adam with bias correction; moments are kept in double.
class Adam {
public:
    Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    std::size_t steps() const { return t_; }

    template <class T>
    void step(std::span<T> params, std::span<const double> grad, double lr) {
        if (params.size() != m_.size() || grad.size() != m_.size()) throw InvalidArgument("adam: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] = static_cast<T>(static_cast<double>(params[i]) - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }

private:
    std::vector<double> m_, v_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

using ExampleRefs = std::vector<const LabeledExample*>;

inline std::size_t class_index(TechClass c) {
    if (c == TechClass::Unknown) throw InvalidArgument("train: Unknown is not a trainable label");
    return static_cast<std::size_t>(c);
}

/// Class probabilities for every example, evaluated in parallel.
inline std::vector<std::array<double, kNumClasses>> predict_probs(const ModelParams& params, const ExampleRefs& examples) {
    const Network<float> net(params.config);
    std::vector<std::array<double, kNumClasses>> out(examples.size());
    parallel_for(examples.size(), [&](std::size_t i) { out[i] = net.forward(params.values, examples[i]->iq); });
    return out;
}

inline std::size_t argmax(const std::array<double, kNumClasses>& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

/// Plain argmax accuracy (no abstention).
inline double argmax_accuracy(const ModelParams& params, const ExampleRefs& examples) {
    if (examples.empty()) throw InvalidArgument("accuracy: split is empty");
    const auto probs = predict_probs(params, examples);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < examples.size(); ++i)
        ok += examples[i]->label != TechClass::Unknown && argmax(probs[i]) == class_index(examples[i]->label);
    return static_cast<double>(ok) / static_cast<double>(examples.size());
}

struct TrainResult {
    ModelParams best;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_acc = -1.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/**
 * @brief Minibatch Adam training with early stopping on validation accuracy.
 *
 * Per-example gradients are computed (possibly in parallel) and summed in
 * batch order, so results do not depend on the worker count. The returned
 * parameters are those of the epoch with the highest validation accuracy
 * (earliest epoch on ties).
 */
inline TrainResult train(const ExampleRefs& train_set, const ExampleRefs& val_set, const ModelConfig& model_cfg,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    model_cfg.validate();
    if (train_set.empty() || val_set.empty()) throw InvalidArgument("train: splits must be non-empty");
    for (const auto* ex : train_set) {
        class_index(ex->label);
        if (ex->window_len() != model_cfg.input_len) throw InvalidArgument("train: window length does not match the model");
    }

    const Network<float> net(model_cfg);
    auto params = init_params(model_cfg, derive_seed(cfg.seed, {0x1417}));
    Adam adam(params.values.size(), cfg.beta1, cfg.beta2, cfg.epsilon);
    const auto shuffle_seed = derive_seed(cfg.seed, {0x5EF});

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    std::size_t since_best = 0;
    const auto n_params = params.values.size();
    std::vector<std::vector<float>> ex_grads(cfg.batch_size, std::vector<float>(n_params));
    std::vector<double> ex_loss(cfg.batch_size);
    std::vector<double> grad(n_params);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        for (const auto& batch : epoch_batches(order, cfg.batch_size, shuffle_seed, epoch)) {
            parallel_for(batch.size(), [&](std::size_t b) {
                auto& g = ex_grads[b];
                std::fill(g.begin(), g.end(), 0.0f);
                const auto* ex = train_set[batch[b]];
                ex_loss[b] = net.loss_and_grad(params.values, ex->iq, class_index(ex->label), g);
            });
            std::fill(grad.begin(), grad.end(), 0.0);
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (std::size_t b = 0; b < batch.size(); ++b) {
                loss_sum += ex_loss[b];
                for (std::size_t i = 0; i < n_params; ++i) grad[i] += static_cast<double>(ex_grads[b][i]) * inv;
            }
            if (!std::isfinite(loss_sum))
                throw TrainingDiverged("train: non-finite loss in epoch " + std::to_string(epoch), result.history);
            adam.step(std::span<float>(params.values), std::span<const double>(grad), cfg.learning_rate);
        }
        for (float v : params.values)
            if (!std::isfinite(v))
                throw TrainingDiverged("train: non-finite parameter after epoch " + std::to_string(epoch), result.history);

        EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()), argmax_accuracy(params, val_set)};
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (rec.val_acc > result.best_val_acc) {
            result.best_val_acc = rec.val_acc;
            result.best_epoch = epoch;
            result.best = params;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) break;
    }
    return result;
}

/// Training history as CSV: epoch,train_loss,val_acc.
inline std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,val_acc\n";
    for (const auto& r : history)
        out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_acc) + "\n";
    return out;
}

} // namespace charm::nn
