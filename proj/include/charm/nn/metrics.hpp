#pragma once

/**
 * @file metrics.hpp
 * @brief Confusion matrix, per-class recall/precision/F1 and split evaluation.
 */

#include "charm/nn/abstain.hpp"
#include "charm/nn/train.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace charm::nn {

/**
 * @brief Counts indexed [true][predicted] over Clear, LTE, WiFi, Unknown.
 *
 * The Unknown row is only populated by interference examples; on the plain
 * test split it stays zero and the matrix reduces to true x 4 predictions.
 */
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 4>, 4> counts{};

    void add(TechClass truth, TechClass pred) { ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)]; }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& r : counts)
            for (auto c : r) n += c;
        return n;
    }
    std::size_t row_sum(std::size_t r) const {
        std::size_t n = 0;
        for (auto c : counts[r]) n += c;
        return n;
    }
    std::size_t col_sum(std::size_t c) const {
        std::size_t n = 0;
        for (const auto& r : counts) n += r[c];
        return n;
    }
};

struct ClassMetrics {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct Metrics {
    std::array<ClassMetrics, 4> per_class{}; ///< indexed by TechClass
    double accuracy = 0.0;                   ///< diagonal / total; abstentions on real classes are errors
    std::size_t abstained = 0;
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

/// Metrics derived from a confusion matrix; undefined ratios (0/0) are reported as 0.
inline Metrics compute_metrics(const ConfusionMatrix& cm) {
    Metrics m;
    std::size_t diag = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        const double tp = static_cast<double>(cm.counts[c][c]);
        auto& pc = m.per_class[c];
        pc.support = cm.row_sum(c);
        pc.recall = safe_ratio(tp, static_cast<double>(pc.support));
        pc.precision = safe_ratio(tp, static_cast<double>(cm.col_sum(c)));
        pc.f1 = safe_ratio(2.0 * pc.precision * pc.recall, pc.precision + pc.recall);
        diag += cm.counts[c][c];
    }
    m.accuracy = safe_ratio(static_cast<double>(diag), static_cast<double>(cm.total()));
    m.abstained = cm.col_sum(3);
    return m;
}

struct Evaluation {
    ConfusionMatrix confusion;
    Metrics metrics;
    std::vector<TechClass> predictions;
};

/// Confusion matrix and metrics from precomputed probabilities.
inline Evaluation evaluate_probs(const std::vector<ClassProbs>& probs, const std::vector<TechClass>& labels,
                                 const AbstainConfig& abstain) {
    if (probs.empty() || probs.size() != labels.size()) throw InvalidArgument("evaluate: split is empty");
    abstain.validate();
    Evaluation ev;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto pred = classify(probs[i], abstain);
        ev.predictions.push_back(pred);
        ev.confusion.add(labels[i], pred);
    }
    ev.metrics = compute_metrics(ev.confusion);
    return ev;
}

inline std::vector<ClassProbs> to_class_probs(const std::vector<std::array<double, kNumClasses>>& raw) {
    std::vector<ClassProbs> out;
    out.reserve(raw.size());
    for (const auto& p : raw) out.emplace_back(p);
    return out;
}

inline std::vector<TechClass> labels_of(const ExampleRefs& examples) {
    std::vector<TechClass> out;
    out.reserve(examples.size());
    for (const auto* ex : examples) out.push_back(ex->label);
    return out;
}

inline Evaluation evaluate(const ModelParams& params, const AbstainConfig& abstain, const ExampleRefs& split) {
    if (split.empty()) throw InvalidArgument("evaluate: split is empty");
    return evaluate_probs(to_class_probs(predict_probs(params, split)), labels_of(split), abstain);
}

inline AlphaTuning tune_alpha(const ModelParams& params, const ExampleRefs& test_alpha,
                              const std::vector<double>& grid = default_alpha_grid()) {
    return tune_alpha(to_class_probs(predict_probs(params, test_alpha)), labels_of(test_alpha), grid);
}

/// Confusion matrix as CSV with a header row of predicted classes.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "true\\pred,Clear,LTE,WiFi,Unknown\n";
    for (std::size_t r = 0; r < 4; ++r) {
        if (r == 3 && cm.row_sum(3) == 0) continue;
        out += std::string(to_string(tech_from_index(static_cast<std::uint16_t>(r))));
        for (auto c : cm.counts[r]) out += "," + std::to_string(c);
        out += "\n";
    }
    return out;
}

/// Per-class metrics as CSV plus an overall accuracy row.
inline std::string metrics_csv(const Metrics& m) {
    std::string out = "class,recall,precision,f1,support\n";
    for (std::size_t c = 0; c < 4; ++c) {
        if (c == 3 && m.per_class[3].support == 0) continue;
        const auto& pc = m.per_class[c];
        out += std::string(to_string(tech_from_index(static_cast<std::uint16_t>(c)))) + "," + format_double(pc.recall) +
               "," + format_double(pc.precision) + "," + format_double(pc.f1) + "," + std::to_string(pc.support) + "\n";
    }
    out += "accuracy," + format_double(m.accuracy) + ",,,\n";
    return out;
}

} // namespace charm::nn
