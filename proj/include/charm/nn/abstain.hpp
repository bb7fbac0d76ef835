#pragma once

/**
 * @file abstain.hpp
 * @brief Entropy score, the abstain rule and threshold tuning.
 */

#include "charm/nn/model.hpp"
#include "charm/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace charm::nn {

inline const double kLn3 = std::log(3.0);

/// Validated probability triple (Clear, LTE, WiFi).
class ClassProbs {
public:
    ClassProbs(double p0, double p1, double p2) : p_{p0, p1, p2} { check(); }
    explicit ClassProbs(const std::array<double, kNumClasses>& p) : p_(p) { check(); }

    double operator[](std::size_t i) const { return p_[i]; }
    const std::array<double, kNumClasses>& values() const { return p_; }

    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < kNumClasses; ++i)
            if (p_[i] > p_[best]) best = i;
        return best;
    }

private:
    void check() const {
        double sum = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("probabilities must lie in [0, 1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("probabilities must sum to 1");
    }

    std::array<double, kNumClasses> p_;
};

/**
 * @brief Shannon entropy in nats, with 0 ln 0 taken as 0.
 *
 * Exactly uniform input returns ln 3; any other input is capped just below
 * ln 3 so that rounding cannot make a non-uniform triple look maximal.
 */
inline double entropy(const ClassProbs& p) {
    if (p[0] == p[1] && p[1] == p[2]) return kLn3;
    double h = 0.0;
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    return std::clamp(h, 0.0, std::nextafter(kLn3, 0.0));
}

struct AbstainConfig {
    double alpha = 0.7;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= kLn3)) throw InvalidArgument("alpha must lie in (0, ln 3]");
    }
};

/// Argmax when the entropy is below alpha, otherwise Unknown.
inline TechClass classify(const ClassProbs& p, const AbstainConfig& cfg) {
    return entropy(p) < cfg.alpha ? tech_from_index(static_cast<std::uint16_t>(p.argmax())) : TechClass::Unknown;
}

/// 0.05, 0.10, ... up to ln 3, with ln 3 itself appended.
inline std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int k = 1; 0.05 * k <= kLn3; ++k) g.push_back(0.05 * k);
    g.push_back(kLn3);
    return g;
}

struct AlphaPoint {
    double alpha = 0.0;
    double accuracy = 0.0;
    std::size_t abstained = 0;
};

struct AlphaTuning {
    double alpha = 0.0;
    double accuracy = 0.0;
    std::vector<AlphaPoint> curve; ///< one point per grid value, in grid order
};

/**
 * @brief Pick the grid value with the highest accuracy on a labelled set.
 *
 * Unknown is the correct answer for examples labelled Unknown. Ties go to
 * the largest alpha.
 */
inline AlphaTuning tune_alpha(const std::vector<ClassProbs>& probs, const std::vector<TechClass>& labels,
                              const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidArgument("tune_alpha: grid is empty");
    if (probs.size() != labels.size() || probs.empty()) throw InvalidArgument("tune_alpha: need one label per prediction");
    std::vector<double> h(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) h[i] = entropy(probs[i]);

    AlphaTuning out;
    out.accuracy = -1.0;
    for (double a : grid) {
        AbstainConfig{a}.validate();
        std::size_t ok = 0, abstained = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const auto pred = h[i] < a ? tech_from_index(static_cast<std::uint16_t>(probs[i].argmax())) : TechClass::Unknown;
            ok += pred == labels[i];
            abstained += pred == TechClass::Unknown;
        }
        const double acc = static_cast<double>(ok) / static_cast<double>(probs.size());
        out.curve.push_back({a, acc, abstained});
        if (acc > out.accuracy || (acc == out.accuracy && a > out.alpha)) {
            out.accuracy = acc;
            out.alpha = a;
        }
    }
    return out;
}

} // namespace charm::nn
