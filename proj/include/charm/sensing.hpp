#pragma once

/**
 * @file sensing.hpp
 * @brief Frequency-hopping sensing: round-robin schedule, window classification and map upkeep.
 */

#include "charm/dataset.hpp"
#include "charm/nn/abstain.hpp"
#include "charm/nn/model.hpp"
#include "charm/policy.hpp"
#include "charm/waveform.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace charm {

struct SensingConfig {
    std::vector<FrequencyHz> channels;
    double dwell_s = 1e-3;
    double retune_delay_s = 50e-3;
    unsigned debounce_m = 1;

    void validate() const {
        if (channels.empty()) throw InvalidArgument("sensing: channel list is empty");
        if (std::set<FrequencyHz>(channels.begin(), channels.end()).size() != channels.size())
            throw InvalidArgument("sensing: channels must be distinct");
        if (!(dwell_s > 0.0) || !std::isfinite(dwell_s)) throw InvalidArgument("sensing: dwell must be positive");
        if (!(retune_delay_s >= 0.0) || !std::isfinite(retune_delay_s))
            throw InvalidArgument("sensing: retune delay must be non-negative");
        if (debounce_m == 0) throw InvalidArgument("sensing: debounce_m must be at least 1");
    }

    /// Samples captured per visit.
    std::size_t dwell_samples(double sample_rate_hz) const { return samples_for(dwell_s, sample_rate_hz); }

    /// Lengthens the dwell to cover input_len samples if it is too short.
    SensingConfig fitted_to(std::size_t input_len, double sample_rate_hz) const {
        SensingConfig c = *this;
        if (c.dwell_samples(sample_rate_hz) < input_len) c.dwell_s = static_cast<double>(input_len) / sample_rate_hz;
        return c;
    }

    double visit_s() const { return retune_delay_s + dwell_s; }
    double sweep_s() const { return visit_s() * static_cast<double>(channels.size()); }
};

/// Strict round-robin over the channel list.
class SweepSchedule {
public:
    explicit SweepSchedule(std::vector<FrequencyHz> channels) : channels_(std::move(channels)) {
        if (channels_.empty()) throw InvalidArgument("sweep: channel list is empty");
    }

    FrequencyHz next_channel() {
        const auto f = channels_[pos_];
        pos_ = (pos_ + 1) % channels_.size();
        return f;
    }

    /// True when the next call starts a new sweep.
    bool at_sweep_start() const { return pos_ == 0; }

private:
    std::vector<FrequencyHz> channels_;
    std::size_t pos_ = 0;
};

struct SenseResult {
    FrequencyHz freq{};
    IQBuffer window;
    double t = 0.0; ///< capture start
    nn::ClassProbs probs{1.0, 0.0, 0.0};
    TechClass label = TechClass::Clear;
};

/// Probabilities for one capture window.
using WindowClassifier = std::function<nn::ClassProbs(const IQBuffer&)>;

/// Classifier backed by a trained network; uses the first input_len samples of each capture.
inline WindowClassifier network_classifier(nn::ModelParams params) {
    auto net = std::make_shared<nn::Network<float>>(params.config);
    auto shared = std::make_shared<nn::ModelParams>(std::move(params));
    return [net, shared](const IQBuffer& window) {
        const auto n = shared->config.input_len;
        if (window.size() < n) throw InvalidArgument("classifier: capture shorter than the model input");
        const auto iq = detail::window_to_floats(window.samples().first(n));
        return nn::ClassProbs(net->forward(shared->values, iq));
    };
}

/// Captured samples for a channel starting at time t.
using ChannelSource = std::function<IQBuffer(FrequencyHz, double t0, std::size_t n)>;

/**
 * @brief Visit one channel: retune, capture a dwell, classify.
 *
 * The capture starts at t + retune_delay_s; the caller's clock advances by
 * retune_delay_s + dwell_s.
 */
inline SenseResult sense(const ChannelSource& source, const SensingConfig& cfg, double sample_rate_hz, FrequencyHz freq,
                         double t, const WindowClassifier& classifier, const nn::AbstainConfig& abstain) {
    const double t0 = t + cfg.retune_delay_s;
    auto window = source(freq, t0, cfg.dwell_samples(sample_rate_hz));
    auto probs = classifier(window);
    const auto label = nn::classify(probs, abstain);
    return SenseResult{freq, std::move(window), t0, probs, label};
}

/// Per-channel run of consecutive identical labels for debouncing.
struct DebounceState {
    struct Run {
        TechClass label = TechClass::Clear;
        unsigned count = 0;
    };
    std::map<FrequencyHz, Run> runs;
};

/**
 * @brief Fold one result into the map.
 *
 * A channel's first label is adopted immediately. Afterwards the stored label
 * changes only once the last m results for that channel agree. The timestamp
 * is always refreshed.
 */
inline void update_map(ChannelClassMap& map, DebounceState& deb, FrequencyHz freq, TechClass label, double t,
                       unsigned debounce_m) {
    if (debounce_m == 0) throw InvalidArgument("update_map: debounce_m must be at least 1");
    auto& run = deb.runs[freq];
    if (run.count > 0 && run.label == label) ++run.count;
    else run = {label, 1};

    auto it = map.find(freq);
    if (it == map.end()) {
        map.emplace(freq, ChannelEntry{label, t});
        return;
    }
    if (run.count >= debounce_m) it->second.label = label;
    it->second.sensed_at_s = t;
}

inline void update_map(ChannelClassMap& map, DebounceState& deb, const SenseResult& r, unsigned debounce_m) {
    update_map(map, deb, r.freq, r.label, r.t, debounce_m);
}

} // namespace charm
