#pragma once

/**
 * @file simulator.hpp
 * @brief Deterministic discrete-event simulation of a sensing node on a multi-channel band.
 *
 * Time is kept in integer nanoseconds so that event ordering and the fixed
 * handover latency are exact. Trace timestamps are reported in seconds.
 */

#include "charm/nn/checkpoint.hpp"
#include "charm/nn/metrics.hpp"
#include "charm/policy.hpp"
#include "charm/sensing.hpp"
#include "charm/waveform.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

namespace charm::sim {

using Ticks = std::int64_t; ///< nanoseconds

inline Ticks to_ticks(double s) { return static_cast<Ticks>(std::llround(s * 1e9)); }
inline double to_seconds(Ticks t) { return static_cast<double>(t) * 1e-9; }

struct Transmitter {
    TechClass tech = TechClass::WiFi;
    TrafficPattern traffic = TrafficPattern::BurstyLowTput;
    FrequencyHz channel{};
    double start_s = 0.0;
    double stop_s = 0.0;
    double gain_db = 20.0; ///< in-burst power over the noise floor

    bool active_at(double t) const { return t >= start_s && t < stop_s; }
    bool overlaps(double a, double b) const { return start_s < b && a < stop_s; }
};

struct NodeConfig {
    FrequencyHz initial_channel{};
    PolicyRanking ranking = PolicyRanking::preset_a();
    SensingConfig sensing;
    double alpha = 0.7;
    std::filesystem::path checkpoint;
    bool oracle_classifier = false; ///< label captures from the script instead of the network
    double own_gain_db = 20.0;
};

struct Scenario {
    double duration_s = 60.0;
    double sample_rate_hz = 2e6;
    std::vector<FrequencyHz> channels;
    double noise_floor = 1.0;
    std::vector<Transmitter> transmitters;
    NodeConfig node;
    double handover_latency_s = 50e-3;
    double ping_interval_s = 0.1;
    double sinr_threshold_db = 3.0;
    double coex_suppression_db = 20.0; ///< interference reduction from an active coexistence scheme
    double lag_cap_s = 5.0;            ///< longest reaction excluded from the optimality score
    std::uint64_t seed = 1;

    std::size_t channel_index(FrequencyHz f) const {
        for (std::size_t i = 0; i < channels.size(); ++i)
            if (channels[i] == f) return i;
        throw InvalidArgument("scenario: frequency " + std::to_string(f.hz) + " Hz is not a configured channel");
    }

    void validate() const {
        if (!(duration_s > 0.0)) throw InvalidArgument("scenario: duration must be positive");
        if (!(sample_rate_hz > 0.0)) throw InvalidArgument("scenario: sample rate must be positive");
        if (!(noise_floor > 0.0)) throw InvalidArgument("scenario: noise floor must be positive");
        if (!(handover_latency_s >= 0.0)) throw InvalidArgument("scenario: handover latency must be non-negative");
        if (!(ping_interval_s > 0.0)) throw InvalidArgument("scenario: ping interval must be positive");
        if (!(lag_cap_s >= 0.0)) throw InvalidArgument("scenario: lag cap must be non-negative");
        if (channels.empty()) throw InvalidArgument("scenario: no channels");
        auto s = node.sensing;
        s.channels = channels;
        s.validate();
        channel_index(node.initial_channel);
        for (const auto& tx : transmitters) {
            channel_index(tx.channel);
            if (!(tx.start_s < tx.stop_s)) throw InvalidArgument("scenario: transmitter start must precede stop");
            if (tx.tech != TechClass::LTE && tx.tech != TechClass::WiFi)
                throw InvalidArgument("scenario: transmitters must be LTE or WiFi");
        }
        nn::AbstainConfig{node.alpha}.validate();
    }
};

// ----------------------------------------------------------------- loading

namespace detail {

template <class T>
T yaml_get(const YAML::Node& n, const char* key, T fallback) {
    if (!n || !n[key]) return fallback;
    try {
        return n[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("scenario: bad value for '") + key + "': " + e.what());
    }
}

template <class T>
T yaml_req(const YAML::Node& n, const char* key) {
    if (!n || !n[key]) throw SchemaError(std::string("scenario: missing '") + key + "'");
    return yaml_get<T>(n, key, T{});
}

inline PolicyRanking parse_ranking(const YAML::Node& n) {
    if (!n) return PolicyRanking::preset_a();
    if (n.IsScalar()) return PolicyRanking::preset(n.as<std::string>());
    if (!n.IsMap()) throw SchemaError("scenario: ranking must be a preset name or a class table");
    PolicyRanking r;
    for (auto c : kAllTechClasses) {
        const auto key = std::string(to_string(c));
        if (!n[key]) throw SchemaError("scenario: ranking table is missing " + key);
        r.rank[static_cast<std::size_t>(c)] = n[key].as<int>();
    }
    return r;
}

} // namespace detail

/// Parse a scenario from YAML text. Relative checkpoint paths resolve against base_dir.
inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {}) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
    using detail::yaml_get;
    using detail::yaml_req;
    Scenario sc;
    try {
        const auto sim = root["simulation"];
        sc.duration_s = yaml_req<double>(sim, "duration_s");
        sc.sample_rate_hz = yaml_get(sim, "sample_rate_hz", sc.sample_rate_hz);
        sc.seed = yaml_get<std::uint64_t>(sim, "seed", sc.seed);
        sc.noise_floor = yaml_get(sim, "noise_floor", sc.noise_floor);
        sc.handover_latency_s = yaml_get(sim, "handover_latency_s", sc.handover_latency_s);
        sc.ping_interval_s = yaml_get(sim, "ping_interval_s", sc.ping_interval_s);
        sc.sinr_threshold_db = yaml_get(sim, "sinr_threshold_db", sc.sinr_threshold_db);
        sc.coex_suppression_db = yaml_get(sim, "coex_suppression_db", sc.coex_suppression_db);
        sc.lag_cap_s = yaml_get(sim, "lag_cap_s", sc.lag_cap_s);

        if (!root["channels"] || !root["channels"].IsSequence()) throw SchemaError("scenario: missing channel list");
        for (const auto& c : root["channels"]) sc.channels.push_back(frequency_from_double(c.as<double>()));

        for (const auto& t : root["transmitters"]) {
            Transmitter tx;
            tx.tech = parse_tech(yaml_req<std::string>(t, "tech"));
            tx.traffic = parse_traffic(yaml_get<std::string>(t, "traffic", "BurstyLowTput"));
            tx.channel = frequency_from_double(yaml_req<double>(t, "channel"));
            tx.start_s = yaml_get(t, "start_s", 0.0);
            tx.stop_s = yaml_get(t, "stop_s", sc.duration_s);
            tx.gain_db = yaml_get(t, "gain_db", tx.gain_db);
            sc.transmitters.push_back(tx);
        }

        const auto node = root["charm"];
        if (!node) throw SchemaError("scenario: missing 'charm' section");
        sc.node.initial_channel = frequency_from_double(yaml_req<double>(node, "initial_channel"));
        sc.node.ranking = detail::parse_ranking(node["ranking"]);
        sc.node.alpha = yaml_get(node, "alpha", sc.node.alpha);
        sc.node.oracle_classifier = yaml_get(node, "oracle_classifier", false);
        sc.node.own_gain_db = yaml_get(node, "own_gain_db", sc.node.own_gain_db);
        if (node["checkpoint"]) {
            std::filesystem::path p = node["checkpoint"].as<std::string>();
            sc.node.checkpoint = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        const auto s = node["sensing"];
        sc.node.sensing.dwell_s = yaml_get(s, "dwell_s", sc.node.sensing.dwell_s);
        sc.node.sensing.retune_delay_s = yaml_get(s, "retune_delay_s", sc.node.sensing.retune_delay_s);
        sc.node.sensing.debounce_m = yaml_get(s, "debounce_m", sc.node.sensing.debounce_m);
        sc.node.sensing.channels = sc.channels;
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
    }
    try {
        sc.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
    }
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read scenario " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path());
}

// ----------------------------------------------------------- channel model

/// Ground truth for one capture: Clear, the single active technology, or Unknown for superpositions.
inline TechClass truth_label(std::size_t active_count, TechClass single) {
    if (active_count == 0) return TechClass::Clear;
    return active_count == 1 ? single : TechClass::Unknown;
}

/// Script transmitters plus the node's own downlink where it serves.
inline std::vector<Transmitter> emitters(const Scenario& sc, FrequencyHz serving, double from_s, double to_s) {
    auto out = sc.transmitters;
    Transmitter own;
    own.tech = TechClass::LTE;
    own.traffic = TrafficPattern::ContinuousHighTput;
    own.channel = serving;
    own.start_s = from_s;
    own.stop_s = to_s;
    own.gain_db = sc.node.own_gain_db;
    out.push_back(own);
    return out;
}

/**
 * @brief Received samples on one channel over [t0, t0 + n / fs).
 *
 * Each emitter overlapping the window contributes a freshly synthesized
 * segment, gated by its scripted interval, at its gain over the noise floor.
 * Seeds depend only on the scenario seed, the emitter index and the window
 * start sample.
 */
inline IQBuffer channel_signal(const Scenario& sc, const std::vector<Transmitter>& txs, FrequencyHz channel, double t0,
                               std::size_t n) {
    if (n == 0) throw InvalidArgument("channel_signal: empty window");
    const double fs = sc.sample_rate_hz;
    const double dur = static_cast<double>(n) / fs;
    const auto start_sample = static_cast<std::uint64_t>(std::llround(t0 * fs));
    const auto ch = sc.channel_index(channel);

    auto out = gen_clear(dur, fs, sc.noise_floor, derive_seed(sc.seed, {0xF100, ch, start_sample}));
    auto y = out.samples();
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& tx = txs[i];
        if (tx.channel != channel || !tx.overlaps(t0, t0 + dur)) continue;
        WaveformSpec spec{tx.tech, tx.traffic, dur, 0.0, derive_seed(sc.seed, {0x7C, i, start_sample})};
        const auto em = synth_emission(spec, fs);
        const double amp = std::sqrt(sc.noise_floor) * db_to_amplitude(tx.gain_db);
        const auto x = em.iq.samples();
        for (std::size_t k = 0; k < std::min(n, x.size()); ++k)
            if (tx.active_at(t0 + static_cast<double>(k) / fs)) y[k] += amp * x[k];
    }
    return out;
}

// ------------------------------------------------------------------ trace

enum class TraceKind : std::uint8_t {
    SenseResult, MapUpdate, Decision, HandoverStart, HandoverDone, CoexChange, PingOk, PingLost, TxStart, TxStop
};

inline std::string_view to_string(TraceKind k) {
    switch (k) {
    case TraceKind::SenseResult: return "SenseResult";
    case TraceKind::MapUpdate: return "MapUpdate";
    case TraceKind::Decision: return "Decision";
    case TraceKind::HandoverStart: return "HandoverStart";
    case TraceKind::HandoverDone: return "HandoverDone";
    case TraceKind::CoexChange: return "CoexChange";
    case TraceKind::PingOk: return "PingOk";
    case TraceKind::PingLost: return "PingLost";
    case TraceKind::TxStart: return "TxStart";
    case TraceKind::TxStop: return "TxStop";
    }
    return "?";
}

inline constexpr int kTraceSchemaVersion = 1;

/// One trace line. Only the fields relevant to the kind are serialized.
struct TraceRecord {
    Ticks t = 0;
    TraceKind kind = TraceKind::SenseResult;
    FrequencyHz freq{};   ///< sensed / serving / transmitter channel, or handover source
    FrequencyHz to{};     ///< handover or decision target
    TechClass label = TechClass::Clear;
    TechClass truth = TechClass::Clear;
    std::array<double, 3> probs{};
    Ticks capture_t = 0;
    CoexMode coex = CoexMode::None;
    int tx = -1;
    double sinr_db = 0.0;
    bool changed = false;

    double t_s() const { return to_seconds(t); }
};

inline std::string trace_line(const TraceRecord& r) {
    nlohmann::ordered_json j;
    j["v"] = kTraceSchemaVersion;
    j["t"] = r.t_s();
    j["kind"] = to_string(r.kind);
    switch (r.kind) {
    case TraceKind::SenseResult:
        j["freq_hz"] = r.freq.hz;
        j["capture_t"] = to_seconds(r.capture_t);
        j["label"] = to_string(r.label);
        j["truth"] = to_string(r.truth);
        j["probs"] = r.probs;
        break;
    case TraceKind::MapUpdate:
        j["freq_hz"] = r.freq.hz;
        j["label"] = to_string(r.label);
        j["changed"] = r.changed;
        break;
    case TraceKind::Decision:
        j["from_hz"] = r.freq.hz;
        j["to_hz"] = r.to.hz;
        j["coex"] = to_string(r.coex);
        j["handover"] = r.changed;
        break;
    case TraceKind::HandoverStart:
    case TraceKind::HandoverDone:
        j["from_hz"] = r.freq.hz;
        j["to_hz"] = r.to.hz;
        break;
    case TraceKind::CoexChange:
        j["freq_hz"] = r.freq.hz;
        j["coex"] = to_string(r.coex);
        break;
    case TraceKind::PingOk:
    case TraceKind::PingLost:
        j["freq_hz"] = r.freq.hz;
        j["sinr_db"] = r.sinr_db;
        break;
    case TraceKind::TxStart:
    case TraceKind::TxStop:
        j["tx"] = r.tx;
        j["freq_hz"] = r.freq.hz;
        j["tech"] = to_string(r.label);
        break;
    }
    return j.dump();
}

inline std::string trace_jsonl(const std::vector<TraceRecord>& trace) {
    std::string out;
    for (const auto& r : trace) out += trace_line(r) + "\n";
    return out;
}

// -------------------------------------------------------------------- run

namespace detail {

enum class EventKind : std::uint8_t { TxStart = 0, TxStop = 1, HandoverDone = 2, Visit = 3, Ping = 4 };

struct Event {
    Ticks t;
    EventKind kind;
    std::uint64_t seq;
    int arg;
    bool operator>(const Event& o) const {
        if (t != o.t) return t > o.t;
        if (kind != o.kind) return kind > o.kind;
        return seq > o.seq;
    }
};

/// Script-derived label of a channel over [a, b) with the node serving on `serving`.
inline TechClass window_truth(const Scenario& sc, FrequencyHz channel, double a, double b, FrequencyHz serving) {
    std::size_t count = 0;
    TechClass single = TechClass::Clear;
    for (const auto& tx : sc.transmitters)
        if (tx.channel == channel && tx.overlaps(a, b)) {
            ++count;
            single = tx.tech;
        }
    if (serving == channel) {
        ++count;
        single = TechClass::LTE;
    }
    return truth_label(count, single);
}

inline ChannelClassMap truth_map(const Scenario& sc, double t, FrequencyHz serving) {
    ChannelClassMap m;
    for (auto f : sc.channels) m[f] = {window_truth(sc, f, t, std::nextafter(t, 1e300), serving), t};
    return m;
}

inline nn::ClassProbs oracle_probs(TechClass truth) {
    if (truth == TechClass::Unknown) return nn::ClassProbs(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    std::array<double, 3> p{};
    p[static_cast<std::size_t>(truth)] = 1.0;
    return nn::ClassProbs(p);
}

inline double serving_sinr_db(const Scenario& sc, FrequencyHz serving, CoexMode coex, double t) {
    double interference = 0.0;
    for (const auto& tx : sc.transmitters) {
        if (tx.channel != serving || !tx.active_at(t)) continue;
        double p = db_to_power(tx.gain_db);
        const bool covered = (coex == CoexMode::WithLTE && tx.tech == TechClass::LTE) ||
                             (coex == CoexMode::WithWiFi && tx.tech == TechClass::WiFi);
        if (covered) p *= db_to_power(-sc.coex_suppression_db);
        interference += p;
    }
    return sc.node.own_gain_db - 10.0 * std::log10(1.0 + interference);
}

} // namespace detail

/**
 * @brief Run a scenario with the given window classifier.
 *
 * The classifier is ignored when the scenario requests the oracle. The PDU
 * runs after every completed sweep once every channel has a label, and is
 * paused while a handover is in flight.
 */
inline std::vector<TraceRecord> run(const Scenario& sc, const WindowClassifier& classifier) {
    sc.validate();
    if (!sc.node.oracle_classifier && !classifier) throw InvalidArgument("run: no classifier");
    using detail::Event;
    using detail::EventKind;

    auto sensing = sc.node.sensing;
    sensing.channels = sc.channels;
    const nn::AbstainConfig abstain{sc.node.alpha};
    const Ticks end = to_ticks(sc.duration_s);
    const Ticks retune = to_ticks(sensing.retune_delay_s);
    const std::size_t dwell_n = sensing.dwell_samples(sc.sample_rate_hz);
    const Ticks dwell = to_ticks(static_cast<double>(dwell_n) / sc.sample_rate_hz);
    const Ticks latency = to_ticks(sc.handover_latency_s);
    const Ticks ping = to_ticks(sc.ping_interval_s);

    std::priority_queue<Event, std::vector<Event>, std::greater<>> q;
    std::uint64_t seq = 0;
    auto push = [&](Ticks t, EventKind k, int arg) {
        if (t <= end) q.push({t, k, seq++, arg});
    };
    for (std::size_t i = 0; i < sc.transmitters.size(); ++i) {
        push(to_ticks(sc.transmitters[i].start_s), EventKind::TxStart, static_cast<int>(i));
        push(to_ticks(sc.transmitters[i].stop_s), EventKind::TxStop, static_cast<int>(i));
    }
    push(retune + dwell, EventKind::Visit, 0); // a visit event fires when its capture completes
    for (Ticks t = ping; t <= end; t += ping) push(t, EventKind::Ping, 0);

    PduState pdu{sc.node.initial_channel, CoexMode::None};
    FrequencyHz serving = sc.node.initial_channel; // where the downlink physically is
    CoexMode coex = CoexMode::None;                // coexistence scheme physically active
    FrequencyHz pending_to{};
    CoexMode pending_coex = CoexMode::None;
    bool in_flight = false;
    ChannelClassMap map;
    DebounceState deb;
    SweepSchedule schedule(sc.channels);
    std::vector<TraceRecord> trace;

    auto emit = [&](TraceRecord r) { trace.push_back(std::move(r)); };
    auto set_coex = [&](Ticks t, CoexMode m) {
        if (m == coex) return;
        coex = m;
        emit({.t = t, .kind = TraceKind::CoexChange, .freq = serving, .coex = m});
    };

    while (!q.empty()) {
        const auto ev = q.top();
        q.pop();
        switch (ev.kind) {
        case EventKind::TxStart:
        case EventKind::TxStop: {
            const auto& tx = sc.transmitters[static_cast<std::size_t>(ev.arg)];
            emit({.t = ev.t, .kind = ev.kind == EventKind::TxStart ? TraceKind::TxStart : TraceKind::TxStop,
                  .freq = tx.channel, .label = tx.tech, .tx = ev.arg});
            break;
        }
        case EventKind::HandoverDone: {
            emit({.t = ev.t, .kind = TraceKind::HandoverDone, .freq = serving, .to = pending_to});
            serving = pending_to;
            in_flight = false;
            set_coex(ev.t, pending_coex);
            break;
        }
        case EventKind::Visit: {
            const Ticks done = ev.t;
            const auto freq = schedule.next_channel();
            const Ticks cap = done - dwell;
            const double a = to_seconds(cap), b = to_seconds(cap + dwell);
            // The downlink keeps its old channel until a handover completes.
            const auto txs = emitters(sc, serving, 0.0, sc.duration_s);
            const auto truth = detail::window_truth(sc, freq, a, b, serving);
            auto window = channel_signal(sc, txs, freq, a, dwell_n);
            const auto probs = sc.node.oracle_classifier ? detail::oracle_probs(truth) : classifier(window);
            const auto label = nn::classify(probs, abstain);
            emit({.t = done, .kind = TraceKind::SenseResult, .freq = freq, .label = label, .truth = truth,
                  .probs = probs.values(), .capture_t = cap});

            const auto before = map.contains(freq) ? std::optional(map.at(freq).label) : std::nullopt;
            update_map(map, deb, freq, label, to_seconds(done), sensing.debounce_m);
            emit({.t = done, .kind = TraceKind::MapUpdate, .freq = freq, .label = map.at(freq).label,
                  .changed = before != map.at(freq).label});

            if (schedule.at_sweep_start() && map.size() == sc.channels.size() && !in_flight) {
                const auto u = pri_update(pdu, map, sc.node.ranking);
                const bool handover = u.decision.freq != pdu.curr_freq;
                emit({.t = done, .kind = TraceKind::Decision, .freq = pdu.curr_freq, .to = u.decision.freq,
                      .coex = u.decision.coex, .changed = handover});
                if (handover) {
                    emit({.t = done, .kind = TraceKind::HandoverStart, .freq = serving, .to = u.decision.freq});
                    in_flight = true;
                    pending_to = u.decision.freq;
                    pending_coex = u.decision.coex;
                    push(done + latency, EventKind::HandoverDone, 0);
                } else {
                    set_coex(done, u.decision.coex);
                }
                pdu = u.state;
            }
            push(done + retune + dwell, EventKind::Visit, 0);
            break;
        }
        case EventKind::Ping: {
            const double t = to_seconds(ev.t);
            const double sinr = detail::serving_sinr_db(sc, serving, coex, t);
            const bool lost = in_flight || sinr < sc.sinr_threshold_db;
            emit({.t = ev.t, .kind = lost ? TraceKind::PingLost : TraceKind::PingOk, .freq = serving, .sinr_db = sinr});
            break;
        }
        }
    }
    return trace;
}

/// Scenario with the dwell lengthened to cover the model input if needed.
inline Scenario fit_dwell(Scenario sc, std::size_t input_len) {
    sc.node.sensing = sc.node.sensing.fitted_to(input_len, sc.sample_rate_hz);
    return sc;
}

/// Load the checkpoint named in the scenario (unless the oracle is requested), fit the dwell to it and run.
inline std::vector<TraceRecord> run(const Scenario& sc) {
    sc.validate();
    if (sc.node.oracle_classifier) return run(sc, WindowClassifier{});
    if (sc.node.checkpoint.empty()) throw InvalidArgument("scenario: no checkpoint configured");
    auto params = nn::load_checkpoint(sc.node.checkpoint);
    const auto fitted = fit_dwell(sc, params.config.input_len);
    return run(fitted, network_classifier(std::move(params)));
}

// ---------------------------------------------------------------- metrics

struct HandoverInfo {
    double decided_s = 0.0;
    double done_s = std::numeric_limits<double>::quiet_NaN();
    FrequencyHz from{}, to{};
    CoexMode coex = CoexMode::None;
    bool optimal = false; ///< decision equals the policy output under ground truth
};

struct OnsetLatency {
    double onset_s = 0.0;
    int tx = -1;
    double latency_s = std::numeric_limits<double>::quiet_NaN(); ///< NaN if no handover followed
};

struct Interval {
    double t0 = 0.0, t1 = 0.0;
    FrequencyHz serving{};
    CoexMode coex = CoexMode::None;
    std::vector<TechClass> truth; ///< per channel, in scenario order
    bool optimal = false;
    bool lag = false;
};

struct Report {
    std::vector<HandoverInfo> handovers;
    std::vector<OnsetLatency> detection;
    nn::ConfusionMatrix confusion; ///< truth rows include Unknown for superpositions
    std::size_t pings = 0, pings_lost = 0;
    double ping_loss_fraction = 0.0;
    double optimal_fraction = 0.0;          ///< over the whole run
    double optimal_fraction_excl_lag = 0.0; ///< with detection-lag windows removed
    std::vector<Interval> intervals;
};

/**
 * @brief Derive the run report from a trace.
 *
 * A configuration is optimal when the policy, fed the scripted ground truth,
 * would keep it. A lag window starts at a scripted change that leaves the
 * node non-optimal and ends when the next handover (or coexistence change)
 * completes, capped at lag_cap_s plus the handover latency.
 */
inline Report compute_metrics(const std::vector<TraceRecord>& trace, const Scenario& sc) {
    Report rep;
    const double end = sc.duration_s;

    // Serving timeline and change points.
    std::vector<double> cuts{0.0, end};
    std::vector<std::pair<double, std::pair<FrequencyHz, CoexMode>>> state_changes;
    FrequencyHz serving = sc.node.initial_channel;
    CoexMode coex = CoexMode::None;
    std::vector<double> reactions; // times a reaction completed
    for (const auto& r : trace) {
        const double t = r.t_s();
        switch (r.kind) {
        case TraceKind::SenseResult: rep.confusion.add(r.truth, r.label); break;
        case TraceKind::Decision:
            if (r.changed) {
                HandoverInfo h;
                h.decided_s = t;
                h.from = r.freq;
                h.to = r.to;
                h.coex = r.coex;
                const auto gt = detail::truth_map(sc, t, serving);
                const auto want = rank_policy(gt, r.freq, PduState{r.freq, coex}, sc.node.ranking);
                h.optimal = want.freq == r.to && want.coex == r.coex;
                rep.handovers.push_back(h);
            }
            break;
        case TraceKind::HandoverDone:
            serving = r.to;
            for (auto& h : rep.handovers)
                if (std::isnan(h.done_s)) {
                    h.done_s = t;
                    break;
                }
            cuts.push_back(t);
            reactions.push_back(t);
            state_changes.push_back({t, {serving, coex}});
            break;
        case TraceKind::CoexChange:
            coex = r.coex;
            cuts.push_back(t);
            reactions.push_back(t);
            state_changes.push_back({t, {serving, coex}});
            break;
        case TraceKind::PingOk: ++rep.pings; break;
        case TraceKind::PingLost:
            ++rep.pings;
            ++rep.pings_lost;
            break;
        default: break;
        }
    }
    rep.ping_loss_fraction = rep.pings ? static_cast<double>(rep.pings_lost) / static_cast<double>(rep.pings) : 0.0;

    auto state_at = [&](double t) {
        std::pair<FrequencyHz, CoexMode> s{sc.node.initial_channel, CoexMode::None};
        for (const auto& [ct, st] : state_changes)
            if (ct <= t) s = st;
        return s;
    };

    // Detection latency per interference onset on the serving channel.
    for (std::size_t i = 0; i < sc.transmitters.size(); ++i) {
        const auto& tx = sc.transmitters[i];
        if (tx.start_s >= end || state_at(tx.start_s).first != tx.channel) continue;
        OnsetLatency o{tx.start_s, static_cast<int>(i)};
        for (const auto& h : rep.handovers)
            if (h.decided_s >= tx.start_s) {
                o.latency_s = h.decided_s - tx.start_s;
                break;
            }
        rep.detection.push_back(o);
    }

    for (const auto& tx : sc.transmitters) {
        if (tx.start_s > 0.0 && tx.start_s < end) cuts.push_back(tx.start_s);
        if (tx.stop_s > 0.0 && tx.stop_s < end) cuts.push_back(tx.stop_s);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto optimal_at = [&](double t) {
        const auto [srv, cx] = state_at(t);
        const auto gt = detail::truth_map(sc, t, srv);
        const PduState s{srv, cx};
        const auto d = rank_policy(gt, srv, s, sc.node.ranking);
        return d.freq == srv && d.coex == cx;
    };

    // Lag windows opened by scripted changes.
    std::vector<std::pair<double, double>> lag;
    const double cap = sc.lag_cap_s + sc.handover_latency_s;
    for (const auto& tx : sc.transmitters)
        for (double t : {tx.start_s, tx.stop_s}) {
            if (t <= 0.0 || t >= end || optimal_at(t)) continue;
            double close = t + cap;
            for (double r : reactions)
                if (r >= t) {
                    close = std::min(close, r);
                    break;
                }
            lag.push_back({t, std::min(close, end)});
        }

    double opt = 0.0, opt_excl = 0.0, total_excl = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        Interval iv;
        iv.t0 = cuts[k];
        iv.t1 = cuts[k + 1];
        const auto [srv, cx] = state_at(iv.t0);
        iv.serving = srv;
        iv.coex = cx;
        const auto gt = detail::truth_map(sc, iv.t0, srv);
        for (auto f : sc.channels) iv.truth.push_back(gt.at(f).label);
        iv.optimal = optimal_at(iv.t0);
        double in_lag = 0.0;
        for (const auto& [a, b] : lag) in_lag += std::max(0.0, std::min(b, iv.t1) - std::max(a, iv.t0));
        in_lag = std::min(in_lag, iv.t1 - iv.t0);
        iv.lag = in_lag > 0.0;
        const double len = iv.t1 - iv.t0;
        if (iv.optimal) {
            opt += len;
            opt_excl += len - in_lag;
        }
        total_excl += len - in_lag;
        rep.intervals.push_back(std::move(iv));
    }
    rep.optimal_fraction = opt / end;
    rep.optimal_fraction_excl_lag = total_excl > 0.0 ? opt_excl / total_excl : 1.0;
    return rep;
}

inline std::string report_csv(const Report& r) {
    std::string out = "key,value\n";
    auto row = [&](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
    row("handovers", std::to_string(r.handovers.size()));
    for (std::size_t i = 0; i < r.handovers.size(); ++i) {
        const auto& h = r.handovers[i];
        const auto p = "handover" + std::to_string(i + 1) + ".";
        row(p + "decided_s", format_double(h.decided_s));
        row(p + "done_s", format_double(h.done_s));
        row(p + "from_hz", std::to_string(h.from.hz));
        row(p + "to_hz", std::to_string(h.to.hz));
        row(p + "coex", std::string(to_string(h.coex)));
        row(p + "optimal", h.optimal ? "1" : "0");
    }
    for (std::size_t i = 0; i < r.detection.size(); ++i) {
        const auto p = "onset" + std::to_string(i + 1) + ".";
        row(p + "t_s", format_double(r.detection[i].onset_s));
        row(p + "tx", std::to_string(r.detection[i].tx));
        row(p + "latency_s", std::isnan(r.detection[i].latency_s) ? "nan" : format_double(r.detection[i].latency_s));
    }
    row("pings", std::to_string(r.pings));
    row("pings_lost", std::to_string(r.pings_lost));
    row("ping_loss_fraction", format_double(r.ping_loss_fraction));
    row("optimal_fraction", format_double(r.optimal_fraction));
    row("optimal_fraction_excl_lag", format_double(r.optimal_fraction_excl_lag));
    const auto m = nn::compute_metrics(r.confusion);
    row("sense_accuracy", format_double(m.accuracy));
    return out;
}

inline std::string occupancy_csv(const Report& r, const Scenario& sc) {
    std::string out = "t0_s,t1_s,serving_hz,coex";
    for (auto f : sc.channels) out += ",truth_" + std::to_string(f.hz);
    out += ",optimal,lag\n";
    for (const auto& iv : r.intervals) {
        out += format_double(iv.t0) + "," + format_double(iv.t1) + "," + std::to_string(iv.serving.hz) + "," +
               std::string(to_string(iv.coex));
        for (auto c : iv.truth) out += "," + std::string(to_string(c));
        out += std::string(",") + (iv.optimal ? "1" : "0") + "," + (iv.lag ? "1" : "0") + "\n";
    }
    return out;
}

} // namespace charm::sim
