#pragma once

/**
 * @file policy.hpp
 * @brief Policy decision unit: ranking policy, periodic update and coexistence modes.
 */

#include "charm/types.hpp"

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace charm {

enum class CoexMode : std::uint8_t { None = 0, WithLTE = 1, WithWiFi = 2 };

inline std::string_view to_string(CoexMode m) {
    switch (m) {
    case CoexMode::None: return "None";
    case CoexMode::WithLTE: return "WithLTE";
    case CoexMode::WithWiFi: return "WithWiFi";
    }
    return "?";
}

inline CoexMode parse_coex(std::string_view s) {
    for (auto m : {CoexMode::None, CoexMode::WithLTE, CoexMode::WithWiFi})
        if (to_string(m) == s) return m;
    throw SchemaError("unknown coexistence mode '" + std::string(s) + "'");
}

struct ChannelEntry {
    TechClass label = TechClass::Clear;
    double sensed_at_s = 0.0;
    bool operator==(const ChannelEntry&) const = default;
};

/// Latest label per channel. Keys are the configured channel set.
using ChannelClassMap = std::map<FrequencyHz, ChannelEntry>;

/// Integer rank per class; higher is preferred.
struct PolicyRanking {
    std::array<int, 4> rank{}; ///< indexed by TechClass

    int of(TechClass c) const { return rank[static_cast<std::size_t>(c)]; }

    /// Clear 3, WiFi 2, LTE 1, Unknown 0.
    static PolicyRanking preset_a() { return {{3, 1, 2, 0}}; }
    /// Clear 3, LTE 2, WiFi 1, Unknown 0.
    static PolicyRanking preset_b() { return {{3, 2, 1, 0}}; }

    static PolicyRanking preset(std::string_view name) {
        if (name == "A") return preset_a();
        if (name == "B") return preset_b();
        throw SchemaError("unknown ranking preset '" + std::string(name) + "'");
    }

    bool operator==(const PolicyRanking&) const = default;
};

struct PduState {
    FrequencyHz curr_freq{};
    CoexMode coexisting = CoexMode::None;
    double std_gain = 1.0;
    double std_bw_hz = 20e6;
    bool operator==(const PduState&) const = default;
};

struct PduDecision {
    FrequencyHz freq{};
    CoexMode coex = CoexMode::None;
    double pw = 1.0;
    double bw_hz = 20e6;
    bool operator==(const PduDecision&) const = default;
};

/**
 * @brief Highest-ranked channel in the map.
 *
 * Among equally ranked channels the current one wins if present, otherwise
 * the highest frequency.
 */
inline ChannelClassMap::const_iterator ranking_max(const ChannelClassMap& map, FrequencyHz curr,
                                                   const PolicyRanking& ranking) {
    auto best = map.end();
    for (auto it = map.begin(); it != map.end(); ++it) {
        if (best == map.end()) {
            best = it;
            continue;
        }
        const int r = ranking.of(it->second.label), rb = ranking.of(best->second.label);
        if (r > rb) best = it;
        else if (r == rb && best->first != curr && (it->first == curr || it->first > best->first)) best = it;
    }
    return best;
}

/// Ranking-based policy applied to one snapshot of the channel map.
inline PduDecision rank_policy(const ChannelClassMap& map, FrequencyHz curr, const PduState& state,
                               const PolicyRanking& ranking) {
    const auto here = map.find(curr);
    if (here == map.end()) throw InvalidArgument("rank_policy: current frequency is not in the channel map");
    PduDecision keep{curr, state.coexisting, state.std_gain, state.std_bw_hz};

    const auto cls = here->second.label;
    if (cls != TechClass::WiFi && cls != TechClass::Unknown) return keep;

    const auto best = ranking_max(map, curr, ranking);
    const auto target = best->second.label;
    auto go = [&](CoexMode m) { return PduDecision{best->first, m, state.std_gain, state.std_bw_hz}; };

    if (state.coexisting != CoexMode::None) return target == TechClass::Clear ? go(CoexMode::None) : keep;
    switch (target) {
    case TechClass::Clear: return go(CoexMode::None);
    case TechClass::LTE: return go(CoexMode::WithLTE);
    case TechClass::WiFi: return go(CoexMode::WithWiFi);
    case TechClass::Unknown: return keep;
    }
    return keep;
}

/// Coexistence mode after applying a decision.
inline CoexMode coex_transition(const PduState&, const PduDecision& decision) { return decision.coex; }

enum class PduActionKind : std::uint8_t { Handover, SetCoexistence, SetTxPower, SetBandwidth };

struct PduAction {
    PduActionKind kind = PduActionKind::Handover;
    FrequencyHz freq{};
    CoexMode coex = CoexMode::None;
    double value = 0.0;
    bool operator==(const PduAction&) const = default;
};

struct PriUpdate {
    PduState state;
    PduDecision decision;
    std::vector<PduAction> actions;
};

/// One periodic PDU step: decide, then emit handover (if moving) and the three set-actions.
inline PriUpdate pri_update(const PduState& state, const ChannelClassMap& map, const PolicyRanking& ranking) {
    PriUpdate out;
    out.decision = rank_policy(map, state.curr_freq, state, ranking);
    const auto& d = out.decision;
    if (d.freq != state.curr_freq) out.actions.push_back({PduActionKind::Handover, d.freq, {}, 0.0});
    out.actions.push_back({PduActionKind::SetCoexistence, d.freq, d.coex, 0.0});
    out.actions.push_back({PduActionKind::SetTxPower, d.freq, d.coex, d.pw});
    out.actions.push_back({PduActionKind::SetBandwidth, d.freq, d.coex, d.bw_hz});
    out.state = state;
    out.state.curr_freq = d.freq;
    out.state.coexisting = coex_transition(state, d);
    return out;
}

} // namespace charm
