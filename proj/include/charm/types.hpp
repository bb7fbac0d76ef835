#pragma once

/**
 * @file types.hpp
 * @brief Core enums and the exception hierarchy shared by every charm module.
 */

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace charm {

/// Technology label. Unknown is only ever produced by the abstain rule.
enum class TechClass : std::uint16_t { Clear = 0, LTE = 1, WiFi = 2, Unknown = 3 };

inline constexpr std::array<TechClass, 4> kAllTechClasses{
    TechClass::Clear, TechClass::LTE, TechClass::WiFi, TechClass::Unknown};

/// Traffic classes used for dataset synthesis and scripted transmitters.
enum class TrafficPattern : std::uint16_t {
    Idle = 0,
    ContinuousHighTput = 1,
    BurstyHighTput = 2,
    BurstyLowTput = 3,
};

/// Categorised failure. The CLI maps each kind onto a distinct exit code.
enum class ErrorKind { InvalidArgument, DegenerateInput, Io, Schema, TrainingDiverged };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(ErrorKind::InvalidArgument, w) {}
};
struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& w) : Error(ErrorKind::DegenerateInput, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct SchemaError : Error {
    explicit SchemaError(const std::string& w) : Error(ErrorKind::Schema, w) {}
};

inline std::string_view to_string(TechClass c) {
    switch (c) {
    case TechClass::Clear: return "Clear";
    case TechClass::LTE: return "LTE";
    case TechClass::WiFi: return "WiFi";
    case TechClass::Unknown: return "Unknown";
    }
    return "?";
}

inline std::string_view to_string(TrafficPattern p) {
    switch (p) {
    case TrafficPattern::Idle: return "Idle";
    case TrafficPattern::ContinuousHighTput: return "ContinuousHighTput";
    case TrafficPattern::BurstyHighTput: return "BurstyHighTput";
    case TrafficPattern::BurstyLowTput: return "BurstyLowTput";
    }
    return "?";
}

inline TechClass parse_tech(std::string_view s) {
    for (auto c : kAllTechClasses)
        if (to_string(c) == s) return c;
    throw SchemaError("unknown technology class '" + std::string(s) + "'");
}

inline TrafficPattern parse_traffic(std::string_view s) {
    for (auto p : {TrafficPattern::Idle, TrafficPattern::ContinuousHighTput,
                   TrafficPattern::BurstyHighTput, TrafficPattern::BurstyLowTput})
        if (to_string(p) == s) return p;
    throw SchemaError("unknown traffic pattern '" + std::string(s) + "'");
}

inline TechClass tech_from_index(std::uint16_t v) {
    if (v > 3) throw SchemaError("technology index out of range: " + std::to_string(v));
    return static_cast<TechClass>(v);
}

inline TrafficPattern traffic_from_index(std::uint16_t v) {
    if (v > 3) throw SchemaError("traffic index out of range: " + std::to_string(v));
    return static_cast<TrafficPattern>(v);
}

/// Channel centre frequency in integer Hz so it can key ordered maps exactly.
struct FrequencyHz {
    std::int64_t hz = 0;
    constexpr auto operator<=>(const FrequencyHz&) const = default;
    double ghz() const { return static_cast<double>(hz) * 1e-9; }
};

inline FrequencyHz frequency_from_double(double hz) {
    return FrequencyHz{static_cast<std::int64_t>(hz < 0 ? hz - 0.5 : hz + 0.5)};
}

} // namespace charm
