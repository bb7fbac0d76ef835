#pragma once

/**
 * @file waveform.hpp
 * @brief Baseband I/Q synthesis for the Clear, LTE-like and WiFi-like classes.
 *
 * Every generator is a pure function of its arguments and seed. Transmit
 * waveforms are produced noiseless at a nominal level where a fully loaded
 * OFDM symbol has unit mean power; synthesize() adds receiver noise at the
 * requested SNR relative to the mean power of the samples where the emitter
 * radiates (in-burst SNR).
 */

#include "charm/fft.hpp"
#include "charm/rng.hpp"
#include "charm/types.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace charm {

using cdouble = std::complex<double>;

/// Complex baseband samples at a fixed sample rate.
class IQBuffer {
public:
    IQBuffer(std::vector<cdouble> samples, double sample_rate_hz)
        : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
        if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
            throw InvalidArgument("IQBuffer: sample rate must be positive and finite");
        if (samples_.empty()) throw InvalidArgument("IQBuffer: buffer must not be empty");
        for (const auto& s : samples_)
            if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
                throw InvalidArgument("IQBuffer: non-finite sample");
    }

    static IQBuffer zeros(std::size_t n, double sample_rate_hz) {
        return IQBuffer(std::vector<cdouble>(n), sample_rate_hz);
    }

    std::size_t size() const { return samples_.size(); }
    double sample_rate_hz() const { return sample_rate_hz_; }
    double duration_s() const { return static_cast<double>(size()) / sample_rate_hz_; }
    std::span<const cdouble> samples() const { return samples_; }
    std::span<cdouble> samples() { return samples_; }
    const cdouble& operator[](std::size_t i) const { return samples_[i]; }

    friend bool operator==(const IQBuffer&, const IQBuffer&) = default;

private:
    std::vector<cdouble> samples_;
    double sample_rate_hz_;
};

/// Signal parameters for one synthesized capture.
struct WaveformSpec {
    TechClass tech = TechClass::LTE;
    TrafficPattern traffic = TrafficPattern::ContinuousHighTput;
    double duration_s = 1e-3;
    double snr_db = 20.0;
    std::uint64_t seed = 0;
};

/// Transmit waveform plus a per-sample flag marking where the emitter radiates.
struct Emission {
    IQBuffer iq;
    std::vector<std::uint8_t> active;

    double active_fraction(std::size_t begin, std::size_t count) const {
        std::size_t on = 0;
        for (std::size_t i = begin; i < begin + count; ++i) on += active[i];
        return count ? static_cast<double>(on) / static_cast<double>(count) : 0.0;
    }

    /// Mean power over the active samples; 1 (the nominal level) if nothing is active.
    double active_power() const {
        double sum = 0.0;
        std::size_t on = 0;
        const auto x = iq.samples();
        for (std::size_t i = 0; i < active.size(); ++i)
            if (active[i]) {
                sum += std::norm(x[i]);
                ++on;
            }
        return on && sum > 0.0 ? sum / static_cast<double>(on) : 1.0;
    }
};

// ---------------------------------------------------------------- numerology

/// Reference capture rate at which the nominal FFT sizes apply.
inline constexpr double kReferenceRateHz = 20e6;
inline constexpr double kLteOccupancy = 0.90;
inline constexpr double kWifiOccupancy = 0.8125;

struct OfdmNumerology {
    std::size_t nfft = 0;
    std::size_t cp = 0;
    std::size_t half_occupied = 0; ///< subcarriers +-1..+-half are used, DC is empty

    std::size_t symbol_len() const { return nfft + cp; }
    std::size_t used_subcarriers() const { return 2 * half_occupied; }
    std::size_t bin(std::ptrdiff_t k) const {
        return k >= 0 ? static_cast<std::size_t>(k) : nfft - static_cast<std::size_t>(-k);
    }
};

inline std::size_t samples_for(double duration_s, double sample_rate_hz) {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
}

/// FFT 2048 at 20 Msps scaled with the rate (minimum 64), CP 1/14 of the FFT length.
inline OfdmNumerology lte_numerology(double sample_rate_hz) {
    OfdmNumerology n;
    n.nfft = std::max<std::size_t>(64, std::llround(2048.0 * sample_rate_hz / kReferenceRateHz));
    n.cp = static_cast<std::size_t>(std::llround(static_cast<double>(n.nfft) / 14.0));
    n.half_occupied = static_cast<std::size_t>(std::llround(kLteOccupancy * n.nfft)) / 2;
    return n;
}

/// 64-point 802.11a-style grid at 20 Msps, scaled (minimum 16, multiple of 4).
inline OfdmNumerology wifi_numerology(double sample_rate_hz) {
    OfdmNumerology n;
    const auto quarter = std::max<long long>(4, std::llround(16.0 * sample_rate_hz / kReferenceRateHz));
    n.nfft = static_cast<std::size_t>(4 * quarter);
    n.cp = static_cast<std::size_t>(quarter);
    n.half_occupied = static_cast<std::size_t>(std::llround(kWifiOccupancy * n.nfft)) / 2;
    return n;
}

// ------------------------------------------------------------ plumbing ops

inline double power(const IQBuffer& buf) {
    double acc = 0.0;
    for (const auto& s : buf.samples()) acc += std::norm(s);
    return acc / static_cast<double>(buf.size());
}

inline IQBuffer normalize(const IQBuffer& buf, double target_rms) {
    if (!(target_rms > 0.0)) throw InvalidArgument("normalize: target_rms must be positive");
    const double p = power(buf);
    if (!(p > 0.0)) throw DegenerateInput("normalize: buffer has zero power");
    const double k = target_rms / std::sqrt(p);
    std::vector<cdouble> out(buf.size());
    std::transform(buf.samples().begin(), buf.samples().end(), out.begin(),
                   [k](const cdouble& s) { return s * k; });
    return IQBuffer(std::move(out), buf.sample_rate_hz());
}

inline double db_to_amplitude(double gain_db) { return std::pow(10.0, gain_db / 20.0); }
inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

/// Sample-wise sum of gain-scaled buffers.
inline IQBuffer mix(std::span<const IQBuffer> buffers, std::span<const double> gains_db) {
    if (buffers.empty()) throw InvalidArgument("mix: no buffers");
    if (buffers.size() != gains_db.size()) throw InvalidArgument("mix: gains/buffers length mismatch");
    const auto n = buffers.front().size();
    const auto fs = buffers.front().sample_rate_hz();
    for (const auto& b : buffers) {
        if (b.size() != n) throw InvalidArgument("mix: buffer lengths differ");
        if (b.sample_rate_hz() != fs) throw InvalidArgument("mix: sample rates differ");
    }
    std::vector<cdouble> out(n);
    for (std::size_t b = 0; b < buffers.size(); ++b) {
        const double g = db_to_amplitude(gains_db[b]);
        const auto src = buffers[b].samples();
        if (b == 0) {
            for (std::size_t i = 0; i < n; ++i) out[i] = src[i] * g;
        } else {
            for (std::size_t i = 0; i < n; ++i) out[i] += src[i] * g;
        }
    }
    return IQBuffer(std::move(out), fs);
}

inline IQBuffer mix(std::initializer_list<IQBuffer> buffers, std::initializer_list<double> gains_db) {
    std::vector<IQBuffer> b(buffers);
    std::vector<double> g(gains_db);
    return mix(std::span<const IQBuffer>(b), std::span<const double>(g));
}

// ------------------------------------------------------------- generators

/// Circularly-symmetric complex Gaussian noise of the given mean power.
inline IQBuffer gen_clear(double duration_s, double sample_rate_hz, double noise_power, std::uint64_t seed) {
    if (!(duration_s > 0.0)) throw InvalidArgument("gen_clear: duration must be positive");
    if (!(noise_power > 0.0)) throw InvalidArgument("gen_clear: noise power must be positive");
    if (!(sample_rate_hz > 0.0)) throw InvalidArgument("gen_clear: sample rate must be positive");
    const auto n = samples_for(duration_s, sample_rate_hz);
    if (n == 0) throw InvalidArgument("gen_clear: duration shorter than one sample");
    Rng rng(derive_seed(seed, {0xC1EA}));
    const double sigma = std::sqrt(noise_power / 2.0);
    std::vector<cdouble> out(n);
    for (auto& s : out) {
        const double re = rng.normal();
        const double im = rng.normal();
        s = {sigma * re, sigma * im};
    }
    return IQBuffer(std::move(out), sample_rate_hz);
}

namespace detail {

/// Alternating on/off renewal process with exponential holding times.
class OnOffGate {
public:
    OnOffGate(double on_mean_s, double off_mean_s, Rng& rng) : on_mean_(on_mean_s), off_mean_(off_mean_s) {
        const double duty = on_mean_ / (on_mean_ + off_mean_);
        on_ = rng.bernoulli(duty);
        remaining_ = rng.exponential(on_ ? on_mean_ : off_mean_);
    }
    bool on() const { return on_; }
    void advance(double dt, Rng& rng) {
        remaining_ -= dt;
        while (remaining_ <= 0.0) {
            on_ = !on_;
            remaining_ += rng.exponential(on_ ? on_mean_ : off_mean_);
        }
    }

private:
    double on_mean_;
    double off_mean_;
    bool on_ = false;
    double remaining_ = 0.0;
};

inline cdouble qpsk(Rng& rng) {
    const auto bits = rng.next_u64();
    return {(bits & 1u) ? 1.0 : -1.0, (bits & 2u) ? 1.0 : -1.0};
}

inline std::vector<std::ptrdiff_t> occupied_subcarriers(const OfdmNumerology& n) {
    std::vector<std::ptrdiff_t> k;
    const auto h = static_cast<std::ptrdiff_t>(n.half_occupied);
    for (std::ptrdiff_t i = -h; i <= h; ++i)
        if (i != 0) k.push_back(i);
    return k;
}

inline void check_spec(const WaveformSpec& spec, TechClass want, double sample_rate_hz, const char* who) {
    if (spec.tech != want)
        throw InvalidArgument(std::string(who) + ": spec.tech is " + std::string(to_string(spec.tech)));
    if (!(spec.duration_s > 0.0)) throw InvalidArgument(std::string(who) + ": duration must be positive");
    if (!(sample_rate_hz > 0.0)) throw InvalidArgument(std::string(who) + ": sample rate must be positive");
    if (samples_for(spec.duration_s, sample_rate_hz) == 0)
        throw InvalidArgument(std::string(who) + ": duration shorter than one sample");
}

} // namespace detail

/// Data-burst holding times (seconds) for the LTE grid gate: {on mean, off mean}.
inline std::pair<double, double> lte_burst_means(TrafficPattern p) {
    switch (p) {
    case TrafficPattern::BurstyHighTput: return {1e-3, 1e-3};     // duty 0.5
    case TrafficPattern::BurstyLowTput: return {0.3e-3, 2.7e-3};  // duty 0.1
    default: return {0.0, 0.0};
    }
}

/// Symbol period of the LTE reference pattern.
inline constexpr std::size_t kLteReferencePeriod = 7;
/// Every k-th used subcarrier carries the reference pattern (10 %).
inline constexpr std::size_t kLteReferenceComb = 10;

/**
 * @brief Continuous CP-OFDM downlink with traffic-gated resource grid.
 *
 * Every 7th symbol carries a reference comb on 10 % of the used subcarriers
 * regardless of traffic. Symbols inside a data burst carry QPSK on the whole
 * used band; symbols outside bursts carry nothing except the reference.
 */
inline Emission synth_lte(const WaveformSpec& spec, double sample_rate_hz) {
    detail::check_spec(spec, TechClass::LTE, sample_rate_hz, "gen_lte");
    const auto num = lte_numerology(sample_rate_hz);
    const auto n_total = samples_for(spec.duration_s, sample_rate_hz);
    const auto sym_len = num.symbol_len();
    const double sym_dur = static_cast<double>(sym_len) / sample_rate_hz;
    const auto used = detail::occupied_subcarriers(num);
    const double scale = 1.0 / std::sqrt(static_cast<double>(used.size()));

    Rng rng(derive_seed(spec.seed, {0x17E}));
    const auto offset = static_cast<std::size_t>(rng.below(sym_len));
    const auto phase = static_cast<std::size_t>(rng.below(kLteReferencePeriod));

    const bool continuous = spec.traffic == TrafficPattern::ContinuousHighTput;
    const bool bursty = spec.traffic == TrafficPattern::BurstyHighTput || spec.traffic == TrafficPattern::BurstyLowTput;
    const auto [on_mean, off_mean] = lte_burst_means(spec.traffic);
    std::optional<detail::OnOffGate> gate;
    if (bursty) gate.emplace(on_mean, off_mean, rng);

    std::vector<cdouble> out(n_total);
    std::vector<std::uint8_t> active(n_total, 0);
    std::vector<cdouble> grid(num.nfft);
    auto& idft = InverseDft::cached(num.nfft);

    const std::size_t n_symbols = (n_total + offset + sym_len - 1) / sym_len;
    for (std::size_t s = 0; s < n_symbols; ++s) {
        const bool reference = (s + phase) % kLteReferencePeriod == 0;
        const bool data = continuous || (gate && gate->on());
        if (gate) gate->advance(sym_dur, rng);
        if (!data && !reference) continue;

        std::fill(grid.begin(), grid.end(), cdouble{});
        for (std::size_t i = 0; i < used.size(); ++i) {
            if (data || i % kLteReferenceComb == 0) grid[num.bin(used[i])] = detail::qpsk(rng) * (scale / std::sqrt(2.0));
        }
        idft.run(grid);

        // Symbol s occupies [s*sym_len - offset, (s+1)*sym_len - offset) of the output.
        const auto start = static_cast<std::ptrdiff_t>(s * sym_len) - static_cast<std::ptrdiff_t>(offset);
        for (std::size_t j = 0; j < sym_len; ++j) {
            const auto pos = start + static_cast<std::ptrdiff_t>(j);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(n_total)) continue;
            const auto src = j < num.cp ? num.nfft - num.cp + j : j - num.cp;
            out[static_cast<std::size_t>(pos)] = grid[src];
            active[static_cast<std::size_t>(pos)] = 1;
        }
    }
    return {IQBuffer(std::move(out), sample_rate_hz), std::move(active)};
}

inline IQBuffer gen_lte(const WaveformSpec& spec, double sample_rate_hz) {
    return synth_lte(spec, sample_rate_hz).iq;
}

/// Mean idle gap between WiFi frames for each traffic class (seconds).
inline double wifi_gap_mean(TrafficPattern p) {
    switch (p) {
    case TrafficPattern::Idle: return 20e-3;
    case TrafficPattern::ContinuousHighTput: return 34e-6;
    case TrafficPattern::BurstyHighTput: return 0.2e-3;
    case TrafficPattern::BurstyLowTput: return 2e-3;
    }
    return 2e-3;
}

/// Frame airtime range (seconds). Idle traffic sends only short beacon-like frames.
inline std::pair<double, double> wifi_frame_range(TrafficPattern p) {
    if (p == TrafficPattern::Idle) return {0.2e-3, 0.2e-3};
    return {0.2e-3, 1e-3};
}

/// Number of repetitions of the short training period at the start of a frame.
inline constexpr std::size_t kWifiStfRepetitions = 12;

/// One period (nfft/4 samples) of the fixed short-training sequence, unit power.
inline std::vector<cdouble> wifi_stf_period(const OfdmNumerology& num) {
    std::vector<cdouble> grid(num.nfft);
    Rng fixed(0x5F5F5F5Full);
    const auto h = static_cast<std::ptrdiff_t>(num.half_occupied);
    for (std::ptrdiff_t k = -h; k <= h; ++k)
        if (k != 0 && k % 4 == 0) grid[num.bin(k)] = detail::qpsk(fixed);
    InverseDft::cached(num.nfft).run(grid);
    std::vector<cdouble> period(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(num.nfft / 4));
    double p = 0.0;
    for (const auto& s : period) p += std::norm(s);
    p /= static_cast<double>(period.size());
    for (auto& s : period) s /= std::sqrt(p);
    return period;
}

/**
 * @brief Framed OFDM transmissions separated by exponential idle gaps.
 *
 * Each frame is a 12-period short-training preamble followed by CP-OFDM
 * payload symbols on 52/64 of the band. Frame airtime is uniform in
 * wifi_frame_range(), gaps are exponential with mean wifi_gap_mean().
 */
inline Emission synth_wifi(const WaveformSpec& spec, double sample_rate_hz) {
    detail::check_spec(spec, TechClass::WiFi, sample_rate_hz, "gen_wifi");
    const auto num = wifi_numerology(sample_rate_hz);
    const auto n_total = samples_for(spec.duration_s, sample_rate_hz);
    const auto used = detail::occupied_subcarriers(num);
    const double scale = 1.0 / std::sqrt(static_cast<double>(used.size()));
    const auto stf = wifi_stf_period(num);
    const auto preamble_len = kWifiStfRepetitions * stf.size();

    Rng rng(derive_seed(spec.seed, {0x3F1}));
    const double gap_mean = wifi_gap_mean(spec.traffic);
    const auto [frame_lo, frame_hi] = wifi_frame_range(spec.traffic);
    const double frame_mean = 0.5 * (frame_lo + frame_hi);

    std::vector<cdouble> out(n_total);
    std::vector<std::uint8_t> active(n_total, 0);
    std::vector<cdouble> grid(num.nfft);
    auto& idft = InverseDft::cached(num.nfft);

    auto frame_samples = [&]() {
        const double airtime = rng.uniform(frame_lo, frame_hi);
        const auto total = samples_for(airtime, sample_rate_hz);
        const auto payload_syms = std::max<std::size_t>(
            1, (total > preamble_len ? total - preamble_len : 0) / num.symbol_len());
        return preamble_len + payload_syms * num.symbol_len();
    };

    auto emit_frame = [&](std::ptrdiff_t at, std::ptrdiff_t len) {
        std::ptrdiff_t w = at;
        auto emit = [&](const cdouble& v) {
            if (w >= 0 && w < static_cast<std::ptrdiff_t>(n_total)) {
                out[static_cast<std::size_t>(w)] = v;
                active[static_cast<std::size_t>(w)] = 1;
            }
            ++w;
        };
        for (std::size_t r = 0; r < kWifiStfRepetitions; ++r)
            for (const auto& v : stf) emit(v);
        while (w < at + len) {
            std::fill(grid.begin(), grid.end(), cdouble{});
            for (auto k : used) grid[num.bin(k)] = detail::qpsk(rng) * (scale / std::sqrt(2.0));
            idft.run(grid);
            for (std::size_t j = 0; j < num.symbol_len(); ++j)
                emit(j < num.cp ? grid[num.nfft - num.cp + j] : grid[j - num.cp]);
        }
        return w;
    };
    auto gap = [&] {
        return static_cast<std::ptrdiff_t>(samples_for(rng.exponential(gap_mean), sample_rate_hz));
    };

    // Stationary start: inside a frame with probability of its airtime share, else in a gap.
    std::ptrdiff_t pos = 0;
    if (rng.bernoulli(frame_mean / (frame_mean + gap_mean))) {
        const auto len = static_cast<std::ptrdiff_t>(frame_samples());
        pos = -static_cast<std::ptrdiff_t>(rng.below(static_cast<std::uint64_t>(len)));
        pos = emit_frame(pos, len) + gap();
    } else {
        pos = gap();
    }
    while (pos < static_cast<std::ptrdiff_t>(n_total))
        pos = emit_frame(pos, static_cast<std::ptrdiff_t>(frame_samples())) + gap();
    return {IQBuffer(std::move(out), sample_rate_hz), std::move(active)};
}

inline IQBuffer gen_wifi(const WaveformSpec& spec, double sample_rate_hz) {
    return synth_wifi(spec, sample_rate_hz).iq;
}

/// Noiseless transmit waveform for LTE or WiFi; Clear yields silence.
inline Emission synth_emission(const WaveformSpec& spec, double sample_rate_hz) {
    switch (spec.tech) {
    case TechClass::LTE: return synth_lte(spec, sample_rate_hz);
    case TechClass::WiFi: return synth_wifi(spec, sample_rate_hz);
    case TechClass::Clear: {
        const auto n = samples_for(spec.duration_s, sample_rate_hz);
        if (n == 0) throw InvalidArgument("synth_emission: duration shorter than one sample");
        return {IQBuffer::zeros(n, sample_rate_hz), std::vector<std::uint8_t>(n, 0)};
    }
    case TechClass::Unknown: break;
    }
    throw InvalidArgument("synth_emission: Unknown is not a synthesis target");
}

/// Receiver noise power implied by snr_db against a signal of the given in-burst power.
inline double noise_power_for_snr(double snr_db, double signal_power = 1.0) {
    return signal_power * std::pow(10.0, -snr_db / 10.0);
}

/// Full capture: transmit waveform plus AWGN at spec.snr_db. Clear captures are unit-power noise.
inline IQBuffer synthesize(const WaveformSpec& spec, double sample_rate_hz) {
    const auto noise_seed = derive_seed(spec.seed, {0x9015E});
    if (spec.tech == TechClass::Clear) return gen_clear(spec.duration_s, sample_rate_hz, 1.0, noise_seed);
    auto em = synth_emission(spec, sample_rate_hz);
    auto noise = gen_clear(spec.duration_s, sample_rate_hz, noise_power_for_snr(spec.snr_db, em.active_power()), noise_seed);
    return mix({std::move(em.iq), std::move(noise)}, {0.0, 0.0});
}

} // namespace charm
