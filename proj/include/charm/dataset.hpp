#pragma once

/**
 * @file dataset.hpp
 * @brief Labelled I/Q window datasets: synthesis, persistence, splits, test-alpha, minibatches.
 *
 * On-disk layout of a dataset directory:
 *   manifest.txt        key/value manifest (see manifest_kv)
 *   index.csv           one row of metadata per example
 *   examples/NNNNNN.chrm one binary file per example
 */

#include "charm/digest.hpp"
#include "charm/kvfile.hpp"
#include "charm/parallel.hpp"
#include "charm/rng.hpp"
#include "charm/types.hpp"
#include "charm/waveform.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace charm {

// ------------------------------------------------------------------- types

struct ExampleMeta {
    TechClass tech = TechClass::Clear;
    TrafficPattern traffic = TrafficPattern::Idle;
    float snr_db = 0.0f;
    std::uint64_t seed = 0;
    std::uint64_t source_offset = 0; ///< sample offset of the window inside its capture
};

/// A window of N complex samples stored as N in-phase values followed by N quadrature values.
struct LabeledExample {
    TechClass label = TechClass::Clear;
    double sample_rate_hz = 0.0;
    ExampleMeta meta;
    std::vector<float> iq;

    std::size_t window_len() const { return iq.size() / 2; }
    std::span<const float> i() const { return std::span(iq).first(window_len()); }
    std::span<const float> q() const { return std::span(iq).subspan(window_len()); }

    friend bool operator==(const LabeledExample& a, const LabeledExample& b) {
        return a.label == b.label && a.sample_rate_hz == b.sample_rate_hz && a.meta.tech == b.meta.tech &&
               a.meta.traffic == b.meta.traffic &&
               std::bit_cast<std::uint32_t>(a.meta.snr_db) == std::bit_cast<std::uint32_t>(b.meta.snr_db) &&
               a.meta.seed == b.meta.seed && a.iq.size() == b.iq.size() &&
               std::memcmp(a.iq.data(), b.iq.data(), a.iq.size() * sizeof(float)) == 0;
    }
};

struct Splits {
    std::vector<std::size_t> train, val, test, test_alpha;
};

/// Generation parameters. Everything that influences the produced bytes lives here.
struct GenConfig {
    std::size_t per_class = 300;
    std::size_t window_len = 2048;
    double sample_rate_hz = 2e6;
    std::uint64_t seed = 1;
    std::vector<double> snr_sweep_db{0.0, 5.0, 10.0, 20.0};
    std::vector<TrafficPattern> traffic{TrafficPattern::Idle, TrafficPattern::ContinuousHighTput,
                                        TrafficPattern::BurstyHighTput};
    std::size_t windows_per_capture = 20; ///< capture length in windows
    std::size_t take_per_capture = 2;     ///< windows kept from each capture
    double min_active_fraction = 0.05;
    double test_alpha_fraction = 0.25;
    double interference_gain_db = 0.0;

    std::string canonical_text() const {
        KeyValueFile kv;
        kv.set("per_class", static_cast<std::uint64_t>(per_class));
        kv.set("window_len", static_cast<std::uint64_t>(window_len));
        kv.set("sample_rate_hz", sample_rate_hz);
        kv.set("seed", seed);
        kv.set("snr_sweep_db", join_numbers(snr_sweep_db));
        std::string t;
        for (auto p : traffic) t += (t.empty() ? "" : " ") + std::string(to_string(p));
        kv.set("traffic", t);
        kv.set("windows_per_capture", static_cast<std::uint64_t>(windows_per_capture));
        kv.set("take_per_capture", static_cast<std::uint64_t>(take_per_capture));
        kv.set("min_active_fraction", min_active_fraction);
        kv.set("test_alpha_fraction", test_alpha_fraction);
        kv.set("interference_gain_db", interference_gain_db);
        return kv.to_text();
    }
    std::string digest() const { return sha256_hex(canonical_text()); }

    void validate() const {
        if (per_class == 0) throw InvalidArgument("dataset: per-class count must be positive");
        if (window_len == 0) throw InvalidArgument("dataset: window length must be positive");
        if (!(sample_rate_hz > 0.0)) throw InvalidArgument("dataset: sample rate must be positive");
        if (snr_sweep_db.empty()) throw InvalidArgument("dataset: SNR sweep is empty");
        if (traffic.empty()) throw InvalidArgument("dataset: traffic list is empty");
        if (windows_per_capture < 20) throw InvalidArgument("dataset: captures must span at least 20 windows");
        if (take_per_capture == 0 || take_per_capture > windows_per_capture)
            throw InvalidArgument("dataset: take_per_capture must be in [1, windows_per_capture]");
        if (!(test_alpha_fraction >= 0.0 && test_alpha_fraction < 1.0))
            throw InvalidArgument("dataset: test-alpha fraction must be in [0, 1)");
    }
};

struct DatasetManifest {
    std::uint32_t version = 1;
    double sample_rate_hz = 0.0;
    std::size_t window_len = 0;
    std::array<std::size_t, 4> class_counts{}; ///< indexed by TechClass
    std::array<double, 3> fractions{0.5, 0.25, 0.25};
    std::uint64_t split_seed = 0;
    std::uint64_t test_alpha_seed = 0;
    double test_alpha_fraction = 0.0;
    std::string config_digest;
    std::string content_digest;
};

struct Dataset {
    GenConfig config;
    std::vector<LabeledExample> examples;
    Splits splits;
    DatasetManifest manifest;

    std::vector<const LabeledExample*> select(const std::vector<std::size_t>& idx) const {
        std::vector<const LabeledExample*> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(&examples.at(i));
        return out;
    }
};

// ------------------------------------------------------------ file format

inline constexpr std::uint16_t kExampleFormatVersion = 1;
inline constexpr std::size_t kExampleHeaderBytes = 4 + 2 + 2 + 4 + 8 + 8 + 2 + 2 + 4;

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
    const auto u = std::bit_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
    if (pos + sizeof(T) > in.size()) throw SchemaError("truncated record");
    U u = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) u |= static_cast<U>(in[pos + b]) << (8 * b);
    pos += sizeof(T);
    return std::bit_cast<T>(u);
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_bytes(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + p.string());
}

} // namespace detail

/// Serialise: "CHRM", u16 version, u16 label, u32 N, f64 rate, u64 seed, u16 tech, u16 traffic, f32 snr, N I f32, N Q f32.
inline std::vector<std::uint8_t> encode_example(const LabeledExample& ex) {
    std::vector<std::uint8_t> out;
    out.reserve(kExampleHeaderBytes + ex.iq.size() * 4);
    for (char c : {'C', 'H', 'R', 'M'}) out.push_back(static_cast<std::uint8_t>(c));
    detail::put_le<std::uint16_t>(out, kExampleFormatVersion);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ex.label));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ex.window_len()));
    detail::put_le<double>(out, ex.sample_rate_hz);
    detail::put_le<std::uint64_t>(out, ex.meta.seed);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ex.meta.tech));
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ex.meta.traffic));
    detail::put_le<float>(out, ex.meta.snr_db);
    for (float v : ex.iq) detail::put_le<float>(out, v);
    return out;
}

inline LabeledExample decode_example(std::span<const std::uint8_t> in) {
    if (in.size() < kExampleHeaderBytes || std::memcmp(in.data(), "CHRM", 4) != 0)
        throw SchemaError("example: bad magic");
    std::size_t pos = 4;
    const auto version = detail::get_le<std::uint16_t>(in, pos);
    if (version != kExampleFormatVersion) throw SchemaError("example: unsupported version " + std::to_string(version));
    LabeledExample ex;
    ex.label = tech_from_index(detail::get_le<std::uint16_t>(in, pos));
    const auto n = detail::get_le<std::uint32_t>(in, pos);
    ex.sample_rate_hz = detail::get_le<double>(in, pos);
    ex.meta.seed = detail::get_le<std::uint64_t>(in, pos);
    ex.meta.tech = tech_from_index(detail::get_le<std::uint16_t>(in, pos));
    ex.meta.traffic = traffic_from_index(detail::get_le<std::uint16_t>(in, pos));
    ex.meta.snr_db = detail::get_le<float>(in, pos);
    if (in.size() != kExampleHeaderBytes + std::size_t{n} * 8) throw SchemaError("example: payload size mismatch");
    ex.iq.resize(std::size_t{n} * 2);
    for (auto& v : ex.iq) v = detail::get_le<float>(in, pos);
    return ex;
}

inline void write_example(const std::filesystem::path& p, const LabeledExample& ex) {
    detail::write_bytes(p, encode_example(ex));
}

inline LabeledExample read_example(const std::filesystem::path& p) { return decode_example(detail::read_bytes(p)); }

// --------------------------------------------------------------- synthesis

namespace detail {

inline std::vector<float> window_to_floats(std::span<const cdouble> samples) {
    const auto n = samples.size();
    std::vector<float> iq(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        iq[k] = static_cast<float>(samples[k].real());
        iq[n + k] = static_cast<float>(samples[k].imag());
    }
    return iq;
}

enum class SplitId : std::uint64_t { Train = 0, Val = 1, Test = 2 };

/// Windows for one (class, split) group, cut from captures that belong to this group only.
inline std::vector<LabeledExample> build_group(const GenConfig& cfg, TechClass tech, SplitId split, std::size_t count) {
    std::vector<LabeledExample> out;
    out.reserve(count);
    const std::vector<TrafficPattern> traffics =
        tech == TechClass::Clear ? std::vector<TrafficPattern>{TrafficPattern::Idle} : cfg.traffic;
    const auto n = cfg.window_len;
    const double window_s = static_cast<double>(n) / cfg.sample_rate_hz;
    const double capture_s = window_s * static_cast<double>(cfg.windows_per_capture);
    constexpr std::size_t kMaxCaptures = 100000;

    for (std::size_t t = 0; t < traffics.size(); ++t) {
        const auto want = count / traffics.size() + (t < count % traffics.size() ? 1 : 0);
        std::size_t got = 0;
        for (std::uint64_t cap = 0; got < want; ++cap) {
            if (cap >= kMaxCaptures) throw InvalidArgument("dataset: transmitter too sparse to fill the requested windows");
            const auto cap_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(tech), static_cast<std::uint64_t>(split),
                                                         static_cast<std::uint64_t>(traffics[t]), cap});
            Rng rng(derive_seed(cap_seed, {0x5A12}));
            const double snr = cfg.snr_sweep_db[rng.below(cfg.snr_sweep_db.size())];
            const WaveformSpec spec{tech, traffics[t], capture_s, snr, cap_seed};
            const auto emission = synth_emission(spec, cfg.sample_rate_hz);
            const double noise_power = tech == TechClass::Clear ? 1.0 : noise_power_for_snr(snr, emission.active_power());

            // Eligible slots in random order; only the first take_per_capture are kept.
            std::vector<std::size_t> slots;
            for (std::size_t w = 0; w < cfg.windows_per_capture; ++w) {
                const auto offset = w * n;
                if (offset + n > emission.iq.size()) break;
                if (tech != TechClass::Clear && emission.active_fraction(offset, n) < cfg.min_active_fraction) continue;
                slots.push_back(w);
            }
            rng.shuffle(std::span(slots));
            if (slots.size() > cfg.take_per_capture) slots.resize(cfg.take_per_capture);
            std::sort(slots.begin(), slots.end());

            for (auto w : slots) {
                if (got == want) break;
                const auto offset = w * n;
                const auto noise = gen_clear(window_s, cfg.sample_rate_hz, noise_power, derive_seed(cap_seed, {0x9015E, w}));
                std::vector<cdouble> win(n);
                for (std::size_t k = 0; k < n; ++k) win[k] = emission.iq[offset + k] + noise[k];
                LabeledExample ex;
                ex.label = tech;
                ex.sample_rate_hz = cfg.sample_rate_hz;
                ex.meta = {tech, traffics[t], static_cast<float>(snr), cap_seed, offset};
                ex.iq = window_to_floats(win);
                out.push_back(std::move(ex));
                ++got;
            }
        }
    }
    return out;
}

} // namespace detail

/// Per-class split sizes for fractions 0.50 / 0.25 / 0.25.
inline std::array<std::size_t, 3> split_sizes(std::size_t per_class) {
    const auto train = static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(per_class)));
    const auto val = static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(per_class)));
    return {train, val, per_class - train - val};
}

/// Synthesize the Clear/LTE/WiFi windows and the train/val/test split (no test-alpha yet).
inline Dataset build_examples(const GenConfig& cfg) {
    cfg.validate();
    const auto sizes = split_sizes(cfg.per_class);
    const std::array<TechClass, 3> techs{TechClass::Clear, TechClass::LTE, TechClass::WiFi};

    std::vector<std::vector<LabeledExample>> groups(9);
    parallel_for(9, [&](std::size_t g) {
        const auto tech = techs[g / 3];
        const auto split = static_cast<detail::SplitId>(g % 3);
        groups[g] = detail::build_group(cfg, tech, split, sizes[g % 3]);
    });

    Dataset ds;
    ds.config = cfg;
    for (std::size_t g = 0; g < 9; ++g) {
        auto& dst = g % 3 == 0 ? ds.splits.train : g % 3 == 1 ? ds.splits.val : ds.splits.test;
        for (auto& ex : groups[g]) {
            dst.push_back(ds.examples.size());
            ds.examples.push_back(std::move(ex));
        }
    }
    ds.splits.test_alpha = ds.splits.test;
    ds.manifest.sample_rate_hz = cfg.sample_rate_hz;
    ds.manifest.window_len = cfg.window_len;
    ds.manifest.split_seed = derive_seed(cfg.seed, {0x5B117});
    ds.manifest.config_digest = cfg.digest();
    for (const auto& ex : ds.examples) ++ds.manifest.class_counts[static_cast<std::size_t>(ex.label)];
    return ds;
}

/**
 * @brief Extend the test split with LTE+LTE superposition windows labelled Unknown.
 *
 * Each interference window sums two test-split LTE windows from captures with
 * different seeds, the second scaled by interference_gain_db. The number added
 * makes interference exactly `fraction` of the resulting set (rounded).
 */
inline Splits build_test_alpha(Dataset& ds, double fraction, std::uint64_t seed) {
    if (ds.splits.test.empty()) throw InvalidArgument("test-alpha: test split is empty");
    if (!(fraction >= 0.0 && fraction < 1.0)) throw InvalidArgument("test-alpha: fraction must be in [0, 1)");
    const auto n_test = ds.splits.test.size();
    const auto n_intf =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_test) * fraction / (1.0 - fraction)));

    Splits out = ds.splits;
    out.test_alpha = ds.splits.test;
    if (n_intf > 0) {
        std::vector<std::size_t> lte;
        for (auto i : ds.splits.test)
            if (ds.examples[i].label == TechClass::LTE) lte.push_back(i);
        bool distinct = false;
        for (auto i : lte) distinct = distinct || ds.examples[i].meta.seed != ds.examples[lte.front()].meta.seed;
        if (lte.size() < 2 || !distinct) throw InvalidArgument("test-alpha: not enough independent LTE windows in the test split");

        Rng rng(derive_seed(seed, {0x7E57A}));
        const double g = db_to_amplitude(ds.config.interference_gain_db);
        for (std::size_t k = 0; k < n_intf; ++k) {
            const auto a = lte[rng.below(lte.size())];
            auto b = a;
            while (ds.examples[b].meta.seed == ds.examples[a].meta.seed) b = lte[rng.below(lte.size())];
            const auto& ea = ds.examples[a];
            const auto& eb = ds.examples[b];
            LabeledExample ex;
            ex.label = TechClass::Unknown;
            ex.sample_rate_hz = ea.sample_rate_hz;
            ex.meta = {TechClass::LTE, ea.meta.traffic, ea.meta.snr_db, derive_seed(ea.meta.seed, {eb.meta.seed}),
                       ea.meta.source_offset};
            ex.iq.resize(ea.iq.size());
            for (std::size_t j = 0; j < ex.iq.size(); ++j)
                ex.iq[j] = static_cast<float>(static_cast<double>(ea.iq[j]) + g * static_cast<double>(eb.iq[j]));
            out.test_alpha.push_back(ds.examples.size());
            ds.examples.push_back(std::move(ex));
            ++ds.manifest.class_counts[static_cast<std::size_t>(TechClass::Unknown)];
        }
    }
    ds.splits = out;
    ds.manifest.test_alpha_seed = seed;
    ds.manifest.test_alpha_fraction = fraction;
    return out;
}

// ------------------------------------------------------------ persistence

inline std::string example_filename(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.chrm", index);
    return buf;
}

inline std::string content_digest(const Dataset& ds) {
    Sha256 h;
    for (const auto& ex : ds.examples) h.update(encode_example(ex));
    return h.hex();
}

inline KeyValueFile manifest_kv(const Dataset& ds) {
    const auto& m = ds.manifest;
    KeyValueFile kv;
    kv.set("format", std::string("charm-dataset"));
    kv.set("version", static_cast<std::uint64_t>(m.version));
    kv.set("sample_rate_hz", m.sample_rate_hz);
    kv.set("window_len", static_cast<std::uint64_t>(m.window_len));
    for (auto c : kAllTechClasses)
        kv.set("count." + std::string(to_string(c)), static_cast<std::uint64_t>(m.class_counts[static_cast<std::size_t>(c)]));
    kv.set("examples", static_cast<std::uint64_t>(ds.examples.size()));
    kv.set("split.fractions", join_numbers(m.fractions));
    kv.set("split.seed", m.split_seed);
    kv.set("test_alpha.fraction", m.test_alpha_fraction);
    kv.set("test_alpha.seed", m.test_alpha_seed);
    kv.set("config_digest", m.config_digest);
    kv.set("content_digest", m.content_digest);
    kv.set("split.train", join_numbers(ds.splits.train));
    kv.set("split.val", join_numbers(ds.splits.val));
    kv.set("split.test", join_numbers(ds.splits.test));
    kv.set("split.test_alpha", join_numbers(ds.splits.test_alpha));
    return kv;
}

/// Write examples, index.csv and manifest.txt under `dir` (created if needed).
inline void save_dataset(Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "examples", ec);
    if (ec) throw IoError("cannot create " + (dir / "examples").string() + ": " + ec.message());

    ds.manifest.content_digest = content_digest(ds);
    std::vector<std::string> split_of(ds.examples.size(), "");
    for (auto i : ds.splits.train) split_of[i] = "train";
    for (auto i : ds.splits.val) split_of[i] = "val";
    for (auto i : ds.splits.test) split_of[i] = "test";
    for (auto i : ds.splits.test_alpha)
        if (split_of[i].empty()) split_of[i] = "test_alpha";

    std::ostringstream index;
    index << "index,file,split,label,tech,traffic,snr_db,seed,source_offset\n";
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const auto& ex = ds.examples[i];
        write_example(dir / "examples" / example_filename(i), ex);
        index << i << ',' << example_filename(i) << ',' << split_of[i] << ',' << to_string(ex.label) << ','
              << to_string(ex.meta.tech) << ',' << to_string(ex.meta.traffic) << ','
              << format_double(ex.meta.snr_db) << ',' << ex.meta.seed << ',' << ex.meta.source_offset << '\n';
    }
    const auto text = index.str();
    detail::write_bytes(dir / "index.csv",
                        std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    manifest_kv(ds).save(dir / "manifest.txt");
}

/// Synthesize, add test-alpha windows and persist. The returned dataset mirrors the files.
inline Dataset build_dataset(const GenConfig& cfg, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "examples", ec);
    if (ec) throw IoError("cannot create " + (dir / "examples").string() + ": " + ec.message());
    auto ds = build_examples(cfg);
    build_test_alpha(ds, cfg.test_alpha_fraction, derive_seed(cfg.seed, {0x7E57}));
    save_dataset(ds, dir);
    return ds;
}

/// Load a dataset directory and verify the manifest digest against the example files.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    const auto kv = KeyValueFile::load(dir / "manifest.txt");
    if (kv.get("format") != "charm-dataset") throw SchemaError("manifest: not a charm dataset");
    Dataset ds;
    auto& m = ds.manifest;
    m.version = static_cast<std::uint32_t>(kv.get_u64("version"));
    if (m.version != 1) throw SchemaError("manifest: unsupported version");
    m.sample_rate_hz = kv.get_double("sample_rate_hz");
    m.window_len = kv.get_u64("window_len");
    m.split_seed = kv.get_u64("split.seed");
    m.test_alpha_seed = kv.get_u64("test_alpha.seed");
    m.test_alpha_fraction = kv.get_double("test_alpha.fraction");
    m.config_digest = kv.get("config_digest");
    m.content_digest = kv.get("content_digest");
    ds.splits.train = parse_indices(kv.get("split.train"));
    ds.splits.val = parse_indices(kv.get("split.val"));
    ds.splits.test = parse_indices(kv.get("split.test"));
    ds.splits.test_alpha = parse_indices(kv.get("split.test_alpha"));
    const auto n = kv.get_u64("examples");
    ds.examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto ex = read_example(dir / "examples" / example_filename(i));
        if (ex.window_len() != m.window_len) throw SchemaError("example " + std::to_string(i) + ": window length mismatch");
        ++m.class_counts[static_cast<std::size_t>(ex.label)];
        ds.examples.push_back(std::move(ex));
    }
    if (content_digest(ds) != m.content_digest) throw SchemaError("manifest: content digest does not match example files");

    // The binary record has no source offset; it is restored from index.csv when present.
    if (std::ifstream index(dir / "index.csv"); index) {
        std::string line;
        std::getline(index, line);
        while (std::getline(index, line)) {
            std::vector<std::string> cols;
            std::stringstream ss(line);
            for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
            if (cols.size() != 9) throw SchemaError("index.csv: malformed row '" + line + "'");
            const auto i = std::stoull(cols[0]);
            if (i >= n) throw SchemaError("index.csv: index out of range");
            ds.examples[i].meta.source_offset = std::stoull(cols[8]);
        }
    }
    for (const auto* list : {&ds.splits.train, &ds.splits.val, &ds.splits.test, &ds.splits.test_alpha})
        for (auto i : *list)
            if (i >= n) throw SchemaError("manifest: split index out of range");
    return ds;
}

// ------------------------------------------------------------- minibatches

/**
 * @brief Minibatch index lists for one epoch.
 *
 * The visiting order is a Fisher-Yates shuffle of `split` driven by a seed
 * derived from (shuffle_seed, epoch); every index appears exactly once.
 */
inline std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> split, std::size_t batch_size,
                                                           std::uint64_t shuffle_seed, std::uint64_t epoch) {
    if (batch_size == 0) throw InvalidArgument("minibatch: batch size must be at least 1");
    std::vector<std::size_t> order(split.begin(), split.end());
    Rng rng(derive_seed(shuffle_seed, {0xBA7C4, epoch}));
    rng.shuffle(std::span(order));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
    return batches;
}

} // namespace charm
