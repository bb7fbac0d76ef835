#pragma once

/**
 * @file checkpoint.hpp
 * @brief Binary checkpoint files for ModelParams.
 *
 * Layout (little-endian): "CHMP", u16 version, u16 digest length, digest
 * (hex SHA-256 of the config text), u32 config length, config text, u32
 * tensor count, then per tensor: u16 name length, name, u16 rank, rank x u32
 * dims, f32 data.
 */

#include "charm/dataset.hpp"
#include "charm/nn/model.hpp"

#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace charm::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> encode_checkpoint(const ModelParams& p) {
    const auto layout = param_layout(p.config);
    if (p.values.size() != param_count(p.config)) throw InvalidArgument("checkpoint: parameter count mismatch");
    using charm::detail::put_le;
    std::vector<std::uint8_t> out{'C', 'H', 'M', 'P'};
    put_le<std::uint16_t>(out, kCheckpointVersion);
    const auto text = p.config.canonical_text();
    const auto digest = sha256_hex(text);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(digest.size()));
    out.insert(out.end(), digest.begin(), digest.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layout.size()));
    for (const auto& t : layout) {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.shape.size()));
        for (auto d : t.shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < t.size; ++i) put_le<float>(out, p.values[t.offset + i]);
    }
    return out;
}

inline ModelParams decode_checkpoint(std::span<const std::uint8_t> in) {
    using charm::detail::get_le;
    if (in.size() < 8 || std::memcmp(in.data(), "CHMP", 4) != 0) throw SchemaError("checkpoint: bad magic");
    std::size_t pos = 4;
    if (get_le<std::uint16_t>(in, pos) != kCheckpointVersion) throw SchemaError("checkpoint: unsupported version");
    auto take_string = [&](std::size_t n) {
        if (pos + n > in.size()) throw SchemaError("checkpoint: truncated");
        std::string s(reinterpret_cast<const char*>(in.data() + pos), n);
        pos += n;
        return s;
    };
    const auto digest = take_string(get_le<std::uint16_t>(in, pos));
    const auto text = take_string(get_le<std::uint32_t>(in, pos));
    if (sha256_hex(text) != digest) throw SchemaError("checkpoint: config digest mismatch");

    ModelParams p;
    try {
        p.config = ModelConfig::from_text(text);
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("checkpoint: ") + e.what());
    }
    const auto layout = param_layout(p.config);
    p.values.assign(param_count(p.config), 0.0f);
    if (get_le<std::uint32_t>(in, pos) != layout.size()) throw SchemaError("checkpoint: tensor count mismatch");
    for (const auto& t : layout) {
        if (take_string(get_le<std::uint16_t>(in, pos)) != t.name) throw SchemaError("checkpoint: unexpected tensor name");
        if (get_le<std::uint16_t>(in, pos) != t.shape.size()) throw SchemaError("checkpoint: rank mismatch for " + t.name);
        for (auto d : t.shape)
            if (get_le<std::uint32_t>(in, pos) != d) throw SchemaError("checkpoint: shape mismatch for " + t.name);
        for (std::size_t i = 0; i < t.size; ++i) p.values[t.offset + i] = get_le<float>(in, pos);
    }
    if (pos != in.size()) throw SchemaError("checkpoint: trailing bytes");
    return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
    charm::detail::write_bytes(path, encode_checkpoint(p));
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(charm::detail::read_bytes(path));
}

} // namespace charm::nn
