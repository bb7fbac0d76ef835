#pragma once

/**
 * @file kvfile.hpp
 * @brief "key: value" text files, one key per line, used for manifests.
 *
 * Lines starting with '#' are comments. Keys are unique and written in
 * insertion order so that files are byte-stable for identical content.
 */

#include "charm/types.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace charm {

/// Shortest decimal text that round-trips a double.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

class KeyValueFile {
public:
    void set(const std::string& key, std::string value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = std::move(value);
                return;
            }
        entries_.emplace_back(key, std::move(value));
    }
    void set(const std::string& key, double v) { set(key, format_double(v)); }
    void set(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
    void set(const std::string& key, int v) { set(key, std::to_string(v)); }

    bool has(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.first == key) return true;
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.first == key) return e.second;
        throw SchemaError("missing key '" + key + "'");
    }

    double get_double(const std::string& key) const {
        const auto& s = get(key);
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) throw SchemaError("key '" + key + "' is not a number");
        return v;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const auto& s = get(key);
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw SchemaError("key '" + key + "' is not an unsigned integer");
        return v;
    }

    std::string to_text() const {
        std::string out;
        for (const auto& [k, v] : entries_) out += k + ": " + v + "\n";
        return out;
    }

    static KeyValueFile parse(const std::string& text) {
        KeyValueFile f;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            const auto sep = line.find(": ");
            if (sep == std::string::npos) {
                if (!line.empty() && line.back() == ':') {
                    f.set(line.substr(0, line.size() - 1), std::string{});
                    continue;
                }
                throw SchemaError("line " + std::to_string(lineno) + ": expected 'key: value'");
            }
            f.set(line.substr(0, sep), line.substr(sep + 2));
        }
        return f;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << to_text();
        if (!out) throw IoError("write failed for " + path.string());
    }

    static KeyValueFile load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

template <class Seq>
std::string join_numbers(const Seq& seq) {
    std::string out;
    for (const auto& v : seq) {
        if (!out.empty()) out.push_back(' ');
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>)
            out += format_double(v);
        else
            out += std::to_string(v);
    }
    return out;
}

inline std::vector<std::size_t> parse_indices(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    std::size_t v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw SchemaError("malformed index list");
    return out;
}

} // namespace charm
