#pragma once

/**
 * @file pipeline.hpp
 * @brief Pipeline configuration file: dataset, model, training and sweep sections.
 */

#include "charm/dataset.hpp"
#include "charm/nn/abstain.hpp"
#include "charm/nn/model.hpp"
#include "charm/nn/train.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace charm {

struct PipelineConfig {
    GenConfig dataset;
    nn::ModelConfig model = nn::default_resnet(2048);
    nn::TrainConfig train;
    double alpha_step = 0.05;
    std::vector<std::size_t> sweep_input_lens{256, 512, 1024, 2048};

    /// Default-shaped model of the configured arch at another input length.
    nn::ModelConfig model_at(std::size_t n) const {
        auto c = model.arch == nn::Arch::CNN ? nn::default_cnn(n) : nn::default_resnet(n);
        c.channels = model.channels;
        c.kernel_size = model.kernel_size;
        c.fc_sizes = model.fc_sizes;
        return c;
    }

    std::vector<double> alpha_grid() const {
        std::vector<double> g;
        for (int k = 1; alpha_step * k <= nn::kLn3; ++k) g.push_back(alpha_step * k);
        g.push_back(nn::kLn3);
        return g;
    }

    void override_seed(std::uint64_t seed) {
        dataset.seed = seed;
        train.seed = seed;
    }

    std::string canonical_text() const {
        std::string out = "[dataset]\n" + dataset.canonical_text() + "[model]\n" + model.canonical_text() + "[train]\n" +
                          train.canonical_text();
        out += "[alpha]\nstep: " + format_double(alpha_step) + "\n[sweep]\ninput_lens: " + join_numbers(sweep_input_lens) +
               "\n";
        return out;
    }

    std::string digest() const { return sha256_hex(canonical_text()); }

    void validate() const {
        dataset.validate();
        model.validate();
        train.validate();
        if (model.input_len != dataset.window_len)
            throw InvalidArgument("pipeline: model input length must equal the dataset window length");
        if (!(alpha_step > 0.0 && alpha_step <= nn::kLn3)) throw InvalidArgument("pipeline: alpha step out of range");
        if (sweep_input_lens.empty()) throw InvalidArgument("pipeline: sweep needs at least one input length");
    }
};

namespace detail {

template <class T>
void read_opt(const YAML::Node& n, const char* key, T& out) {
    if (!n || !n[key]) return;
    try {
        out = n[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

} // namespace detail

inline PipelineConfig parse_pipeline(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    using detail::read_opt;
    PipelineConfig c;
    try {
        const auto d = root["dataset"];
        read_opt(d, "per_class", c.dataset.per_class);
        read_opt(d, "window_len", c.dataset.window_len);
        read_opt(d, "sample_rate_hz", c.dataset.sample_rate_hz);
        read_opt(d, "seed", c.dataset.seed);
        read_opt(d, "snr_sweep_db", c.dataset.snr_sweep_db);
        if (d && d["traffic"]) {
            c.dataset.traffic.clear();
            for (const auto& t : d["traffic"]) c.dataset.traffic.push_back(parse_traffic(t.as<std::string>()));
        }
        read_opt(d, "windows_per_capture", c.dataset.windows_per_capture);
        read_opt(d, "take_per_capture", c.dataset.take_per_capture);
        read_opt(d, "min_active_fraction", c.dataset.min_active_fraction);
        read_opt(d, "test_alpha_fraction", c.dataset.test_alpha_fraction);
        read_opt(d, "interference_gain_db", c.dataset.interference_gain_db);

        const auto m = root["model"];
        std::string arch = "ResNet";
        read_opt(m, "arch", arch);
        std::size_t n = c.dataset.window_len;
        read_opt(m, "input_len", n);
        c.model = nn::parse_arch(arch) == nn::Arch::CNN ? nn::default_cnn(n) : nn::default_resnet(n);
        read_opt(m, "channels", c.model.channels);
        read_opt(m, "kernel_size", c.model.kernel_size);
        read_opt(m, "pool_strides", c.model.pool_strides);
        read_opt(m, "fc_sizes", c.model.fc_sizes);

        const auto t = root["train"];
        read_opt(t, "learning_rate", c.train.learning_rate);
        read_opt(t, "batch_size", c.train.batch_size);
        read_opt(t, "max_epochs", c.train.max_epochs);
        read_opt(t, "patience", c.train.patience);
        read_opt(t, "seed", c.train.seed);

        read_opt(root["alpha"], "step", c.alpha_step);
        read_opt(root["sweep"], "input_lens", c.sweep_input_lens);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
    }
    return c;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline PipelineConfig load_pipeline(const std::filesystem::path& path) { return parse_pipeline(read_text_file(path)); }

} // namespace charm
