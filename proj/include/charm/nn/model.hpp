#pragma once

/**
 * @file model.hpp
 * @brief 1-D convolutional (CNN) and residual (ResNet) classifiers over 2 x N I/Q windows.
 *
 * Parameters live in one flat vector whose layout is described by
 * param_layout(); Network<T> evaluates the forward pass and the
 * backpropagated gradient of the cross-entropy loss for one example.
 * T is float for training and double for finite-difference checks.
 */

#include "charm/digest.hpp"
#include "charm/kvfile.hpp"
#include "charm/rng.hpp"
#include "charm/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace charm::nn {

enum class Arch { CNN, ResNet };

inline std::string_view to_string(Arch a) { return a == Arch::CNN ? "CNN" : "ResNet"; }

inline Arch parse_arch(std::string_view s) {
    if (s == "CNN" || s == "cnn") return Arch::CNN;
    if (s == "ResNet" || s == "resnet") return Arch::ResNet;
    throw SchemaError("unknown architecture '" + std::string(s) + "'");
}

inline constexpr std::size_t kInputChannels = 2;
inline constexpr std::size_t kNumClasses = 3;

/// Pool strides that reproduce the 20000 -> 10 output lengths of the reference layouts.
inline constexpr std::array<std::size_t, 7> kReferencePoolPattern{2, 5, 2, 5, 2, 5, 2};

struct ModelConfig {
    Arch arch = Arch::ResNet;
    std::size_t input_len = 2048;
    std::size_t channels = 4;
    std::size_t kernel_size = 5;
    std::vector<std::size_t> pool_strides;
    std::vector<std::size_t> fc_sizes{16, 16};
    std::size_t num_classes = kNumClasses;

    std::size_t final_len() const {
        std::size_t len = input_len;
        for (auto s : pool_strides) len /= s;
        return len;
    }

    /// Width of the flattened feature vector entering the first dense layer.
    std::size_t feature_len() const {
        return (pool_strides.empty() ? kInputChannels : channels) * final_len();
    }

    void validate() const {
        if (input_len == 0) throw InvalidArgument("model: input length must be positive");
        if (channels == 0) throw InvalidArgument("model: channel count must be positive");
        if (kernel_size == 0 || kernel_size % 2 == 0) throw InvalidArgument("model: kernel size must be odd");
        if (num_classes != kNumClasses) throw InvalidArgument("model: the output layer must have exactly 3 classes");
        std::size_t prod = 1;
        for (auto s : pool_strides) {
            if (s == 0) throw InvalidArgument("model: pool stride must be positive");
            prod *= s;
        }
        if (input_len % prod != 0) throw InvalidArgument("model: product of pool strides must divide the input length");
        if (final_len() < 1) throw InvalidArgument("model: final feature length must be at least 1");
        for (auto f : fc_sizes)
            if (f == 0) throw InvalidArgument("model: dense layer width must be positive");
    }

    std::string canonical_text() const {
        KeyValueFile kv;
        kv.set("arch", std::string(to_string(arch)));
        kv.set("input_len", static_cast<std::uint64_t>(input_len));
        kv.set("channels", static_cast<std::uint64_t>(channels));
        kv.set("kernel_size", static_cast<std::uint64_t>(kernel_size));
        kv.set("pool_strides", join_numbers(pool_strides));
        kv.set("fc_sizes", join_numbers(fc_sizes));
        kv.set("num_classes", static_cast<std::uint64_t>(num_classes));
        return kv.to_text();
    }

    std::string digest() const { return sha256_hex(canonical_text()); }

    static ModelConfig from_text(const std::string& text) {
        const auto kv = KeyValueFile::parse(text);
        ModelConfig c;
        c.arch = parse_arch(kv.get("arch"));
        c.input_len = kv.get_u64("input_len");
        c.channels = kv.get_u64("channels");
        c.kernel_size = kv.get_u64("kernel_size");
        c.pool_strides = parse_indices(kv.get("pool_strides"));
        c.fc_sizes = parse_indices(kv.get("fc_sizes"));
        c.num_classes = kv.get_u64("num_classes");
        c.validate();
        return c;
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/**
 * @brief Scale the reference pool pattern to an input length n.
 *
 * Each stage greedily takes the largest stride not above the reference stride
 * that divides the remaining length and keeps it at or above min_final. At
 * n = 20000 this returns the reference pattern unchanged.
 */
inline std::vector<std::size_t> scaled_pool_strides(std::size_t n, std::size_t min_final = 8) {
    std::vector<std::size_t> out;
    std::size_t len = n;
    for (auto target : kReferencePoolPattern) {
        std::size_t pick = 1;
        for (std::size_t s = target; s >= 2; --s)
            if (len % s == 0 && len / s >= min_final) {
                pick = s;
                break;
            }
        out.push_back(pick);
        len /= pick;
    }
    return out;
}

/// Layout A: seven conv+pool stages of width 7, dense 18 and 16.
inline ModelConfig default_cnn(std::size_t n) {
    ModelConfig c;
    c.arch = Arch::CNN;
    c.input_len = n;
    c.channels = 7;
    c.kernel_size = 5;
    c.pool_strides = scaled_pool_strides(n);
    c.fc_sizes = {18, 16};
    return c;
}

/// Layout B: seven residual stacks of width 4, dense 16 and 16.
inline ModelConfig default_resnet(std::size_t n) {
    ModelConfig c;
    c.arch = Arch::ResNet;
    c.input_len = n;
    c.channels = 4;
    c.kernel_size = 5;
    c.pool_strides = scaled_pool_strides(n);
    c.fc_sizes = {16, 16};
    return c;
}

// ------------------------------------------------------------------ layout

struct TensorInfo {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
    std::size_t fan_in = 0;
    bool is_bias = false;
    bool is_conv = false;
};

inline std::vector<TensorInfo> param_layout(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<TensorInfo> out;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<std::size_t> shape, std::size_t fan_in, bool bias, bool conv) {
        std::size_t size = 1;
        for (auto d : shape) size *= d;
        out.push_back({std::move(name), std::move(shape), offset, size, fan_in, bias, conv});
        offset += size;
    };
    auto add_conv = [&](const std::string& prefix, std::size_t cin, std::size_t cout, std::size_t k) {
        add(prefix + ".weight", {cout, cin, k}, cin * k, false, true);
        add(prefix + ".bias", {cout}, cin * k, true, true);
    };

    std::size_t cin = kInputChannels;
    for (std::size_t s = 0; s < cfg.pool_strides.size(); ++s) {
        const auto c = cfg.channels;
        if (cfg.arch == Arch::CNN) {
            add_conv("conv" + std::to_string(s), cin, c, cfg.kernel_size);
        } else {
            const auto p = "stack" + std::to_string(s);
            add_conv(p + ".proj", cin, c, 1);
            for (int u = 0; u < 2; ++u)
                for (const char* which : {"conv_a", "conv_b"})
                    add_conv(p + ".unit" + std::to_string(u) + "." + which, c, c, cfg.kernel_size);
        }
        cin = c;
    }
    std::size_t in = cfg.feature_len();
    std::vector<std::size_t> widths = cfg.fc_sizes;
    widths.push_back(cfg.num_classes);
    for (std::size_t j = 0; j < widths.size(); ++j) {
        const auto p = "fc" + std::to_string(j);
        add(p + ".weight", {widths[j], in}, in, false, false);
        add(p + ".bias", {widths[j]}, in, true, false);
        in = widths[j];
    }
    return out;
}

/// Exact number of scalar parameters.
inline std::size_t param_count(const ModelConfig& cfg) {
    const auto layout = param_layout(cfg);
    return layout.empty() ? 0 : layout.back().offset + layout.back().size;
}

/// Trained or initialised weights together with the configuration they belong to.
struct ModelParams {
    ModelConfig config;
    std::vector<float> values;

    std::string config_digest() const { return config.digest(); }
};

/**
 * @brief Seeded initial weights.
 *
 * Conv layers: He uniform; dense layers: LeCun uniform; biases zero. The
 * last conv of every residual branch is scaled by kResidualInitScale, so with
 * the default of zero each stack starts as projection plus identity.
 */
inline constexpr double kResidualInitScale = 0.0;

inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    const auto layout = param_layout(cfg);
    ModelParams p{cfg, std::vector<float>(param_count(cfg), 0.0f)};
    Rng rng(derive_seed(seed, {0x1417}));
    for (const auto& t : layout) {
        if (t.is_bias) continue;
        double bound = std::sqrt((t.is_conv ? 6.0 : 3.0) / static_cast<double>(t.fan_in));
        if (t.name.ends_with("conv_b.weight")) bound *= kResidualInitScale;
        for (std::size_t i = 0; i < t.size; ++i) p.values[t.offset + i] = static_cast<float>(rng.uniform(-bound, bound));
    }
    return p;
}

// ------------------------------------------------------------- primitives

namespace detail {

/// Same-padded 1-D convolution: out[o][t] = b[o] + sum_i sum_k w[o][i][k] in[i][t + k - k/2].
template <class T>
void conv_forward(const T* w, const T* b, const T* in, T* out, std::size_t cin, std::size_t cout, std::size_t k,
                  std::size_t len) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto L = static_cast<std::ptrdiff_t>(len);
    for (std::size_t o = 0; o < cout; ++o) {
        T* y = out + o * len;
        std::fill(y, y + len, b[o]);
        for (std::size_t i = 0; i < cin; ++i) {
            const T* x = in + i * len;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const T wv = w[(o * cin + i) * k + kk];
                const auto shift = static_cast<std::ptrdiff_t>(kk) - pad;
                const auto lo = std::max<std::ptrdiff_t>(0, -shift), hi = std::min(L, L - shift);
                for (auto t = lo; t < hi; ++t) y[t] += wv * x[t + shift];
            }
        }
    }
}

/**
 * @brief sum_{t in [lo, hi)} a[t] * b[t] (b == nullptr means all ones).
 *
 * Eight fixed partial sums combined in a fixed order: the result is
 * deterministic and the loop vectorises without reassociation flags.
 */
template <class T>
T dot_lanes(const T* a, const T* b, std::ptrdiff_t lo, std::ptrdiff_t hi) {
    constexpr std::ptrdiff_t W = 8;
    std::array<T, W> acc{};
    auto t = lo;
    if (b) {
        for (; t + W <= hi; t += W)
            for (std::ptrdiff_t j = 0; j < W; ++j) acc[j] += a[t + j] * b[t + j];
    } else {
        for (; t + W <= hi; t += W)
            for (std::ptrdiff_t j = 0; j < W; ++j) acc[j] += a[t + j];
    }
    T tail{};
    for (; t < hi; ++t) tail += b ? a[t] * b[t] : a[t];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

/// Accumulates dw, db and (when din is non-null) din for conv_forward.
template <class T>
void conv_backward(const T* w, const T* in, const T* dout, T* dw, T* db, T* din, std::size_t cin, std::size_t cout,
                   std::size_t k, std::size_t len) {
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto L = static_cast<std::ptrdiff_t>(len);
    for (std::size_t o = 0; o < cout; ++o) {
        const T* dy = dout + o * len;
        db[o] += dot_lanes(dy, static_cast<const T*>(nullptr), 0, static_cast<std::ptrdiff_t>(len));
        for (std::size_t i = 0; i < cin; ++i) {
            const T* x = in + i * len;
            T* dx = din ? din + i * len : nullptr;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const auto widx = (o * cin + i) * k + kk;
                const auto shift = static_cast<std::ptrdiff_t>(kk) - pad;
                const auto lo = std::max<std::ptrdiff_t>(0, -shift), hi = std::min(L, L - shift);
                dw[widx] += dot_lanes(dy, x + shift, lo, hi);
                if (dx) {
                    const T wv = w[widx];
                    for (auto t = lo; t < hi; ++t) dx[t + shift] += wv * dy[t];
                }
            }
        }
    }
}

template <class T>
void relu_inplace(std::vector<T>& v) {
    for (auto& x : v) x = x > T(0) ? x : T(0);
}

/// Zero the gradient where the ReLU output was not positive.
template <class T>
void relu_mask(std::vector<T>& grad, const std::vector<T>& out) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(out[i] > T(0))) grad[i] = T(0);
}

/// Non-overlapping max-pool; records the winning input index (first maximum on ties).
template <class T>
void pool_forward(const std::vector<T>& in, std::vector<T>& out, std::vector<std::uint32_t>& arg, std::size_t ch,
                  std::size_t len, std::size_t stride) {
    const auto olen = len / stride;
    out.assign(ch * olen, T(0));
    arg.assign(ch * olen, 0);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t j = 0; j < olen; ++j) {
            std::size_t best = c * len + j * stride;
            for (std::size_t s = 1; s < stride; ++s)
                if (in[best + 0] < in[c * len + j * stride + s]) best = c * len + j * stride + s;
            out[c * olen + j] = in[best];
            arg[c * olen + j] = static_cast<std::uint32_t>(best);
        }
}

template <class T>
std::vector<T> pool_backward(const std::vector<T>& dout, const std::vector<std::uint32_t>& arg, std::size_t in_size) {
    std::vector<T> din(in_size, T(0));
    for (std::size_t j = 0; j < dout.size(); ++j) din[arg[j]] += dout[j];
    return din;
}

} // namespace detail

// ---------------------------------------------------------------- network

template <class T>
class Network {
public:
    explicit Network(ModelConfig cfg) : cfg_(std::move(cfg)), layout_(param_layout(cfg_)) {
        std::size_t t = 0;
        std::size_t cin = kInputChannels, len = cfg_.input_len;
        auto conv_ref = [&](std::size_t ci, std::size_t k) {
            ConvRef r{layout_[t].offset, layout_[t + 1].offset, ci, cfg_.channels, k};
            t += 2;
            return r;
        };
        for (auto stride : cfg_.pool_strides) {
            Stage s;
            s.cin = cin;
            s.len = len;
            s.stride = stride;
            if (cfg_.arch == Arch::CNN) {
                s.conv = conv_ref(cin, cfg_.kernel_size);
            } else {
                s.conv = conv_ref(cin, 1);
                for (auto& u : s.units) u = conv_ref(cfg_.channels, cfg_.kernel_size);
            }
            stages_.push_back(s);
            cin = cfg_.channels;
            len /= stride;
        }
        std::size_t in = cfg_.feature_len();
        for (; t < layout_.size(); t += 2) {
            dense_.push_back({layout_[t].offset, layout_[t + 1].offset, in, layout_[t].shape[0]});
            in = layout_[t].shape[0];
        }
        count_ = layout_.back().offset + layout_.back().size;
    }

    const ModelConfig& config() const { return cfg_; }
    const std::vector<TensorInfo>& layout() const { return layout_; }
    std::size_t param_count() const { return count_; }

    /// Class probabilities (Clear, LTE, WiFi) for one window laid out as N I-values then N Q-values.
    std::array<double, kNumClasses> forward(std::span<const T> params, std::span<const float> iq) const {
        Tape tape;
        run_forward(params, iq, tape);
        return tape.probs;
    }

    /**
     * @brief Cross-entropy loss for one labelled window; adds dLoss/dParams into grad.
     * @param label class index in [0, 3).
     */
    double loss_and_grad(std::span<const T> params, std::span<const float> iq, std::size_t label,
                         std::span<T> grad) const {
        if (label >= kNumClasses) throw InvalidArgument("network: label must be Clear, LTE or WiFi");
        if (grad.size() != count_) throw InvalidArgument("network: gradient buffer has the wrong size");
        Tape tape;
        run_forward(params, iq, tape);
        const double loss = tape.log_sum_exp - static_cast<double>(tape.logits[label]);

        // Head.
        std::vector<T> dy(kNumClasses);
        for (std::size_t c = 0; c < kNumClasses; ++c)
            dy[c] = static_cast<T>(tape.probs[c] - (c == label ? 1.0 : 0.0));
        for (std::size_t j = dense_.size(); j-- > 0;) {
            const auto& d = dense_[j];
            const auto& x = tape.dense_in[j];
            const T* w = params.data() + d.w_off;
            std::vector<T> dx(d.in, T(0));
            for (std::size_t o = 0; o < d.out; ++o) {
                grad[d.b_off + o] += dy[o];
                for (std::size_t i = 0; i < d.in; ++i) {
                    grad[d.w_off + o * d.in + i] += dy[o] * x[i];
                    dx[i] += w[o * d.in + i] * dy[o];
                }
            }
            if (j > 0) // previous layer is tanh: d/dz tanh = 1 - y^2, y is this layer's input
                for (std::size_t i = 0; i < d.in; ++i) dx[i] *= T(1) - x[i] * x[i];
            dy = std::move(dx);
        }

        // Feature extractor.
        for (std::size_t s = stages_.size(); s-- > 0;) {
            const auto& st = stages_[s];
            const auto& tp = tape.stages[s];
            const auto width = cfg_.channels * st.len;
            auto dz = detail::pool_backward(dy, tp.pool_arg, width);
            const bool need_dx = s > 0;
            std::vector<T> dx(need_dx ? st.cin * st.len : 0, T(0));
            if (cfg_.arch == Arch::CNN) {
                detail::relu_mask(dz, tp.out);
                conv_back(params, grad, st.conv, tp.in, dz, need_dx ? dx.data() : nullptr, st.len);
            } else {
                // out = relu(u1 + conv_b(relu(conv_a(u1)))) with u1 = relu(u0 + ...) likewise.
                std::vector<T> du = std::move(dz);
                for (int u = 1; u >= 0; --u) {
                    const auto& post = u == 1 ? tp.out : tp.u1;
                    const auto& pre_in = u == 1 ? tp.u1 : tp.u0;
                    const auto& h = u == 1 ? tp.h2 : tp.h1;
                    detail::relu_mask(du, post);
                    std::vector<T> dh(width, T(0));
                    conv_back(params, grad, st.units[2 * u + 1], h, du, dh.data(), st.len);
                    detail::relu_mask(dh, h);
                    conv_back(params, grad, st.units[2 * u], pre_in, dh, du.data(), st.len);
                }
                conv_back(params, grad, st.conv, tp.in, du, need_dx ? dx.data() : nullptr, st.len);
            }
            dy = std::move(dx);
        }
        return loss;
    }

private:
    struct ConvRef {
        std::size_t w_off = 0, b_off = 0, cin = 0, cout = 0, k = 1;
    };
    struct Stage {
        std::size_t cin = 0, len = 0, stride = 1;
        ConvRef conv;                 ///< CNN conv, or ResNet 1x1 projection
        std::array<ConvRef, 4> units; ///< ResNet unit0.a, unit0.b, unit1.a, unit1.b
    };
    struct Dense {
        std::size_t w_off = 0, b_off = 0, in = 0, out = 0;
    };
    struct StageTape {
        std::vector<T> in, u0, h1, u1, h2, out;
        std::vector<std::uint32_t> pool_arg;
    };
    struct Tape {
        std::vector<StageTape> stages;
        std::vector<std::vector<T>> dense_in;
        std::vector<T> logits;
        double log_sum_exp = 0.0;
        std::array<double, kNumClasses> probs{};
    };

    void conv_fwd(std::span<const T> p, const ConvRef& c, const std::vector<T>& in, std::vector<T>& out,
                  std::size_t len) const {
        out.assign(c.cout * len, T(0));
        detail::conv_forward(p.data() + c.w_off, p.data() + c.b_off, in.data(), out.data(), c.cin, c.cout, c.k, len);
    }

    void conv_back(std::span<const T> p, std::span<T> g, const ConvRef& c, const std::vector<T>& in,
                   const std::vector<T>& dout, T* din, std::size_t len) const {
        detail::conv_backward(p.data() + c.w_off, in.data(), dout.data(), g.data() + c.w_off, g.data() + c.b_off, din,
                              c.cin, c.cout, c.k, len);
    }

    void run_forward(std::span<const T> params, std::span<const float> iq, Tape& tape) const {
        if (params.size() != count_) throw InvalidArgument("network: parameter vector has the wrong size");
        const auto n = cfg_.input_len;
        if (iq.size() != kInputChannels * n)
            throw InvalidArgument("network: window has " + std::to_string(iq.size() / 2) + " samples, expected " +
                                  std::to_string(n));
        double energy = 0.0;
        for (float v : iq) {
            if (!std::isfinite(v)) throw InvalidArgument("network: window contains non-finite values");
            energy += static_cast<double>(v) * static_cast<double>(v);
        }
        const double rms = std::sqrt(energy / static_cast<double>(n));
        const double scale = rms > 0.0 ? 1.0 / rms : 1.0;
        std::vector<T> x(iq.size());
        for (std::size_t i = 0; i < iq.size(); ++i) x[i] = static_cast<T>(static_cast<double>(iq[i]) * scale);

        tape.stages.resize(stages_.size());
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            const auto& st = stages_[s];
            auto& tp = tape.stages[s];
            tp.in = std::move(x);
            if (cfg_.arch == Arch::CNN) {
                conv_fwd(params, st.conv, tp.in, tp.out, st.len);
                detail::relu_inplace(tp.out);
            } else {
                conv_fwd(params, st.conv, tp.in, tp.u0, st.len);
                residual_unit(params, st.units[0], st.units[1], tp.u0, tp.h1, tp.u1, st.len);
                residual_unit(params, st.units[2], st.units[3], tp.u1, tp.h2, tp.out, st.len);
            }
            detail::pool_forward(tp.out, x, tp.pool_arg, cfg_.channels, st.len, st.stride);
        }

        tape.dense_in.resize(dense_.size());
        for (std::size_t j = 0; j < dense_.size(); ++j) {
            const auto& d = dense_[j];
            tape.dense_in[j] = std::move(x);
            const auto& in = tape.dense_in[j];
            std::vector<T> y(d.out);
            for (std::size_t o = 0; o < d.out; ++o) {
                T acc = params[d.b_off + o];
                const T* w = params.data() + d.w_off + o * d.in;
                for (std::size_t i = 0; i < d.in; ++i) acc += w[i] * in[i];
                y[o] = j + 1 < dense_.size() ? std::tanh(acc) : acc;
            }
            x = std::move(y);
        }
        tape.logits = std::move(x);

        double mx = static_cast<double>(tape.logits[0]);
        for (auto v : tape.logits) mx = std::max(mx, static_cast<double>(v));
        double sum = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c) sum += std::exp(static_cast<double>(tape.logits[c]) - mx);
        tape.log_sum_exp = mx + std::log(sum);
        for (std::size_t c = 0; c < kNumClasses; ++c)
            tape.probs[c] = std::exp(static_cast<double>(tape.logits[c]) - tape.log_sum_exp);
        if (!std::isfinite(tape.log_sum_exp)) tape.probs.fill(std::numeric_limits<double>::quiet_NaN());
    }

    /// out = relu(in + conv_b(relu(conv_a(in)))); h keeps relu(conv_a(in)).
    void residual_unit(std::span<const T> p, const ConvRef& a, const ConvRef& b, const std::vector<T>& in,
                       std::vector<T>& h, std::vector<T>& out, std::size_t len) const {
        conv_fwd(p, a, in, h, len);
        detail::relu_inplace(h);
        conv_fwd(p, b, h, out, len);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
        detail::relu_inplace(out);
    }

    ModelConfig cfg_;
    std::vector<TensorInfo> layout_;
    std::vector<Stage> stages_;
    std::vector<Dense> dense_;
    std::size_t count_ = 0;
};

} // namespace charm::nn
