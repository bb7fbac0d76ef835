#pragma once

/**
 * @file fft.hpp
 * @brief Thin RAII wrapper over FFTW for the inverse transforms used by the OFDM synthesizers.
 */

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>

namespace charm {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

/// Unnormalised backward DFT of a fixed size: out[n] = sum_k in[k] exp(+2 pi i k n / N).
class InverseDft {
public:
    explicit InverseDft(std::size_t n) : n_(n) {
        std::lock_guard lock(detail::fftw_planner_mutex());
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~InverseDft() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    InverseDft(const InverseDft&) = delete;
    InverseDft& operator=(const InverseDft&) = delete;

    std::size_t size() const { return n_; }

    /// In-place transform of `bins` (size must equal size()).
    void run(std::span<std::complex<double>> bins) {
        auto* raw = reinterpret_cast<fftw_complex*>(bins.data());
        for (std::size_t i = 0; i < n_; ++i) {
            buf_[i][0] = raw[i][0];
            buf_[i][1] = raw[i][1];
        }
        fftw_execute(plan_);
        for (std::size_t i = 0; i < n_; ++i) {
            raw[i][0] = buf_[i][0];
            raw[i][1] = buf_[i][1];
        }
    }

    /// Per-thread cached transform for size n.
    static InverseDft& cached(std::size_t n) {
        thread_local std::map<std::size_t, std::unique_ptr<InverseDft>> cache;
        auto& slot = cache[n];
        if (!slot) slot = std::make_unique<InverseDft>(n);
        return *slot;
    }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

} // namespace charm
