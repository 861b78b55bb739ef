#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <type_traits>

namespace fosst::detail {

// FFTW planning is not thread-safe; execution with new-array functions is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

/// Computes windowed-segment DFTs of length n:
///   out[k] = (1/n) * sum_{j=-M..M} x[m+j] * taps[j+M] * exp(-2 pi i k j / n)
/// with x treated as zero outside its range. Real input uses an r2c plan and
/// fills the upper half by conjugate symmetry.
class SegmentDft {
public:
    SegmentDft(std::size_t n, bool real_input) : n_(n), real_(real_input) {
        std::lock_guard lock(fftw_planner_mutex());
        spec_ = fftw_alloc_complex(n_);
        if (real_) {
            rin_ = fftw_alloc_real(n_);
            plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), rin_, spec_, FFTW_ESTIMATE);
        } else {
            cin_ = fftw_alloc_complex(n_);
            plan_ = fftw_plan_dft_1d(static_cast<int>(n_), cin_, spec_, FFTW_FORWARD, FFTW_ESTIMATE);
        }
    }

    SegmentDft(const SegmentDft&) = delete;
    SegmentDft& operator=(const SegmentDft&) = delete;

    ~SegmentDft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(spec_);
        if (rin_) fftw_free(rin_);
        if (cin_) fftw_free(cin_);
    }

    std::size_t size() const noexcept { return n_; }

    template <class Sample>
    void run(std::span<const Sample> x, std::ptrdiff_t m, std::span<const double> taps,
             std::span<std::complex<double>> out) {
        const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
        const auto len = static_cast<std::ptrdiff_t>(x.size());
        const auto n = static_cast<std::ptrdiff_t>(n_);
        if constexpr (is_complex_v<Sample>) {
            auto* buf = reinterpret_cast<std::complex<double>*>(cin_);
            std::fill(buf, buf + n_, std::complex<double>{});
            for (std::ptrdiff_t j = -half; j <= half; ++j) {
                const auto idx = m + j;
                if (idx < 0 || idx >= len) continue;
                buf[(j + n) % n] += x[static_cast<std::size_t>(idx)] * taps[static_cast<std::size_t>(j + half)];
            }
            fftw_execute(plan_);
            const auto* s = reinterpret_cast<const std::complex<double>*>(spec_);
            const double scale = 1.0 / static_cast<double>(n_);
            for (std::size_t k = 0; k < n_; ++k) out[k] = s[k] * scale;
        } else {
            std::fill(rin_, rin_ + n_, 0.0);
            for (std::ptrdiff_t j = -half; j <= half; ++j) {
                const auto idx = m + j;
                if (idx < 0 || idx >= len) continue;
                rin_[(j + n) % n] += static_cast<double>(x[static_cast<std::size_t>(idx)]) *
                                     taps[static_cast<std::size_t>(j + half)];
            }
            fftw_execute(plan_);
            const auto* s = reinterpret_cast<const std::complex<double>*>(spec_);
            const double scale = 1.0 / static_cast<double>(n_);
            const std::size_t nyq = n_ / 2;
            for (std::size_t k = 0; k <= nyq; ++k) out[k] = s[k] * scale;
            for (std::size_t k = nyq + 1; k < n_; ++k) out[k] = std::conj(out[n_ - k]);
        }
    }

private:
    std::size_t n_;
    bool real_;
    fftw_complex* spec_ = nullptr;
    double* rin_ = nullptr;
    fftw_complex* cin_ = nullptr;
    fftw_plan plan_{};
};

}  // namespace fosst::detail
