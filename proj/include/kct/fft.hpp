#ifndef KCT_FFT_HPP
#define KCT_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace kct {

// In-place radix-2 complex FFT, n a power of two.
// Forward transform: X_k = sum_j x_j exp(-2*pi*i*j*k/n).
// Inverse transform includes the 1/n normalization.
void fft_inplace(std::complex<double>* data, std::size_t n, bool inverse);

inline void fft(std::vector<std::complex<double>>& data, bool inverse) {
    fft_inplace(data.data(), data.size(), inverse);
}

// Row-major multi-dimensional transform over all axes; every dim must be a
// power of two. Used for kernel grids up to d = 3.
void fft_nd(std::vector<std::complex<double>>& data, const std::vector<std::size_t>& dims,
            bool inverse);

}  // namespace kct

#endif  // KCT_FFT_HPP
