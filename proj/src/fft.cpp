#include "kct/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace kct {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

void fft_inplace(std::complex<double>* a, std::size_t n, bool inverse) {
    if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
    if (n == 1) return;

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    // One twiddle table per call keeps accuracy at ~n*eps without incremental
    // rotation drift. Table holds w^j for the full transform, j < n/2.
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> tw(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
        const double ang = sign * 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n);
        tw[j] = std::complex<double>(std::cos(ang), std::sin(ang));
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> w = tw[j * step];
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }

    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) a[i] *= scale;
    }
}

void fft_nd(std::vector<std::complex<double>>& data, const std::vector<std::size_t>& dims,
            bool inverse) {
    std::size_t total = 1;
    for (std::size_t d : dims) {
        if (!is_pow2(d)) throw std::invalid_argument("fft_nd: dims must be powers of two");
        total *= d;
    }
    if (data.size() != total) throw std::invalid_argument("fft_nd: data size mismatch");

    // Transform along each axis in turn (row-major layout: last axis contiguous).
    std::size_t stride = 1;
    for (std::size_t axis = dims.size(); axis-- > 0;) {
        const std::size_t n = dims[axis];
        std::vector<std::complex<double>> line(n);
        const std::size_t block = stride * n;
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (std::size_t k = 0; k < n; ++k) line[k] = data[base + off + k * stride];
                fft_inplace(line.data(), n, inverse);
                for (std::size_t k = 0; k < n; ++k) data[base + off + k * stride] = line[k];
            }
        }
        stride *= n;
    }
}

}  // namespace kct
