#pragma once

#include <cstddef>
#include <vector>

#include "rpwno/tensor.hpp"

namespace rpwno {

// Daubechies-N orthonormal filter bank, 2N taps each.
//
// Analysis is correlation with the decomposition filters followed by downsampling:
//   approx[i] = sum_k dec_lo[k] * x[(2i + k) mod n]
//   detail[i] = sum_k dec_hi[k] * x[(2i + k) mod n]
// and dec_hi[k] = (-1)^k dec_lo[2N-1-k]. The reconstruction filters are the time reverses of the
// decomposition filters, so synthesis is the exact adjoint (and inverse) of analysis.
struct WaveletFilter {
    int order = 0;
    std::vector<double> dec_lo;
    std::vector<double> dec_hi;
    std::vector<double> rec_lo;
    std::vector<double> rec_hi;

    std::size_t length() const { return dec_lo.size(); }
};

constexpr int kMinDaubechiesOrder = 1;
constexpr int kMaxDaubechiesOrder = 10;

WaveletFilter daubechies_filters(int order);

// Largest level count for which every intermediate length stays even under periodization.
std::size_t max_levels(std::size_t n);

struct Dwt1dCoeffs {
    Tensor approx;                // [..., n / 2^levels]
    std::vector<Tensor> details;  // finest first; details[l] is [..., n / 2^(l+1)]
    std::size_t levels = 0;
    std::size_t original_length = 0;
};

// Periodized multi-level transform along the last axis; leading axes are batched.
Dwt1dCoeffs dwt1d(const Tensor& x, const WaveletFilter& filter, std::size_t levels);
Tensor idwt1d(const Dwt1dCoeffs& coeffs, const WaveletFilter& filter);

// Subband names give the filter applied along the row axis first, then the column axis:
// lh = low along rows and high along columns, hl = high along rows and low along columns.
struct DetailBands {
    Tensor lh;
    Tensor hl;
    Tensor hh;
};

struct Dwt2dCoeffs {
    Tensor approx;                     // LL at the coarsest level
    std::vector<DetailBands> details;  // finest first
    std::size_t levels = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// Separable periodized transform over the two trailing axes [..., rows, cols].
Dwt2dCoeffs dwt2d(const Tensor& x, const WaveletFilter& filter, std::size_t levels);
Tensor idwt2d(const Dwt2dCoeffs& coeffs, const WaveletFilter& filter);

enum class Band { Low, High };

// Matrix [n / 2^levels, n] mapping a length-n signal to its final-level coefficients:
// the approximation for Band::Low, the coarsest detail for Band::High. Built by pushing unit
// vectors through dwt1d, so it is exactly the transform's final-level analysis operator.
// Its transpose synthesizes a signal from those coefficients alone.
Tensor final_level_analysis(const WaveletFilter& filter, std::size_t n, std::size_t levels, Band band);

}  // namespace rpwno
