#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace sinc::detail {

/// Real-to-complex DFT of length n = in.size(); out holds n/2 + 1 bins.
/// Y_k = sum_n x_n exp(-2 pi i k n / N).
void rfft(std::span<const double> in, std::span<std::complex<double>> out);

/// Unnormalized inverse of rfft: x_n = sum over all N Hermitian-extended bins
/// of X_k exp(+2 pi i k n / N). The input is consumed as scratch.
void irfft(std::span<std::complex<double>> in, std::span<double> out);

}  // namespace sinc::detail
