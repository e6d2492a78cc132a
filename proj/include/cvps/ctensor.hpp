#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "cvps/ndarray.hpp"

namespace cvps {

using cplx = std::complex<double>;
using ComplexTensor = NdArray<cplx>;
using RealTensor = NdArray<double>;

struct ShiftSpec {
  std::size_t axis = 0;
  long amount = 0;
};

inline ComplexTensor circular_shift(const ComplexTensor& t, ShiftSpec s) {
  return circular_shift(t, s.axis, s.amount);
}

ComplexTensor hadamard(const ComplexTensor& a, const ComplexTensor& b);

/**
 * Circular cross-correlation, out[n] = sum_j k[j] * x[(n + j) mod N] per spatial
 * axis, followed by downsampling by `stride` (fixed phase 0).
 *
 * Two layouts are accepted:
 *  - kernel.rank() == x.rank(): single channel, every axis is spatial;
 *  - kernel.rank() == x.rank() + 1: x is [C_in, spatial...] and kernel is
 *    [C_out, C_in, kspatial...]; output is [C_out, spatial...].
 */
ComplexTensor conv_circular(const ComplexTensor& x, const ComplexTensor& kernel,
                            std::size_t stride = 1);

RealTensor modulus(const ComplexTensor& t);
RealTensor arg(const ComplexTensor& t);

/// Pairwise (cascade) summation; result depends only on the multiset order, not on
/// the magnitude of the input length, and keeps rounding error at O(log n).
double pairwise_sum(std::span<const double> v);
cplx pairwise_sum(std::span<const cplx> v);

double norm_l2(const ComplexTensor& t);

enum class PoolKind { mean, sum };

/**
 * Reduces every spatial position of each channel. The tensor is read as
 * [C, spatial...] when `channel_axis` is true, otherwise as one channel.
 */
ComplexTensor global_pool(const ComplexTensor& t, PoolKind kind,
                          bool channel_axis = true);

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b);
bool all_finite(const ComplexTensor& t);

}  // namespace cvps
