#ifndef HFID_METRICS_HPP
#define HFID_METRICS_HPP

#include "tensor.hpp"

namespace hfid {

constexpr double kPsnrSentinel = 99.0; // dB cap for (near-)identical planes

// 10*log10(1/MSE) over all elements, values expected in [0,1]. Identical
// inputs (or any MSE small enough to exceed the cap) return the sentinel.
double psnr(const Tensor& a, const Tensor& b);

// Single-scale SSIM: 8x8 uniform sliding window, k1=0.01, k2=0.03, dynamic
// range 1, biased window variance, mean over all valid window positions.
double ssim(const Tensor& a, const Tensor& b);

} // namespace hfid

#endif
