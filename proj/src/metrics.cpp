#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hfid {

namespace {

constexpr int kWindow = 8;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_pair(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_dims(b))
        raise(ErrorCode::ShapeMismatch, std::string(what) + ": " + to_string(a.dims()) + " vs " +
                                            to_string(b.dims()));
    if (a.size() == 0)
        raise(ErrorCode::InvalidArgument, std::string(what) + ": empty tensors");
}

// Summed-area table with one row/column of zero padding.
std::vector<double> integral_image(const float* p, int64_t h, int64_t w,
                                   const float* q = nullptr) {
    std::vector<double> s(static_cast<size_t>((h + 1) * (w + 1)), 0.0);
    for (int64_t y = 0; y < h; ++y) {
        double row = 0.0;
        for (int64_t x = 0; x < w; ++x) {
            double v = q ? static_cast<double>(p[y * w + x]) * q[y * w + x]
                         : static_cast<double>(p[y * w + x]);
            row += v;
            s[static_cast<size_t>((y + 1) * (w + 1) + x + 1)] =
                s[static_cast<size_t>(y * (w + 1) + x + 1)] + row;
        }
    }
    return s;
}

double window_sum(const std::vector<double>& s, int64_t w, int64_t y, int64_t x, int64_t k) {
    int64_t stride = w + 1;
    return s[static_cast<size_t>((y + k) * stride + x + k)] -
           s[static_cast<size_t>(y * stride + x + k)] -
           s[static_cast<size_t>((y + k) * stride + x)] + s[static_cast<size_t>(y * stride + x)];
}

} // namespace

double psnr(const Tensor& a, const Tensor& b) {
    check_pair(a, b, "psnr");
    double sq = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        sq += d * d;
    }
    double mse = sq / static_cast<double>(a.size());
    if (mse <= 0.0)
        return kPsnrSentinel;
    return std::min(kPsnrSentinel, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
    check_pair(a, b, "ssim");
    const Dims& d = a.dims();
    if (d.h < kWindow || d.w < kWindow)
        raise(ErrorCode::InvalidArgument, "ssim: plane smaller than the 8x8 window");

    const double inv_n = 1.0 / (kWindow * kWindow);
    double total = 0.0;
    int64_t windows = 0;
    int64_t plane = d.h * d.w;
    for (int64_t n = 0; n < d.n; ++n)
        for (int64_t c = 0; c < d.c; ++c) {
            const float* pa = a.data() + (n * d.c + c) * plane;
            const float* pb = b.data() + (n * d.c + c) * plane;
            std::vector<double> sa = integral_image(pa, d.h, d.w);
            std::vector<double> sb = integral_image(pb, d.h, d.w);
            std::vector<double> saa = integral_image(pa, d.h, d.w, pa);
            std::vector<double> sbb = integral_image(pb, d.h, d.w, pb);
            std::vector<double> sab = integral_image(pa, d.h, d.w, pb);
            for (int64_t y = 0; y + kWindow <= d.h; ++y)
                for (int64_t x = 0; x + kWindow <= d.w; ++x) {
                    double ma = window_sum(sa, d.w, y, x, kWindow) * inv_n;
                    double mb = window_sum(sb, d.w, y, x, kWindow) * inv_n;
                    double va = window_sum(saa, d.w, y, x, kWindow) * inv_n - ma * ma;
                    double vb = window_sum(sbb, d.w, y, x, kWindow) * inv_n - mb * mb;
                    double cab = window_sum(sab, d.w, y, x, kWindow) * inv_n - ma * mb;
                    double num = (2.0 * ma * mb + kC1) * (2.0 * cab + kC2);
                    double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
                    total += num / den;
                    ++windows;
                }
        }
    return total / static_cast<double>(windows);
}

} // namespace hfid
