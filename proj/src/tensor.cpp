#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hfid {

std::string to_string(const Dims& d) {
    return "(" + std::to_string(d.n) + "," + std::to_string(d.c) + "," +
           std::to_string(d.h) + "," + std::to_string(d.w) + ")";
}

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::Io: return "io";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::BadVersion: return "bad-version";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::DimOverflow: return "dim-overflow";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::Config: return "config";
    case ErrorCode::Internal: return "internal";
    }
    return "unknown";
}

bool all_finite(const Tensor& t) {
    const float* p = t.data();
    int64_t n = t.size();
    for (int64_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

void assert_finite(const Tensor& t, const std::string& context) {
    if (!all_finite(t))
        raise(ErrorCode::Numeric, context + ": non-finite value in tensor " + to_string(t.dims()));
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_dims(b))
        raise(ErrorCode::ShapeMismatch,
              "max_abs_diff: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    float m = 0.0f;
    for (int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_dims(b))
        raise(ErrorCode::ShapeMismatch,
              "mean_abs_diff: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    if (a.size() == 0) return 0.0;
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i)
        s += std::fabs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    return s / static_cast<double>(a.size());
}

Tensor slice_batch(const Tensor& src, int64_t n) {
    const Dims& d = src.dims();
    if (n < 0 || n >= d.n)
        raise(ErrorCode::InvalidArgument, "slice_batch: index out of range");
    Tensor out(Dims{1, d.c, d.h, d.w});
    int64_t stride = d.c * d.h * d.w;
    std::memcpy(out.data(), src.data() + n * stride, static_cast<size_t>(stride) * sizeof(float));
    return out;
}

Tensor stack_batch(const std::vector<Tensor>& items) {
    if (items.empty())
        raise(ErrorCode::InvalidArgument, "stack_batch: empty list");
    Dims d = items[0].dims();
    Tensor out(Dims{static_cast<int64_t>(items.size()), d.c, d.h, d.w});
    int64_t stride = d.c * d.h * d.w;
    for (size_t i = 0; i < items.size(); ++i) {
        if (!(items[i].dims() == Dims{1, d.c, d.h, d.w}))
            raise(ErrorCode::ShapeMismatch, "stack_batch: mismatched item dims");
        std::memcpy(out.data() + static_cast<int64_t>(i) * stride, items[i].data(),
                    static_cast<size_t>(stride) * sizeof(float));
    }
    return out;
}

void clamp01(Tensor& t) {
    float* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i)
        p[i] = std::clamp(p[i], 0.0f, 1.0f);
}

} // namespace hfid
