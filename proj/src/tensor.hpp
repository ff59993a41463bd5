#ifndef HFID_TENSOR_HPP
#define HFID_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace hfid {

struct Dims {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    int64_t count() const { return n * c * h * w; }
    bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

// Dense 4-D float32 array in (batch, channels, height, width) row-major
// order. The universal carrier for images, activations and weights.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Dims dims) : dims_(dims) {
        if (dims.n < 0 || dims.c < 0 || dims.h < 0 || dims.w < 0)
            raise(ErrorCode::InvalidArgument, "negative tensor dimension");
        data_.assign(static_cast<size_t>(dims.count()), 0.0f);
    }

    Tensor(Dims dims, float fill) : Tensor(dims) {
        data_.assign(data_.size(), fill);
    }

    const Dims& dims() const { return dims_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& at(int64_t n, int64_t c, int64_t y, int64_t x) {
        return data_[static_cast<size_t>(((n * dims_.c + c) * dims_.h + y) * dims_.w + x)];
    }
    float at(int64_t n, int64_t c, int64_t y, int64_t x) const {
        return data_[static_cast<size_t>(((n * dims_.c + c) * dims_.h + y) * dims_.w + x)];
    }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

    bool operator==(const Tensor& other) const {
        return dims_ == other.dims_ && data_ == other.data_;
    }

private:
    Dims dims_;
    std::vector<float> data_;
};

// Throws ErrorCode::Numeric when the tensor holds a NaN or infinity.
void assert_finite(const Tensor& t, const std::string& context);

bool all_finite(const Tensor& t);

// Per-element |a - b| maximum; dims must match.
float max_abs_diff(const Tensor& a, const Tensor& b);

// Mean of |a - b| over all elements; dims must match.
double mean_abs_diff(const Tensor& a, const Tensor& b);

// Copies row n of `src` into a batch-1 tensor.
Tensor slice_batch(const Tensor& src, int64_t n);

// Stacks batch-1 tensors with identical (c,h,w) into one batch.
Tensor stack_batch(const std::vector<Tensor>& items);

void clamp01(Tensor& t);

} // namespace hfid

#endif
