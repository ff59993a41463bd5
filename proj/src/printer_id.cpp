#include "printer_id.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "adam.hpp"
#include "rng.hpp"

namespace hfid {

namespace {

using CachePtr = std::unique_ptr<ForwardCache, CacheDeleter>;

constexpr double kProbFloor = 1e-12;

double bilinear_at(const float* plane, int64_t h, int64_t w, double y, double x) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    int64_t x0 = static_cast<int64_t>(x), y0 = static_cast<int64_t>(y);
    int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double tx = x - x0, ty = y - y0;
    double a = plane[y0 * w + x0] * (1 - tx) + plane[y0 * w + x1] * tx;
    double b = plane[y1 * w + x0] * (1 - tx) + plane[y1 * w + x1] * tx;
    return a * (1 - ty) + b * ty;
}

// Shared resampling core: out(p) = src(center + R(-theta) * (p - center)/s).
Tensor resample_about_center(const Tensor& src, int64_t out_h, int64_t out_w, double scale,
                             double theta_deg) {
    const Dims& d = src.dims();
    Tensor out(Dims{1, d.c, out_h, out_w});
    double rad = theta_deg * M_PI / 180.0;
    double ca = std::cos(rad), sa = std::sin(rad);
    double cy_src = static_cast<double>(d.h) / 2.0;
    double cx_src = static_cast<double>(d.w) / 2.0;
    double cy_out = static_cast<double>(out_h) / 2.0;
    double cx_out = static_cast<double>(out_w) / 2.0;
    for (int64_t c = 0; c < d.c; ++c) {
        const float* plane = src.data() + c * d.h * d.w;
        float* dst = out.data() + c * out_h * out_w;
        for (int64_t y = 0; y < out_h; ++y)
            for (int64_t x = 0; x < out_w; ++x) {
                double ox = (x + 0.5) - cx_out;
                double oy = (y + 0.5) - cy_out;
                // Inverse map: rotate by -theta, divide by the scale.
                double sx = (ox * ca + oy * sa) / scale;
                double sy = (-ox * sa + oy * ca) / scale;
                double px = cx_src + sx - 0.5;
                double py = cy_src + sy - 0.5;
                dst[y * out_w + x] = static_cast<float>(bilinear_at(plane, d.h, d.w, py, px));
            }
    }
    return out;
}

} // namespace

TransferMap TransferMap::default_map() {
    TransferMap m;
    for (int i = 1; i <= 7; ++i)
        m.pairs.emplace_back(i, i);
    return m;
}

NetworkParams transfer_init(const NetworkParams& hcd_params, const NetworkSpec& pi,
                            const TransferMap& map, uint64_t seed) {
    NetworkParams out = xavier_init(pi, seed);
    for (const auto& [src, dst] : map.pairs) {
        if (src < 1 || src > static_cast<int>(hcd_params.layers.size()) || dst < 1 ||
            dst > static_cast<int>(out.layers.size()))
            raise(ErrorCode::InvalidArgument,
                  "transfer_init: pair (" + std::to_string(src) + "," + std::to_string(dst) +
                      ") out of range");
        const LayerParams& s = hcd_params.layers[static_cast<size_t>(src - 1)];
        LayerParams& d = out.layers[static_cast<size_t>(dst - 1)];
        auto mismatch = [&](const Tensor& a, const Tensor& b) {
            return a.empty() != b.empty() || (!a.empty() && !(a.dims() == b.dims()));
        };
        if (mismatch(s.weight, d.weight) || mismatch(s.bias, d.bias) ||
            mismatch(s.bn_scale, d.bn_scale) || mismatch(s.bn_shift, d.bn_shift))
            raise(ErrorCode::ShapeMismatch,
                  "transfer_init: shape mismatch at pair (" + std::to_string(src) + "," +
                      std::to_string(dst) + "): " + to_string(s.weight.dims()) + " vs " +
                      to_string(d.weight.dims()));
        d = s;
    }
    return out;
}

Tensor rotate_scale(const Tensor& image, double scale, double theta_deg) {
    const Dims& d = image.dims();
    if (d.n != 1)
        raise(ErrorCode::InvalidArgument, "rotate_scale: expects batch of 1");
    if (scale == 1.0 && theta_deg == 0.0)
        return image;
    if (scale <= 0.0)
        raise(ErrorCode::InvalidArgument, "rotate_scale: scale must be positive");
    return resample_about_center(image, d.h, d.w, scale, theta_deg);
}

Tensor augment_block(const Tensor& source, double scale, double theta_deg) {
    const Dims& d = source.dims();
    if (d.n != 1 || d.h != BlockSet::kSourceSide || d.w != BlockSet::kSourceSide)
        raise(ErrorCode::ShapeMismatch, "augment_block: expects a (1,c,96,96) source region");
    if (scale < 0.5 || scale > 2.0)
        raise(ErrorCode::InvalidArgument, "augment_block: scale outside [0.5, 2]");
    if (std::fabs(theta_deg) > 45.0)
        raise(ErrorCode::InvalidArgument, "augment_block: rotation outside +-45 degrees");
    if (scale == 1.0 && theta_deg == 0.0)
        return crop(source, 16, 16, 64, 64);
    return resample_about_center(source, 64, 64, scale, theta_deg);
}

void BlockSet::add(const Tensor& source96, int label) {
    const Dims& d = source96.dims();
    if (d.n != 1 || d.c != 3 || d.h != kSourceSide || d.w != kSourceSide)
        raise(ErrorCode::ShapeMismatch, "BlockSet::add: expects (1,3,96,96)");
    std::vector<uint8_t> bytes(static_cast<size_t>(3 * kSourceSide * kSourceSide));
    for (size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<uint8_t>(
            std::lround(std::clamp(source96.data()[i], 0.0f, 1.0f) * 255.0f));
    sources.push_back(std::move(bytes));
    labels.push_back(label);
}

Tensor BlockSet::source_tensor(size_t i) const {
    Tensor t(Dims{1, 3, kSourceSide, kSourceSide});
    const std::vector<uint8_t>& bytes = sources[i];
    for (size_t j = 0; j < bytes.size(); ++j)
        t.data()[j] = static_cast<float>(bytes[j]) / 255.0f;
    return t;
}

Tensor BlockSet::central_block(size_t i) const {
    Tensor t(Dims{1, 3, 64, 64});
    const std::vector<uint8_t>& bytes = sources[i];
    constexpr int s = kSourceSide;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < 64; ++y)
            for (int64_t x = 0; x < 64; ++x)
                t.data()[(c * 64 + y) * 64 + x] =
                    static_cast<float>(bytes[static_cast<size_t>((c * s + y + 16) * s + x + 16)]) /
                    255.0f;
    return t;
}

PiTrainResult train_pi_phase(const PiConfig& config, const NetworkSpec& spec,
                             const BlockSet& train, const BlockSet& val,
                             const NetworkParams& init, const AugmentPolicy* policy,
                             uint64_t seed, std::ostream* log) {
    if (train.size() == 0 || val.size() == 0)
        raise(ErrorCode::InvalidArgument, "train_pi_phase: empty train or validation set");
    if (config.n_printers != spec.output_shape().c)
        raise(ErrorCode::InvalidArgument, "train_pi_phase: n_printers does not match the spec");
    if (policy && (policy->scales.empty() || policy->rotations_deg.empty()))
        raise(ErrorCode::InvalidArgument, "train_pi_phase: empty augmentation policy");

    PiTrainResult result;
    NetworkParams params = init;
    AdamState adam = adam_init(params);
    Rng rng(hash_combine(seed, 0x5049u));
    uint64_t val_aug_seed = hash_combine(seed, 0x76616cu);

    auto train_block = [&](size_t i, Rng& r) {
        if (!policy)
            return train.central_block(i);
        double s = policy->scales[r.below(policy->scales.size())];
        double th = policy->rotations_deg[r.below(policy->rotations_deg.size())];
        return augment_block(train.source_tensor(i), s, th);
    };
    auto val_block = [&](size_t i) {
        if (!policy)
            return val.central_block(i);
        uint64_t h = hash_combine(val_aug_seed, i);
        double s = policy->scales[h % policy->scales.size()];
        double th = policy->rotations_deg[splitmix64(h) % policy->rotations_deg.size()];
        return augment_block(val.source_tensor(i), s, th);
    };

    auto val_accuracy = [&](const NetworkParams& p) {
        size_t correct = 0, done = 0;
        while (done < val.size()) {
            size_t take =
                std::min<size_t>(static_cast<size_t>(config.batch_size), val.size() - done);
            std::vector<Tensor> items;
            items.reserve(take);
            for (size_t i = 0; i < take; ++i)
                items.push_back(val_block(done + i));
            Tensor batch = stack_batch(items);
            Tensor probs = forward_eval(spec, p, batch);
            int64_t n_cls = probs.dims().c;
            for (size_t i = 0; i < take; ++i) {
                const float* row = probs.data() + static_cast<int64_t>(i) * n_cls;
                int best = 0;
                for (int64_t c = 1; c < n_cls; ++c)
                    if (row[c] > row[best]) best = static_cast<int>(c);
                if (best == val.labels[done + i]) ++correct;
            }
            done += take;
        }
        return static_cast<double>(correct) / static_cast<double>(val.size());
    };

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    double best_acc = -1.0;
    int64_t n_cls = spec.output_shape().c;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        Rng aug_rng = rng.fork(static_cast<uint64_t>(epoch));
        double epoch_loss = 0.0;
        int64_t batches = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            if (end - start < 2)
                break;
            std::vector<Tensor> items;
            items.reserve(end - start);
            for (size_t i = start; i < end; ++i)
                items.push_back(train_block(order[i], aug_rng));
            Tensor batch = stack_batch(items);
            CachePtr cache(cache_create());
            Tensor probs = forward(spec, params, batch, Mode::Train, cache.get());
            int64_t n = probs.dims().n;
            double loss = 0.0;
            Tensor dprobs(probs.dims());
            for (int64_t i = 0; i < n; ++i) {
                int label = train.labels[order[start + static_cast<size_t>(i)]];
                double p = std::max<double>(probs.data()[i * n_cls + label], kProbFloor);
                loss -= std::log(p);
                dprobs.data()[i * n_cls + label] =
                    static_cast<float>(-1.0 / (p * static_cast<double>(n)));
            }
            loss /= static_cast<double>(n);
            if (!std::isfinite(loss))
                raise(ErrorCode::Numeric,
                      "train_pi_phase: loss diverged at epoch " + std::to_string(epoch));
            epoch_loss += loss;
            ++batches;
            NetworkParams grads = backward(spec, params, *cache, dprobs);
            adam_step(params, grads, adam, config.lr);
        }
        double acc = val_accuracy(params);
        result.curve.push_back({epoch, batches ? epoch_loss / batches : 0.0, acc});
        result.stop_epoch = epoch;
        if (log)
            *log << "pi epoch " << epoch << " loss " << (batches ? epoch_loss / batches : 0.0)
                 << " val acc " << acc << "\n";
        if (acc > best_acc) {
            best_acc = acc;
            result.best_epoch = epoch;
            result.params = params;
        }
        if (epoch - result.best_epoch >= config.patience)
            break;
    }
    return result;
}

std::vector<float> classify_block(const NetworkParams& params, const NetworkSpec& spec,
                                  const Tensor& block) {
    Tensor probs = forward_eval(spec, params, block);
    return std::vector<float>(probs.data(), probs.data() + probs.size());
}

Tensor crop(const Tensor& image, int64_t y0, int64_t x0, int64_t h, int64_t w) {
    const Dims& d = image.dims();
    if (d.n != 1 || y0 < 0 || x0 < 0 || y0 + h > d.h || x0 + w > d.w)
        raise(ErrorCode::InvalidArgument, "crop: window outside image");
    Tensor out(Dims{1, d.c, h, w});
    for (int64_t c = 0; c < d.c; ++c)
        for (int64_t y = 0; y < h; ++y)
            std::memcpy(out.data() + (c * h + y) * w,
                        image.data() + (c * d.h + y0 + y) * d.w + x0,
                        static_cast<size_t>(w) * sizeof(float));
    return out;
}

IdentifyResult identify_image(const NetworkParams& params, const NetworkSpec& spec,
                              const Tensor& image) {
    const Dims& d = image.dims();
    if (d.n != 1 || d.c != 3)
        raise(ErrorCode::InvalidArgument, "identify_image: expects one RGB image");
    if (d.h < 64 || d.w < 64)
        raise(ErrorCode::InvalidArgument, "identify_image: image smaller than one 64x64 block");

    IdentifyResult res;
    res.blocks_y = static_cast<int>(d.h / 64);
    res.blocks_x = static_cast<int>(d.w / 64);
    int64_t n_cls = spec.output_shape().c;
    std::vector<double> sum(static_cast<size_t>(n_cls), 0.0);
    for (int gy = 0; gy < res.blocks_y; ++gy)
        for (int gx = 0; gx < res.blocks_x; ++gx) {
            Tensor block = crop(image, static_cast<int64_t>(gy) * 64,
                                static_cast<int64_t>(gx) * 64, 64, 64);
            std::vector<float> scores = classify_block(params, spec, block);
            for (int64_t c = 0; c < n_cls; ++c)
                sum[static_cast<size_t>(c)] += scores[static_cast<size_t>(c)];
            res.block_scores.push_back(std::move(scores));
        }
    double m = static_cast<double>(res.blocks_y) * res.blocks_x;
    res.mean_scores.resize(static_cast<size_t>(n_cls));
    for (int64_t c = 0; c < n_cls; ++c)
        res.mean_scores[static_cast<size_t>(c)] = sum[static_cast<size_t>(c)] / m;
    res.printer = 0;
    for (int64_t c = 1; c < n_cls; ++c)
        if (res.mean_scores[static_cast<size_t>(c)] >
            res.mean_scores[static_cast<size_t>(res.printer)])
            res.printer = static_cast<int>(c);
    return res;
}

} // namespace hfid
