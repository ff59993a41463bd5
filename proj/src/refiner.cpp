#include "refiner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "adam.hpp"

namespace hfid {

namespace {

constexpr double kLogFloor = 1e-12;

using CachePtr = std::unique_ptr<ForwardCache, CacheDeleter>;

double log_prob(const float* logits, int index) {
    std::vector<double> l{logits[0], logits[1]};
    std::vector<double> p = softmax64(l);
    return std::log(std::max(p[static_cast<size_t>(index)], kLogFloor));
}

void check_logits_shape(const Tensor& logits, const char* what) {
    const Dims& d = logits.dims();
    if (d.c != 2 || d.h != 1 || d.w != 1)
        raise(ErrorCode::ShapeMismatch, std::string(what) + ": expected (n,2,1,1) logits, got " +
                                            to_string(d));
}

// Gradient of -sum log p(target) w.r.t. the logits: softmax(logits) - t.
void cross_entropy_logit_grad(const Tensor& logits, int target_index, Tensor& grad,
                              int64_t row_offset) {
    for (int64_t n = 0; n < logits.dims().n; ++n) {
        const float* l = logits.data() + n * 2;
        std::vector<double> p = softmax64({l[0], l[1]});
        float* g = grad.data() + (row_offset + n) * 2;
        g[0] = static_cast<float>(p[0] - (target_index == 0 ? 1.0 : 0.0));
        g[1] = static_cast<float>(p[1] - (target_index == 1 ? 1.0 : 0.0));
    }
}

std::vector<int64_t> sample_indices(size_t pool, int count, Rng& rng) {
    std::vector<int64_t> out(static_cast<size_t>(count));
    if (pool >= static_cast<size_t>(count)) {
        // Partial Fisher-Yates over an index vector: distinct draws.
        std::vector<int64_t> idx(pool);
        for (size_t i = 0; i < pool; ++i) idx[i] = static_cast<int64_t>(i);
        for (int i = 0; i < count; ++i) {
            size_t j = static_cast<size_t>(i) + static_cast<size_t>(rng.below(pool - i));
            std::swap(idx[static_cast<size_t>(i)], idx[j]);
            out[static_cast<size_t>(i)] = idx[static_cast<size_t>(i)];
        }
    } else {
        for (int i = 0; i < count; ++i)
            out[static_cast<size_t>(i)] = static_cast<int64_t>(rng.below(pool));
    }
    return out;
}

Tensor gather_batch(const std::vector<Tensor>& pool, const std::vector<int64_t>& idx) {
    std::vector<Tensor> items;
    items.reserve(idx.size());
    for (int64_t i : idx)
        items.push_back(pool[static_cast<size_t>(i)]);
    return stack_batch(items);
}

} // namespace

double reg_loss(const Tensor& refined, const Tensor& original) {
    if (!refined.same_dims(original))
        raise(ErrorCode::ShapeMismatch, "reg_loss: " + to_string(refined.dims()) + " vs " +
                                            to_string(original.dims()));
    const Dims& d = refined.dims();
    int64_t stride = d.c * d.h * d.w;
    double total = 0.0;
    for (int64_t n = 0; n < d.n; ++n) {
        const float* a = refined.data() + n * stride;
        const float* b = original.data() + n * stride;
        double sq = 0.0;
        for (int64_t i = 0; i < stride; ++i) {
            double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            sq += diff * diff;
        }
        total += std::sqrt(sq);
    }
    return total;
}

double realism_loss(const std::vector<float>& logits) {
    if (logits.size() != 2)
        raise(ErrorCode::ShapeMismatch, "realism_loss: expected 2 logits");
    return -log_prob(logits.data(), LabelConvention::kReal);
}

double refiner_loss(const Tensor& refined, const Tensor& original, const Tensor& disc_logits,
                    double lambda) {
    check_logits_shape(disc_logits, "refiner_loss");
    if (disc_logits.dims().n != refined.dims().n)
        raise(ErrorCode::ShapeMismatch, "refiner_loss: logit batch mismatch");
    double realism = 0.0;
    for (int64_t n = 0; n < disc_logits.dims().n; ++n)
        realism += -log_prob(disc_logits.data() + n * 2, LabelConvention::kReal);
    return realism + lambda * reg_loss(refined, original);
}

double discriminator_loss(const Tensor& logits_refined, const Tensor& logits_real) {
    check_logits_shape(logits_refined, "discriminator_loss");
    check_logits_shape(logits_real, "discriminator_loss");
    double total = 0.0;
    for (int64_t n = 0; n < logits_refined.dims().n; ++n)
        total += -log_prob(logits_refined.data() + n * 2, LabelConvention::kFake);
    for (int64_t n = 0; n < logits_real.dims().n; ++n)
        total += -log_prob(logits_real.data() + n * 2, LabelConvention::kReal);
    return total;
}

void buffer_update(HistoryBuffer& buffer, const Tensor& refined_batch, Rng& rng) {
    const Dims& d = refined_batch.dims();
    int b = static_cast<int>(d.n);
    if (b % 2 != 0)
        raise(ErrorCode::InvalidArgument, "buffer_update: batch size must be even");
    if (!buffer.full()) {
        for (int n = 0; n < b && buffer.images.size() < buffer.capacity; ++n)
            buffer.images.push_back(slice_batch(refined_batch, n));
        return;
    }
    int half = b / 2;
    std::vector<int64_t> slots = sample_indices(buffer.images.size(), half, rng);
    std::vector<int64_t> picks = sample_indices(static_cast<size_t>(b), half, rng);
    for (int i = 0; i < half; ++i)
        buffer.images[static_cast<size_t>(slots[static_cast<size_t>(i)])] =
            slice_batch(refined_batch, picks[static_cast<size_t>(i)]);
}

Tensor disc_batch(const HistoryBuffer& buffer, const Tensor& fresh_refined, Rng& rng,
                  bool* sampled_with_replacement) {
    if (buffer.images.empty())
        raise(ErrorCode::InvalidArgument, "disc_batch: history buffer is empty");
    const Dims& d = fresh_refined.dims();
    int b = static_cast<int>(d.n);
    if (b % 2 != 0)
        raise(ErrorCode::InvalidArgument, "disc_batch: batch size must be even");
    int half = b / 2;
    bool with_replacement = buffer.images.size() < static_cast<size_t>(half);
    if (sampled_with_replacement)
        *sampled_with_replacement = with_replacement;
    std::vector<int64_t> buf_idx = sample_indices(buffer.images.size(), half, rng);
    std::vector<int64_t> fresh_idx = sample_indices(static_cast<size_t>(b), half, rng);
    std::vector<Tensor> items;
    items.reserve(static_cast<size_t>(b));
    for (int64_t i : buf_idx)
        items.push_back(buffer.images[static_cast<size_t>(i)]);
    for (int64_t i : fresh_idx)
        items.push_back(slice_batch(fresh_refined, i));
    return stack_batch(items);
}

Tensor refine_batch(const NetworkSpec& refiner, const NetworkParams& params,
                    const Tensor& batch) {
    Tensor out = forward_eval(refiner, params, batch);
    float* p = out.data();
    for (int64_t i = 0; i < out.size(); ++i)
        p[i] = 0.5f * (p[i] + 1.0f);
    return out;
}

RefinerTrainResult train_refiner(const GanConfig& config, const std::vector<Tensor>& synth,
                                 const std::vector<Tensor>& real, uint64_t seed,
                                 std::ostream* log) {
    if (config.batch_size < 2 || config.batch_size % 2 != 0)
        raise(ErrorCode::InvalidArgument, "train_refiner: batch size must be even and >= 2");
    if (config.lambda < 0.0)
        raise(ErrorCode::InvalidArgument, "train_refiner: lambda must be >= 0");
    if (synth.empty() || real.empty())
        raise(ErrorCode::InvalidArgument, "train_refiner: empty dataset");
    if (config.buffer_capacity < config.batch_size)
        raise(ErrorCode::InvalidArgument, "train_refiner: buffer capacity below batch size");

    NetworkSpec rspec = refiner_spec();
    NetworkSpec dspec = discriminator_spec();

    RefinerTrainResult result;
    result.refiner = xavier_init(rspec, hash_combine(seed, 0x52u));
    result.discriminator = xavier_init(dspec, hash_combine(seed, 0x44u));
    AdamState r_adam = adam_init(result.refiner);
    AdamState d_adam = adam_init(result.discriminator);

    Rng sample_rng(hash_combine(seed, 0x73616d70u));
    Rng buffer_rng(hash_combine(seed, 0x62756666u));
    HistoryBuffer buffer(static_cast<size_t>(config.buffer_capacity));

    const int b = config.batch_size;
    const int64_t side = rspec.input.h;
    const int64_t image_elems = 3 * side * side;

    for (int t = 1; t <= config.max_iters; ++t) {
        for (int k = 1; k <= 2; ++k) {
            Tensor x = gather_batch(synth, sample_indices(synth.size(), b, sample_rng));
            CachePtr rcache(cache_create());
            Tensor tanh_out = forward(rspec, result.refiner, x, Mode::Train, rcache.get());
            Tensor refined = tanh_out;
            for (int64_t i = 0; i < refined.size(); ++i)
                refined.data()[i] = 0.5f * (refined.data()[i] + 1.0f);

            buffer_update(buffer, refined, buffer_rng);

            CachePtr dcache(cache_create());
            Tensor logits =
                forward(dspec, result.discriminator, refined, Mode::Train, dcache.get());

            double reg = reg_loss(refined, x);
            double loss = refiner_loss(refined, x, logits, config.lambda);
            double realism = loss - config.lambda * reg;
            if (!std::isfinite(loss))
                raise(ErrorCode::Numeric, "train_refiner: refiner loss diverged at iteration " +
                                              std::to_string(t));

            // Realism gradient arrives through the discriminator input.
            Tensor dlogits(logits.dims());
            cross_entropy_logit_grad(logits, LabelConvention::kReal, dlogits, 0);
            Tensor drefined;
            backward(dspec, result.discriminator, *dcache, dlogits, &drefined,
                     /*want_param_grads=*/false);

            // Self-regularization gradient: lambda * (R(x)-x)/||R(x)-x||_2.
            for (int64_t n = 0; n < x.dims().n; ++n) {
                const float* r = refined.data() + n * image_elems;
                const float* o = x.data() + n * image_elems;
                double sq = 0.0;
                for (int64_t i = 0; i < image_elems; ++i) {
                    double diff = static_cast<double>(r[i]) - o[i];
                    sq += diff * diff;
                }
                double norm = std::sqrt(sq);
                if (norm <= 0.0)
                    continue;
                float scale = static_cast<float>(config.lambda / norm);
                float* g = drefined.data() + n * image_elems;
                for (int64_t i = 0; i < image_elems; ++i)
                    g[i] += scale * (r[i] - o[i]);
            }
            // Chain through the [-1,1] -> [0,1] rescale.
            for (int64_t i = 0; i < drefined.size(); ++i)
                drefined.data()[i] *= 0.5f;

            NetworkParams rgrads = backward(rspec, result.refiner, *rcache, drefined);
            adam_step(result.refiner, rgrads, r_adam, config.refiner_lr);
            result.history.push_back({t, 'R', k, loss, realism, reg});
        }

        // Discriminator update: half history buffer, half freshly refined.
        Tensor x2 = gather_batch(synth, sample_indices(synth.size(), b, sample_rng));
        Tensor y = gather_batch(real, sample_indices(real.size(), b, sample_rng));
        Tensor fresh = refine_batch(rspec, result.refiner, x2);
        bool fallback = false;
        Tensor fake = disc_batch(buffer, fresh, buffer_rng, &fallback);
        if (fallback && !result.buffer_fallback_logged) {
            result.buffer_fallback_logged = true;
            if (log)
                *log << "train_refiner: buffer below b/2, sampling with replacement\n";
        }

        Tensor dinput(Dims{fake.dims().n + y.dims().n, 3, side, side});
        std::memcpy(dinput.data(), fake.data(), static_cast<size_t>(fake.size()) * sizeof(float));
        std::memcpy(dinput.data() + fake.size(), y.data(),
                    static_cast<size_t>(y.size()) * sizeof(float));

        CachePtr dcache(cache_create());
        Tensor logits = forward(dspec, result.discriminator, dinput, Mode::Train, dcache.get());
        Tensor logits_fake(Dims{fake.dims().n, 2, 1, 1});
        Tensor logits_real(Dims{y.dims().n, 2, 1, 1});
        std::memcpy(logits_fake.data(), logits.data(),
                    static_cast<size_t>(logits_fake.size()) * sizeof(float));
        std::memcpy(logits_real.data(), logits.data() + logits_fake.size(),
                    static_cast<size_t>(logits_real.size()) * sizeof(float));

        double dloss = discriminator_loss(logits_fake, logits_real);
        if (!std::isfinite(dloss))
            raise(ErrorCode::Numeric, "train_refiner: discriminator loss diverged at iteration " +
                                          std::to_string(t));

        Tensor dlogits(logits.dims());
        cross_entropy_logit_grad(logits_fake, LabelConvention::kFake, dlogits, 0);
        cross_entropy_logit_grad(logits_real, LabelConvention::kReal, dlogits, fake.dims().n);
        NetworkParams dgrads = backward(dspec, result.discriminator, *dcache, dlogits);
        adam_step(result.discriminator, dgrads, d_adam, config.disc_lr);
        result.history.push_back({t, 'D', 0, dloss, 0.0, 0.0});

        if (log && (t % 50 == 0 || t == config.max_iters)) {
            const GanStepRecord& r1 = result.history[result.history.size() - 2];
            *log << "iter " << t << "/" << config.max_iters << " L_R=" << r1.loss
                 << " (reg " << r1.reg << ") L_D=" << dloss << " buffer " << buffer.size()
                 << "\n";
        }
    }
    return result;
}

} // namespace hfid
