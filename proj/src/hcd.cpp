#include "hcd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "adam.hpp"
#include "halftone.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace hfid {

namespace {

using CachePtr = std::unique_ptr<ForwardCache, CacheDeleter>;

Tensor gather(const std::vector<Tensor>& pool, const std::vector<size_t>& idx, size_t from,
              size_t to) {
    std::vector<Tensor> items;
    items.reserve(to - from);
    for (size_t i = from; i < to; ++i)
        items.push_back(pool[idx[i]]);
    return stack_batch(items);
}

} // namespace

double euclidean_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_dims(target))
        raise(ErrorCode::ShapeMismatch, "euclidean_loss: " + to_string(pred.dims()) + " vs " +
                                            to_string(target.dims()));
    double sq = 0.0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        double d = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
        sq += d * d;
    }
    return sq / (2.0 * static_cast<double>(pred.dims().n));
}

HcdTrainResult train_hcd(const HcdConfig& config, const PairedSet& train, const PairedSet& val,
                         uint64_t seed, std::ostream* log) {
    if (config.lr <= 0.0f)
        raise(ErrorCode::InvalidArgument, "train_hcd: lr must be positive");
    if (train.size() == 0 || val.size() == 0)
        raise(ErrorCode::InvalidArgument, "train_hcd: empty train or validation set");
    if (train.rgb.size() != train.cmyk.size() || val.rgb.size() != val.cmyk.size())
        raise(ErrorCode::InvalidArgument, "train_hcd: rgb/cmyk counts differ");

    NetworkSpec spec = hcd_spec();
    HcdTrainResult result;
    NetworkParams params = xavier_init(spec, hash_combine(seed, 0x484344u));
    AdamState adam = adam_init(params);
    Rng rng(hash_combine(seed, 0x65706f63u));

    auto val_loss = [&](const NetworkParams& p) {
        double total = 0.0;
        size_t done = 0;
        while (done < val.size()) {
            size_t take = std::min<size_t>(static_cast<size_t>(config.batch_size),
                                           val.size() - done);
            std::vector<size_t> idx(take);
            for (size_t i = 0; i < take; ++i)
                idx[i] = done + i;
            Tensor x = gather(val.rgb, idx, 0, take);
            Tensor y = gather(val.cmyk, idx, 0, take);
            Tensor pred = forward_eval(spec, p, x);
            // Accumulate the per-batch sums so the total matches a single
            // whole-set euclidean loss.
            total += euclidean_loss(pred, y) * 2.0 * static_cast<double>(take);
            done += take;
        }
        return total / (2.0 * static_cast<double>(val.size()));
    };

    double best = 0.0;
    bool have_best = false;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = i;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int64_t batches = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            if (end - start < 2)
                break; // batch-norm statistics need at least two rows
            Tensor x = gather(train.rgb, order, start, end);
            Tensor y = gather(train.cmyk, order, start, end);
            CachePtr cache(cache_create());
            Tensor pred = forward(spec, params, x, Mode::Train, cache.get());
            double loss = euclidean_loss(pred, y);
            if (!std::isfinite(loss))
                raise(ErrorCode::Numeric,
                      "train_hcd: loss diverged at epoch " + std::to_string(epoch));
            epoch_loss += loss;
            ++batches;
            Tensor dpred(pred.dims());
            float inv_n = 1.0f / static_cast<float>(pred.dims().n);
            for (int64_t i = 0; i < pred.size(); ++i)
                dpred.data()[i] = (pred.data()[i] - y.data()[i]) * inv_n;
            NetworkParams grads = backward(spec, params, *cache, dpred);
            adam_step(params, grads, adam, config.lr);
        }
        double vloss = val_loss(params);
        if (!std::isfinite(vloss))
            raise(ErrorCode::Numeric, "train_hcd: validation loss diverged");
        result.curve.push_back({epoch, batches ? epoch_loss / batches : 0.0, vloss});
        if (log)
            *log << "hcd epoch " << epoch << " train " << (batches ? epoch_loss / batches : 0.0)
                 << " val " << vloss << "\n";
        if (!have_best || vloss < best) {
            best = vloss;
            have_best = true;
            result.best_epoch = epoch;
            result.params = params;
        }
        if (epoch - result.best_epoch >= config.patience)
            break;
    }
    return result;
}

Tensor decompose(const NetworkParams& params, const Tensor& rgb) {
    return forward_eval(hcd_spec(), params, rgb);
}

DecompositionReport evaluate_decomposition(const NetworkParams& params,
                                           const PairedSet& eval_set) {
    if (eval_set.size() == 0)
        raise(ErrorCode::InvalidArgument, "evaluate_decomposition: empty set");
    DecompositionReport report;
    report.sample_count = eval_set.size();
    NetworkSpec spec = hcd_spec();
    int64_t plane = 0;
    for (size_t i = 0; i < eval_set.size(); ++i) {
        const Tensor& rgb = eval_set.rgb[i];
        const Tensor& gt = eval_set.cmyk[i];
        plane = gt.dims().h * gt.dims().w;
        Tensor pred = forward_eval(spec, params, rgb);
        clamp01(pred);
        Tensor base = naive_profile_decompose(rgb);
        for (int ch = 0; ch < 4; ++ch) {
            Tensor pc(Dims{1, 1, gt.dims().h, gt.dims().w});
            Tensor bc = pc, gc = pc;
            std::copy_n(pred.data() + ch * plane, plane, pc.data());
            std::copy_n(base.data() + ch * plane, plane, bc.data());
            std::copy_n(gt.data() + ch * plane, plane, gc.data());
            report.channel[ch].psnr_hcd += psnr(pc, gc);
            report.channel[ch].psnr_profile += psnr(bc, gc);
            report.channel[ch].ssim_hcd += ssim(pc, gc);
            report.channel[ch].ssim_profile += ssim(bc, gc);
        }
    }
    for (int ch = 0; ch < 4; ++ch) {
        report.channel[ch].psnr_hcd /= static_cast<double>(report.sample_count);
        report.channel[ch].psnr_profile /= static_cast<double>(report.sample_count);
        report.channel[ch].ssim_hcd /= static_cast<double>(report.sample_count);
        report.channel[ch].ssim_profile /= static_cast<double>(report.sample_count);
    }
    return report;
}

std::string decomposition_report_tsv(const DecompositionReport& report) {
    static const char* names[4] = {"cyan", "magenta", "yellow", "black"};
    std::ostringstream out;
    out << "channel\tpsnr_hcd\tpsnr_profile\tssim_hcd\tssim_profile\n";
    out.setf(std::ios::fixed);
    out.precision(4);
    for (int ch = 0; ch < 4; ++ch)
        out << names[ch] << '\t' << report.channel[ch].psnr_hcd << '\t'
            << report.channel[ch].psnr_profile << '\t' << report.channel[ch].ssim_hcd << '\t'
            << report.channel[ch].ssim_profile << '\n';
    return out.str();
}

} // namespace hfid
